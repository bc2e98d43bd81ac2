/**
 * Typed client for the /api/v1 control plane.
 *
 * Every dashboard action maps onto exactly one method here, and every
 * method onto exactly one endpoint. Non-success responses carry one
 * error document; that document becomes an ApiRequestError so callers
 * can render the machine-readable code and any validation issues.
 */

import type {
  ApiErrorDoc,
  ClustersResponse,
  CreateResponse,
  ExperimentDoc,
  ExperimentListResponse,
  MetricsResponse,
  ReportDoc,
  RoutingResponse,
  SpecDoc,
  ValidationIssueDoc,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly details?: ApiErrorDoc['details'],
  ) {
    super(message);
    this.name = 'ApiRequestError';
  }

  /** Validation issues attached by the server, if any. */
  issues(): ValidationIssueDoc[] {
    return this.details?.issues ?? [];
  }
}

export interface MetricsParams {
  command?: string;
  group?: string;
  outcome?: string;
  since_ms?: number;
  until_ms?: number;
}

export class ApiClient {
  constructor(
    private readonly base = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { 'Content-Type': 'application/json' };
      init.body = JSON.stringify(body);
    }
    let res: Response;
    try {
      res = await this.fetchFn(this.base + path, init);
    } catch (err) {
      throw new ApiRequestError(0, 'network_error', String(err));
    }
    const doc = (await res.json().catch(() => null)) as unknown;
    if (!res.ok) {
      const e = doc as ApiErrorDoc | null;
      throw new ApiRequestError(
        res.status,
        e?.code ?? 'http_error',
        e?.message ?? `HTTP ${res.status}`,
        e?.details,
      );
    }
    return doc as T;
  }

  clusters(): Promise<ClustersResponse> {
    return this.request('GET', '/api/v1/clusters');
  }

  routing(cluster: string): Promise<RoutingResponse> {
    return this.request('GET', `/api/v1/clusters/${encodeURIComponent(cluster)}/routing`);
  }

  createExperiment(doc: SpecDoc): Promise<CreateResponse> {
    return this.request('POST', '/api/v1/experiments', doc);
  }

  listExperiments(): Promise<ExperimentListResponse> {
    return this.request('GET', '/api/v1/experiments');
  }

  getExperiment(id: string): Promise<ExperimentDoc> {
    return this.request('GET', `/api/v1/experiments/${encodeURIComponent(id)}`);
  }

  startExperiment(id: string): Promise<ExperimentDoc> {
    return this.request('POST', `/api/v1/experiments/${encodeURIComponent(id)}/start`);
  }

  abortExperiment(id: string, reason?: string): Promise<ExperimentDoc> {
    const path = `/api/v1/experiments/${encodeURIComponent(id)}/abort`;
    return this.request('POST', path, reason === undefined ? undefined : { reason });
  }

  metrics(id: string, params: MetricsParams = {}): Promise<MetricsResponse> {
    const q = new URLSearchParams();
    for (const [k, v] of Object.entries(params)) {
      if (v !== undefined) q.set(k, String(v));
    }
    const qs = q.toString();
    const path = `/api/v1/experiments/${encodeURIComponent(id)}/metrics`;
    return this.request('GET', qs ? `${path}?${qs}` : path);
  }

  report(id: string): Promise<ReportDoc> {
    return this.request('GET', `/api/v1/experiments/${encodeURIComponent(id)}/report`);
  }

  /** URL of the server-push bucket stream for an experiment. */
  streamUrl(id: string): string {
    return `${this.base}/api/v1/experiments/${encodeURIComponent(id)}/stream`;
  }
}
