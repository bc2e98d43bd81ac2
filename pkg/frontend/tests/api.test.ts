/**
 * ApiClient request shaping and error handling against a recorded
 * fetch: URLs, methods, bodies, and the error documents the control
 * plane returns.
 */

import { beforeEach, describe, expect, it } from 'vitest';
import { ApiClient, ApiRequestError } from '../src/api.js';
import type { FetchLike } from '../src/api.js';
import aliceSpec from './fixtures/alice.json';
import type { SpecDoc } from '../src/types.js';

interface Recorded {
  url: string;
  method: string;
  body: unknown;
  contentType: string | undefined;
}

let calls: Recorded[];
let responses: Response[];

const fakeFetch: FetchLike = (input, init) => {
  const headers = (init?.headers ?? {}) as Record<string, string>;
  calls.push({
    url: input,
    method: init?.method ?? 'GET',
    body: init?.body ? JSON.parse(init.body as string) : undefined,
    contentType: headers['Content-Type'],
  });
  const next = responses.shift();
  if (!next) throw new Error('no response queued');
  return Promise.resolve(next);
};

function queue(status: number, body: unknown): void {
  responses.push(
    new Response(JSON.stringify(body), {
      status,
      headers: { 'Content-Type': 'application/json' },
    }),
  );
}

describe('ApiClient', () => {
  let api: ApiClient;

  beforeEach(() => {
    calls = [];
    responses = [];
    api = new ApiClient('', fakeFetch);
  });

  it('lists clusters with a plain GET', async () => {
    queue(200, { schema_version: 1, scenario: 'gallery', clusters: [] });
    const doc = await api.clusters();
    expect(calls[0]).toMatchObject({ url: '/api/v1/clusters', method: 'GET' });
    expect(doc.scenario).toBe('gallery');
  });

  it('posts the spec document as JSON on create', async () => {
    queue(201, { schema_version: 1, id: 'alice-gallery-error' });
    await api.createExperiment(aliceSpec as unknown as SpecDoc);
    expect(calls[0].url).toBe('/api/v1/experiments');
    expect(calls[0].method).toBe('POST');
    expect(calls[0].contentType).toBe('application/json');
    expect(calls[0].body).toEqual(aliceSpec);
  });

  it('drives lifecycle endpoints with encoded ids', async () => {
    queue(200, { id: 'a b' });
    queue(200, { id: 'a b' });
    await api.startExperiment('a b');
    await api.getExperiment('a b');
    expect(calls[0].url).toBe('/api/v1/experiments/a%20b/start');
    expect(calls[1].url).toBe('/api/v1/experiments/a%20b');
    expect(api.streamUrl('a b')).toBe('/api/v1/experiments/a%20b/stream');
  });

  it('aborts with a reason body only when one is given', async () => {
    queue(200, { phase: 'Aborted' });
    queue(200, { phase: 'Aborted' });
    await api.abortExperiment('x', 'bad day');
    await api.abortExperiment('x');
    expect(calls[0].body).toEqual({ reason: 'bad day' });
    expect(calls[1].body).toBeUndefined();
    expect(calls[0].url).toBe('/api/v1/experiments/x/abort');
  });

  it('builds metrics queries from only the params provided', async () => {
    queue(200, { series: [] });
    queue(200, { series: [] });
    await api.metrics('x', { group: 'api-chap-control', since_ms: 0, until_ms: 60000 });
    await api.metrics('x');
    expect(calls[0].url).toBe(
      '/api/v1/experiments/x/metrics?group=api-chap-control&since_ms=0&until_ms=60000',
    );
    expect(calls[1].url).toBe('/api/v1/experiments/x/metrics');
  });

  it('turns an error document into an ApiRequestError with its issues', async () => {
    queue(400, {
      schema_version: 1,
      code: 'invalid_spec',
      message: 'experiment spec rejected',
      details: { issues: [{ code: 'bad_id', message: 'id must be a non-empty string' }] },
    });
    const err = await api.createExperiment(aliceSpec as unknown as SpecDoc).catch((e) => e);
    expect(err).toBeInstanceOf(ApiRequestError);
    expect(err.status).toBe(400);
    expect(err.code).toBe('invalid_spec');
    expect(err.issues()).toEqual([
      { code: 'bad_id', message: 'id must be a non-empty string' },
    ]);
  });

  it('falls back to a generic code when the error body is not a document', async () => {
    responses.push(new Response('gateway exploded', { status: 502 }));
    const err = await api.clusters().catch((e) => e);
    expect(err).toBeInstanceOf(ApiRequestError);
    expect(err.code).toBe('http_error');
    expect(err.status).toBe(502);
  });

  it('wraps transport failures as network_error with status 0', async () => {
    const failing: FetchLike = () => Promise.reject(new TypeError('connection refused'));
    const offline = new ApiClient('', failing);
    const err = await offline.clusters().catch((e) => e);
    expect(err).toBeInstanceOf(ApiRequestError);
    expect(err.status).toBe(0);
    expect(err.code).toBe('network_error');
  });

  it('prefixes every path with the configured base', async () => {
    const based = new ApiClient('http://127.0.0.1:8310', fakeFetch);
    queue(200, {});
    await based.report('x');
    expect(calls[0].url).toBe('http://127.0.0.1:8310/api/v1/experiments/x/report');
    expect(based.streamUrl('x')).toBe('http://127.0.0.1:8310/api/v1/experiments/x/stream');
  });
});
