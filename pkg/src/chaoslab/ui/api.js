/**
 * Typed client for the /api/v1 control plane.
 *
 * Every dashboard action maps onto exactly one method here, and every
 * method onto exactly one endpoint. Non-success responses carry one
 * error document; that document becomes an ApiRequestError so callers
 * can render the machine-readable code and any validation issues.
 */
export class ApiRequestError extends Error {
    constructor(status, code, message, details) {
        super(message);
        this.status = status;
        this.code = code;
        this.details = details;
        this.name = 'ApiRequestError';
    }
    /** Validation issues attached by the server, if any. */
    issues() {
        return this.details?.issues ?? [];
    }
}
export class ApiClient {
    constructor(base = '', fetchFn = (input, init) => fetch(input, init)) {
        this.base = base;
        this.fetchFn = fetchFn;
    }
    async request(method, path, body) {
        const init = { method };
        if (body !== undefined) {
            init.headers = { 'Content-Type': 'application/json' };
            init.body = JSON.stringify(body);
        }
        let res;
        try {
            res = await this.fetchFn(this.base + path, init);
        }
        catch (err) {
            throw new ApiRequestError(0, 'network_error', String(err));
        }
        const doc = (await res.json().catch(() => null));
        if (!res.ok) {
            const e = doc;
            throw new ApiRequestError(res.status, e?.code ?? 'http_error', e?.message ?? `HTTP ${res.status}`, e?.details);
        }
        return doc;
    }
    clusters() {
        return this.request('GET', '/api/v1/clusters');
    }
    routing(cluster) {
        return this.request('GET', `/api/v1/clusters/${encodeURIComponent(cluster)}/routing`);
    }
    createExperiment(doc) {
        return this.request('POST', '/api/v1/experiments', doc);
    }
    listExperiments() {
        return this.request('GET', '/api/v1/experiments');
    }
    getExperiment(id) {
        return this.request('GET', `/api/v1/experiments/${encodeURIComponent(id)}`);
    }
    startExperiment(id) {
        return this.request('POST', `/api/v1/experiments/${encodeURIComponent(id)}/start`);
    }
    abortExperiment(id, reason) {
        const path = `/api/v1/experiments/${encodeURIComponent(id)}/abort`;
        return this.request('POST', path, reason === undefined ? undefined : { reason });
    }
    metrics(id, params = {}) {
        const q = new URLSearchParams();
        for (const [k, v] of Object.entries(params)) {
            if (v !== undefined)
                q.set(k, String(v));
        }
        const qs = q.toString();
        const path = `/api/v1/experiments/${encodeURIComponent(id)}/metrics`;
        return this.request('GET', qs ? `${path}?${qs}` : path);
    }
    report(id) {
        return this.request('GET', `/api/v1/experiments/${encodeURIComponent(id)}/report`);
    }
    /** URL of the server-push bucket stream for an experiment. */
    streamUrl(id) {
        return `${this.base}/api/v1/experiments/${encodeURIComponent(id)}/stream`;
    }
}
