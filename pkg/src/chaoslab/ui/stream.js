/**
 * Subscription to an experiment's server-push bucket feed.
 *
 * Wraps an EventSource so the live view only sees parsed documents and
 * a staleness flag. The browser retries a dropped-but-connecting source
 * itself; a source that closed outright (server restart, 404) is
 * replaced after a short delay. The feed replays every closed bucket
 * from the start of the run on each (re)connect, so consumers must
 * ingest idempotently.
 */
const CLOSED = 2; // EventSource.CLOSED
const RECONNECT_MS = 1000;
export class BucketStream {
    constructor(url, handlers, factory = (u) => new EventSource(u)) {
        this.url = url;
        this.handlers = handlers;
        this.factory = factory;
        this.source = null;
        this.timer = null;
        this.ended = false;
    }
    start() {
        if (this.ended || this.source)
            return;
        const es = this.factory(this.url);
        this.source = es;
        es.addEventListener('open', () => this.handlers.onStale(false));
        es.addEventListener('bucket', (ev) => {
            this.handlers.onStale(false);
            this.handlers.onBucket(JSON.parse(ev.data));
        });
        es.addEventListener('end', (ev) => {
            this.ended = true;
            this.stop();
            this.handlers.onEnd(JSON.parse(ev.data));
        });
        es.addEventListener('error', () => {
            if (this.ended)
                return;
            this.handlers.onStale(true);
            if (es.readyState === CLOSED) {
                this.stop();
                this.timer = setTimeout(() => {
                    this.timer = null;
                    this.start();
                }, RECONNECT_MS);
            }
        });
    }
    stop() {
        if (this.timer !== null) {
            clearTimeout(this.timer);
            this.timer = null;
        }
        if (this.source) {
            this.source.close();
            this.source = null;
        }
    }
}
