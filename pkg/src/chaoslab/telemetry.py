"""In-memory bucketed telemetry: counters and latency observations.

Counters are keyed by MetricId(group, command, outcome) and land in fixed
width time buckets, [k*width, (k+1)*width). Two reserved metric families sit
beside the per-command ones:

  - (group, "sps", None): stream starts, no outcome dimension
  - (group, "requests", outcome): whole-request results, outcome in
    {success, degraded, failure}

Everything is guarded by one lock so real-time runs can write from the
engine thread while the API reads snapshots.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

SIM_BUCKET_MS = 1_000.0
REALTIME_BUCKET_MS = 5_000.0

COMMAND_OUTCOMES = (
    "success",
    "fallback_success",
    "fallback_failure",
    "short_circuit_annotation",
    "injected_error",
    "injected_latency",
    "overload",
)
REQUEST_OUTCOMES = ("success", "degraded", "failure")


@dataclass(frozen=True)
class WindowResult:
    points: tuple[tuple[float, int], ...]
    total: int
    exists: bool
    bucket_ms: float


@dataclass(frozen=True)
class SpsSample:
    """SPS over a window. `normalized` is stream starts per routed request;
    it is None (and defined is False) when the group saw no requests, which
    callers must treat as missing data rather than zero.
    """

    rate_per_s: float
    normalized: Optional[float]
    stream_starts: int
    requests: int

    @property
    def defined(self) -> bool:
        return self.normalized is not None


@dataclass(frozen=True, order=True)
class MetricId:
    group: str
    command: str
    outcome: Optional[str]

    def __post_init__(self):
        if self.command == "sps" and self.outcome is not None:
            raise ValueError("sps metric carries no outcome dimension")
        if self.command == "requests" and self.outcome not in REQUEST_OUTCOMES:
            raise ValueError(f"requests outcome must be one of {REQUEST_OUTCOMES}")


class TelemetryStore:
    def __init__(self, bucket_ms: float = SIM_BUCKET_MS) -> None:
        if bucket_ms <= 0:
            raise ValueError("bucket width must be > 0")
        self.bucket_ms = float(bucket_ms)
        self._lock = threading.RLock()
        self._counters: dict[MetricId, dict[int, int]] = {}
        # (group, command) -> bucket -> [count, sum, max]
        self._latency: dict[tuple[str, str], dict[int, list[float]]] = {}

    def _bucket(self, at: float) -> int:
        return int(at // self.bucket_ms)

    # -- writes ------------------------------------------------------------

    def increment(self, metric: MetricId, at: float, n: int = 1) -> None:
        b = self._bucket(at)
        with self._lock:
            buckets = self._counters.setdefault(metric, {})
            buckets[b] = buckets.get(b, 0) + n

    def increment_outcome(self, group: str, command: str, outcome: str, at: float) -> None:
        if outcome not in COMMAND_OUTCOMES:
            raise ValueError(f"unknown command outcome {outcome!r}")
        self.increment(MetricId(group, command, outcome), at)

    def record_stream_start(self, group: str, at: float) -> None:
        self.increment(MetricId(group, "sps", None), at)

    def record_request(self, group: str, outcome: str, at: float) -> None:
        self.increment(MetricId(group, "requests", outcome), at)

    def observe_latency(self, group: str, command: str, at: float, value_ms: float) -> None:
        b = self._bucket(at)
        with self._lock:
            buckets = self._latency.setdefault((group, command), {})
            cell = buckets.get(b)
            if cell is None:
                buckets[b] = [1, value_ms, value_ms]
            else:
                cell[0] += 1
                cell[1] += value_ms
                cell[2] = max(cell[2], value_ms)

    # -- reads -------------------------------------------------------------

    def total(self, metric: MetricId, since: Optional[float] = None,
              until: Optional[float] = None) -> int:
        with self._lock:
            buckets = self._counters.get(metric)
            if not buckets:
                return 0
            lo = -float("inf") if since is None else self._bucket(since)
            hi = float("inf") if until is None else self._bucket(until)
            return sum(n for b, n in buckets.items() if lo <= b < hi)

    def series(self, metric: MetricId, since: float, until: float) -> list[tuple[float, int]]:
        """Per-bucket counts over [since, until), empty buckets included."""
        lo, hi = self._bucket(since), self._bucket(until)
        with self._lock:
            buckets = self._counters.get(metric, {})
            return [(b * self.bucket_ms, buckets.get(b, 0)) for b in range(lo, hi)]

    def rate_per_s(self, metric: MetricId, since: float, until: float) -> float:
        span_s = (until - since) / 1000.0
        if span_s <= 0:
            return 0.0
        return self.total(metric, since, until) / span_s

    def latency_stats(self, group: str, command: str, since: Optional[float] = None,
                      until: Optional[float] = None) -> tuple[int, float, float]:
        """(count, mean_ms, max_ms) over the window; (0, 0.0, 0.0) when empty."""
        with self._lock:
            buckets = self._latency.get((group, command))
            if not buckets:
                return (0, 0.0, 0.0)
            lo = -float("inf") if since is None else self._bucket(since)
            hi = float("inf") if until is None else self._bucket(until)
            count, total, peak = 0, 0.0, 0.0
            for b, (n, s, m) in buckets.items():
                if lo <= b < hi:
                    count += int(n)
                    total += s
                    peak = max(peak, m)
            if count == 0:
                return (0, 0.0, 0.0)
            return (count, total / count, peak)

    def query_window(self, metric: MetricId, since: float, until: float) -> WindowResult:
        """Series slice plus total; an unknown metric comes back with
        exists=False so callers can tell 'never seen' from 'seen, all zero'.
        """
        if since > until:
            raise ValueError("window must satisfy since <= until")
        with self._lock:
            exists = metric in self._counters
        points = tuple(self.series(metric, since, until))
        return WindowResult(points, sum(n for _, n in points), exists, self.bucket_ms)

    def compute_sps(self, group: str, since: float, until: float) -> SpsSample:
        if until <= since:
            raise ValueError("window length must be > 0")
        starts = self.total(MetricId(group, "sps", None), since, until)
        requests = sum(
            self.total(MetricId(group, "requests", o), since, until)
            for o in REQUEST_OUTCOMES
        )
        rate = starts / ((until - since) / 1000.0)
        normalized = (starts / requests) if requests > 0 else None
        return SpsSample(rate, normalized, starts, requests)

    def groups(self) -> list[str]:
        with self._lock:
            seen = {m.group for m in self._counters}
            seen.update(g for g, _ in self._latency)
            return sorted(seen)

    def command_totals(self, group: str, since: Optional[float] = None,
                       until: Optional[float] = None) -> dict[str, dict[str, int]]:
        """Per command, outcome -> total over the window (reserved metrics excluded)."""
        out: dict[str, dict[str, int]] = {}
        with self._lock:
            metrics = list(self._counters)
        for m in metrics:
            if m.group != group or m.command in ("sps", "requests"):
                continue
            n = self.total(m, since, until)
            if n:
                out.setdefault(m.command, {})[m.outcome] = n
        return {c: dict(sorted(v.items())) for c, v in sorted(out.items())}

    def snapshot(self) -> dict:
        """Deterministic JSON-able dump of every counter and latency series."""
        with self._lock:
            counters = [
                {
                    "group": m.group,
                    "command": m.command,
                    "outcome": m.outcome,
                    "buckets": {str(b): n for b, n in sorted(buckets.items())},
                }
                for m, buckets in sorted(
                    self._counters.items(),
                    key=lambda kv: (kv[0].group, kv[0].command, kv[0].outcome or ""),
                )
            ]
            latency = [
                {
                    "group": g,
                    "command": c,
                    "buckets": {
                        str(b): {"count": int(n), "sum": s, "max": m}
                        for b, (n, s, m) in sorted(buckets.items())
                    },
                }
                for (g, c), buckets in sorted(self._latency.items())
            ]
        return {"bucket_ms": self.bucket_ms, "counters": counters, "latency": latency}
