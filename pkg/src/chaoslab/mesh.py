"""Simulated microservice mesh: request generation, routing, RPC graph walk.

Each request gets its own RNG stream, `Random(splitmix64(seed ^ request_id))`,
so the random draws of one request never depend on how its events interleave
with other requests'. Arrivals are evenly spaced, t_i = i * 1000/rate ms, so a
plan produces exactly rate*duration requests.

A request is labeled with one server group for its whole life: the group
assigned at the first diverted cluster along the topology order, or the entry
service's own name when nothing is diverted. All telemetry for the request
(command outcomes, request outcome, stream start) lands under that label.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field
from typing import Optional

from .command import BreakerRegistry, CallResult, execute_command
from .engine import Engine
from .hashing import splitmix64
from .injector import FaultInjector, InjectionPoint
from .router import Router
from .telemetry import TelemetryStore
from .topology import ServiceSpec, Topology, TrafficPlan


@dataclass
class RequestContext:
    request_id: int
    user_id: int
    rng: random.Random
    start_time: float
    server_group: str
    group_kind: str
    diverted_cluster: str
    experiment_tag: Optional[str] = None
    injected_treatments: list[str] = field(default_factory=list)
    fallbacks_served: int = 0
    hops: list[tuple[str, str, str, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.experiment_tag is not None and self.group_kind != "experiment":
            raise ValueError("experiment_tag is only set for experiment groups")


@dataclass(frozen=True)
class RequestOutcome:
    request_id: int
    user_id: int
    server_group: str
    group_kind: str
    experiment_tag: Optional[str]
    outcome: str  # success | degraded | failure
    latency_ms: float
    hops: tuple[tuple[str, str, str, float], ...]  # (caller, command, kind, latency)


@dataclass
class RunSummary:
    """Aggregated from returned RequestOutcome values on the way out of the
    engine, deliberately not from telemetry, so tests can hold the two
    accounting routes against each other.
    """

    requests_total: int = 0
    request_counts: dict = field(default_factory=dict)  # (group, outcome) -> n
    hop_counts: dict = field(default_factory=dict)  # (group, command, kind) -> n
    stream_starts: dict = field(default_factory=dict)  # group -> n
    outcomes: Optional[list] = None

    def add(self, out: RequestOutcome) -> None:
        self.requests_total += 1
        key = (out.server_group, out.outcome)
        self.request_counts[key] = self.request_counts.get(key, 0) + 1
        if out.outcome in ("success", "degraded"):
            g = out.server_group
            self.stream_starts[g] = self.stream_starts.get(g, 0) + 1
        for _, command, kind, _ in out.hops:
            hkey = (out.server_group, command, kind)
            self.hop_counts[hkey] = self.hop_counts.get(hkey, 0) + 1
        if self.outcomes is not None:
            self.outcomes.append(out)

    def group_requests(self, group: str) -> int:
        return sum(n for (g, _), n in self.request_counts.items() if g == group)

    def groups(self) -> list[str]:
        return sorted({g for g, _ in self.request_counts})


class _Deployment:
    """One running group of a service: a capacity pool plus traffic counters."""

    __slots__ = ("name", "service", "in_flight", "peak_in_flight", "arrivals", "overloads")

    def __init__(self, name: str, service: ServiceSpec):
        self.name = name
        self.service = service
        self.in_flight = 0
        self.peak_in_flight = 0
        self.arrivals = 0
        self.overloads = 0


class Mesh:
    def __init__(
        self,
        topology: Topology,
        engine: Engine,
        router: Router,
        injector: FaultInjector,
        telemetry: TelemetryStore,
        breakers: BreakerRegistry,
    ):
        self.topology = topology
        self.engine = engine
        self.router = router
        self.injector = injector
        self.telemetry = telemetry
        self.breakers = breakers
        self._lock = threading.RLock()
        self._deployments: dict[str, _Deployment] = {
            name: _Deployment(name, svc) for name, svc in topology.services.items()
        }
        self.clone_groups: dict[str, dict[str, str]] = {}  # cluster -> {group: kind}
        # command executions started, counted outside the command wrapper so
        # conservation checks have a second, independent accounting route
        self.command_starts: dict[tuple[str, str], int] = {}

    # -- deployments ---------------------------------------------------------

    def provision_clone(self, cluster: str, group: str, kind: str) -> None:
        """Stand up a clone group running the same software and sizing as the
        cluster it is cloned from.
        """
        svc = self.topology.service(cluster)
        with self._lock:
            if group in self._deployments:
                raise ValueError(f"group {group!r} already provisioned")
            self._deployments[group] = _Deployment(group, svc)
            self.clone_groups.setdefault(cluster, {})[group] = kind

    def decommission_clone(self, cluster: str, group: str) -> None:
        with self._lock:
            self._deployments.pop(group, None)
            groups = self.clone_groups.get(cluster)
            if groups:
                groups.pop(group, None)
                if not groups:
                    del self.clone_groups[cluster]

    def deployment(self, name: str) -> _Deployment:
        with self._lock:
            return self._deployments[name]

    def deployment_names(self) -> list[str]:
        with self._lock:
            return sorted(self._deployments)

    def _deployment_for(self, service_name: str, ctx: RequestContext) -> _Deployment:
        name = ctx.server_group if service_name == ctx.diverted_cluster else service_name
        with self._lock:
            dep = self._deployments.get(name)
            if dep is None:  # group torn down mid-flight: fall back to the baseline
                dep = self._deployments[service_name]
            return dep

    def _try_acquire(self, dep: _Deployment) -> bool:
        cap = dep.service.capacity
        with self._lock:
            dep.arrivals += 1
            if cap is not None and dep.in_flight >= cap:
                dep.overloads += 1
                return False
            dep.in_flight += 1
            dep.peak_in_flight = max(dep.peak_in_flight, dep.in_flight)
            return True

    def _release(self, dep: _Deployment) -> None:
        with self._lock:
            dep.in_flight -= 1

    # -- request construction --------------------------------------------------

    def make_context(self, request_id: int, at: float, plan: TrafficPlan) -> RequestContext:
        rng = random.Random(splitmix64(plan.seed ^ request_id))
        user_id = rng.randrange(plan.user_population)
        cluster = self.topology.entry
        for name in self.topology.cluster_order():
            if self.router.table_for(name) is not None:
                cluster = name
                break
        entry = self.router.assign(cluster, user_id)
        return RequestContext(
            request_id=request_id,
            user_id=user_id,
            rng=rng,
            start_time=at,
            server_group=entry.group,
            group_kind=entry.kind,
            diverted_cluster=cluster,
            experiment_tag=self.router.experiment_tag_for(cluster, entry),
        )

    # -- execution -------------------------------------------------------------

    def execute_request(self, ctx: RequestContext):
        """Engine task for one end-user request; returns a RequestOutcome."""
        _, result = yield ("call", self._service_task(self.topology.entry, ctx), None)
        now = self.engine.now_ms
        if result.ok:
            outcome = "degraded" if ctx.fallbacks_served else "success"
        else:
            outcome = "failure"
        self.telemetry.record_request(ctx.server_group, outcome, now)
        if outcome != "failure":
            self.telemetry.record_stream_start(ctx.server_group, now)
        return RequestOutcome(
            request_id=ctx.request_id,
            user_id=ctx.user_id,
            server_group=ctx.server_group,
            group_kind=ctx.group_kind,
            experiment_tag=ctx.experiment_tag,
            outcome=outcome,
            latency_ms=now - ctx.start_time,
            hops=tuple(ctx.hops),
        )

    def _service_task(self, service_name: str, ctx: RequestContext):
        """One hop: capacity, base latency, intrinsic errors, then each
        dependency edge through the command wrapper, in declared order.
        """
        svc = self.topology.service(service_name)
        dep = self._deployment_for(service_name, ctx)
        if not self._try_acquire(dep):
            return CallResult(False, "overload")
        try:
            lo, hi = svc.base_latency_ms
            delay = lo if lo == hi else ctx.rng.uniform(lo, hi)
            if delay > 0:
                yield ("wait", delay)
            if svc.intrinsic_error_rate > 0 and ctx.rng.random() < svc.intrinsic_error_rate:
                return CallResult(False, "intrinsic_error")
            for edge in svc.dependencies:
                point = InjectionPoint(service_name, edge.command_name, edge.target)
                treatment = self.injector.consult(ctx, point)
                with self._lock:
                    skey = (ctx.server_group, edge.command_name)
                    self.command_starts[skey] = self.command_starts.get(skey, 0) + 1
                outcome = yield from execute_command(
                    edge.config,
                    ctx,
                    primary=lambda e=edge: self._service_task(e.target, ctx),
                    fallback=edge.fallback,
                    group=ctx.server_group,
                    telemetry=self.telemetry,
                    breakers=self.breakers,
                    now_fn=lambda: self.engine.now_ms,
                    alternate_call=lambda target: self._service_task(target, ctx),
                    treatment=treatment,
                )
                ctx.hops.append((service_name, edge.command_name, outcome.kind, outcome.latency_ms))
                if outcome.kind == "fallback_success":
                    ctx.fallbacks_served += 1
                elif outcome.kind == "fallback_failure":
                    # a failed fallback errors this hop; the caller sees a
                    # plain service error
                    return CallResult(False, "intrinsic_error")
            return CallResult(True)
        finally:
            self._release(dep)

    # -- traffic -----------------------------------------------------------------

    def schedule_traffic(self, plan: TrafficPlan, summary: RunSummary) -> None:
        """Queue every arrival of the plan onto the engine; results stream
        into `summary` as requests finish.
        """
        n = int(round(plan.rate_per_s * plan.duration_s))
        spacing = 1000.0 / plan.rate_per_s

        def arrival(i: int, at: float) -> None:
            ctx = self.make_context(i, at, plan)
            self.engine.spawn_immediate(self._collect(ctx, summary))

        for i in range(n):
            at = i * spacing
            self.engine.call_at(at, lambda i=i, at=at: arrival(i, at))

    def _collect(self, ctx: RequestContext, summary: RunSummary):
        result = yield from self.execute_request(ctx)
        summary.add(result)
        return result

    def run_traffic(self, plan: TrafficPlan, keep_outcomes: bool = False) -> RunSummary:
        """Run a whole plan to completion on the simulated clock."""
        summary = RunSummary(outcomes=[] if keep_outcomes else None)
        self.schedule_traffic(plan, summary)
        self.engine.run()
        return summary
