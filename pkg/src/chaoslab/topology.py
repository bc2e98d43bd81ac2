"""Topology documents: the declarative description of the simulated mesh.

A topology document is human-editable YAML with ``schema_version: 1``. It
mirrors ServiceSpec/CallEdge/FallbackSpec exactly and embeds each edge's
command config plus the scenario's traffic plan. Canned scenarios ship in
``chaoslab/scenarios/`` and are resolvable by bare name.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import yaml

from .command import CommandConfig
from .hashing import ROUTING_HASH_NAME

SCHEMA_VERSION = 1

FALLBACK_KINDS = ("static-value", "alternate-service-call", "broken")
CRITICALITY = ("critical", "non-critical")


class TopologyError(ValueError):
    """Raised for unparseable or invalid topology documents."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class FallbackSpec:
    kind: str
    alternate_target: Optional[str] = None

    def __post_init__(self):
        if self.kind not in FALLBACK_KINDS:
            raise TopologyError("bad_fallback_kind", f"unknown fallback kind {self.kind!r}")
        if self.kind == "alternate-service-call" and not self.alternate_target:
            raise TopologyError(
                "missing_alternate_target",
                "alternate-service-call fallback requires alternate_target",
            )
        if self.kind != "alternate-service-call" and self.alternate_target:
            raise TopologyError(
                "unexpected_alternate_target",
                f"{self.kind} fallback must not name an alternate_target",
            )


@dataclass(frozen=True)
class CallEdge:
    command_name: str
    target: str
    criticality: str
    fallback: Optional[FallbackSpec]  # None: a primary failure has no net
    config: CommandConfig

    def __post_init__(self):
        if self.criticality not in CRITICALITY:
            raise TopologyError("bad_criticality", f"criticality {self.criticality!r} invalid")


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    base_latency_ms: tuple[float, float]  # (lo, hi); fixed latency has lo == hi
    intrinsic_error_rate: float = 0.0
    capacity: Optional[int] = None  # None = unbounded
    dependencies: tuple[CallEdge, ...] = ()

    def __post_init__(self):
        lo, hi = self.base_latency_ms
        if lo < 0 or hi < lo:
            raise TopologyError(
                "bad_latency", f"{self.name}: latency bounds must satisfy 0 <= lo <= hi"
            )
        if not 0.0 <= self.intrinsic_error_rate <= 1.0:
            raise TopologyError(
                "bad_error_rate", f"{self.name}: intrinsic_error_rate must be in [0,1]"
            )
        if self.capacity is not None and self.capacity < 1:
            raise TopologyError("bad_capacity", f"{self.name}: capacity must be >= 1 when bounded")


@dataclass(frozen=True)
class TrafficPlan:
    rate_per_s: float
    duration_s: float
    user_population: int
    seed: int = 0

    def __post_init__(self):
        if self.rate_per_s <= 0:
            raise TopologyError("bad_rate", "traffic rate must be > 0")
        if self.duration_s <= 0:
            raise TopologyError("bad_duration", "traffic duration must be > 0")
        if self.user_population < 1:
            raise TopologyError("bad_population", "user population must be >= 1")


@dataclass(frozen=True)
class Topology:
    name: str
    entry: str
    services: dict[str, ServiceSpec]
    traffic: TrafficPlan
    software_version: str = "1.0"
    routing_hash: str = ROUTING_HASH_NAME

    def service(self, name: str) -> ServiceSpec:
        return self.services[name]

    def with_seed(self, seed: int) -> "Topology":
        return replace(self, traffic=replace(self.traffic, seed=seed))

    def find_edge(self, caller: str, command_name: str) -> Optional[CallEdge]:
        svc = self.services.get(caller)
        if svc is None:
            return None
        for edge in svc.dependencies:
            if edge.command_name == command_name:
                return edge
        return None

    def cluster_order(self) -> list[str]:
        """Service names in request-path order from the entry (depth-first)."""
        order: list[str] = []
        seen: set[str] = set()

        def walk(name: str) -> None:
            if name in seen:
                return
            seen.add(name)
            order.append(name)
            for edge in self.services[name].dependencies:
                walk(edge.target)

        walk(self.entry)
        # services unreachable from the entry still exist (e.g. fallback-only targets)
        for name in self.services:
            if name not in seen:
                order.append(name)
        return order


def _latency_bounds(raw, where: str) -> tuple[float, float]:
    if isinstance(raw, (int, float)):
        return (float(raw), float(raw))
    if isinstance(raw, (list, tuple)) and len(raw) == 2:
        return (float(raw[0]), float(raw[1]))
    raise TopologyError("bad_latency", f"{where}: base_latency_ms must be a number or [lo, hi]")


def _parse_command_config(name: str, raw: dict) -> CommandConfig:
    return CommandConfig(
        command_name=name,
        timeout_ms=float(raw.get("timeout_ms", 1000.0)),
        breaker_error_threshold=float(raw.get("breaker_error_threshold", 0.5)),
        breaker_window_ms=float(raw.get("breaker_window_ms", 10_000.0)),
        breaker_min_volume=int(raw.get("breaker_min_volume", 20)),
        breaker_cooldown_ms=float(raw.get("breaker_cooldown_ms", 5_000.0)),
    )


def _parse_edge(caller: str, raw: dict) -> CallEdge:
    if "command" not in raw or "target" not in raw:
        raise TopologyError("bad_edge", f"{caller}: edge needs 'command' and 'target'")
    fb_raw = raw.get("fallback")
    if fb_raw is None:
        fallback = None
    elif isinstance(fb_raw, dict) and "kind" in fb_raw:
        fallback = FallbackSpec(
            kind=fb_raw["kind"], alternate_target=fb_raw.get("alternate_target")
        )
    else:
        raise TopologyError("bad_fallback", f"{caller}: edge fallback needs a 'kind'")
    return CallEdge(
        command_name=str(raw["command"]),
        target=str(raw["target"]),
        criticality=raw.get("criticality", "non-critical"),
        fallback=fallback,
        config=_parse_command_config(str(raw["command"]), raw.get("command_config", {})),
    )


def _check_acyclic(services: dict[str, ServiceSpec]) -> None:
    WHITE, GREY, BLACK = 0, 1, 2
    color = {name: WHITE for name in services}

    def visit(name: str, trail: list[str]) -> None:
        color[name] = GREY
        trail.append(name)
        for edge in services[name].dependencies:
            if color[edge.target] == GREY:
                cycle = " -> ".join(trail + [edge.target])
                raise TopologyError("cyclic_dependency", f"dependency cycle: {cycle}")
            if color[edge.target] == WHITE:
                visit(edge.target, trail)
        trail.pop()
        color[name] = BLACK

    for name in services:
        if color[name] == WHITE:
            visit(name, [])


def parse_topology(doc: dict) -> Topology:
    if not isinstance(doc, dict):
        raise TopologyError("parse_error", "topology document must be a mapping")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise TopologyError(
            "bad_schema_version",
            f"expected schema_version {SCHEMA_VERSION}, got {doc.get('schema_version')!r}",
        )
    declared_hash = doc.get("routing_hash", ROUTING_HASH_NAME)
    if declared_hash != ROUTING_HASH_NAME:
        raise TopologyError("bad_routing_hash", f"unsupported routing_hash {declared_hash!r}")

    raw_services = doc.get("services")
    if not raw_services:
        raise TopologyError("no_services", "topology declares no services")

    services: dict[str, ServiceSpec] = {}
    for raw in raw_services:
        name = raw.get("name")
        if not name:
            raise TopologyError("bad_service", "service without a name")
        if name in services:
            raise TopologyError("duplicate_service", f"service {name!r} declared twice")
        edges = tuple(_parse_edge(name, e) for e in raw.get("dependencies", []) or [])
        commands = [e.command_name for e in edges]
        if len(set(commands)) != len(commands):
            raise TopologyError(
                "duplicate_command", f"{name}: command names must be unique per service"
            )
        capacity = raw.get("capacity")
        services[name] = ServiceSpec(
            name=name,
            base_latency_ms=_latency_bounds(raw.get("base_latency_ms", 0), name),
            intrinsic_error_rate=float(raw.get("intrinsic_error_rate", 0.0)),
            capacity=int(capacity) if capacity is not None else None,
            dependencies=edges,
        )

    for svc in services.values():
        for edge in svc.dependencies:
            if edge.target not in services:
                raise TopologyError(
                    "dangling_target", f"{svc.name}: edge {edge.command_name} targets unknown service {edge.target!r}"
                )
            fb = edge.fallback
            if fb is None:
                continue
            if fb.alternate_target is not None and fb.alternate_target not in services:
                raise TopologyError(
                    "dangling_target",
                    f"{svc.name}: fallback of {edge.command_name} targets unknown service {fb.alternate_target!r}",
                )
    _check_acyclic(services)

    entry = doc.get("entry")
    if entry not in services:
        raise TopologyError("bad_entry", f"entry service {entry!r} not declared")

    traffic_raw = doc.get("traffic") or {}
    traffic = TrafficPlan(
        rate_per_s=float(traffic_raw.get("rate_per_s", 100.0)),
        duration_s=float(traffic_raw.get("duration_s", 10.0)),
        user_population=int(traffic_raw.get("user_population", 10_000)),
        seed=int(traffic_raw.get("seed", 0)),
    )

    return Topology(
        name=str(doc.get("name", "unnamed")),
        entry=str(entry),
        services=services,
        traffic=traffic,
        software_version=str(doc.get("software_version", "1.0")),
    )


def load_topology(source: Union[str, Path, dict]) -> Topology:
    """Parse and validate a topology from a dict, YAML text, or file path."""
    if isinstance(source, dict):
        return parse_topology(source)
    if isinstance(source, Path):
        text = source.read_text()
    elif "\n" not in source and Path(source).exists():
        text = Path(source).read_text()
    else:
        text = str(source)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise TopologyError("parse_error", f"invalid YAML: {exc}") from exc
    return parse_topology(doc)


def scenario_path(name: str) -> Path:
    """Resolve a bundled scenario by bare name (e.g. 'gallery')."""
    resource = importlib.resources.files("chaoslab") / "scenarios" / f"{name}.yaml"
    return Path(str(resource))


def load_scenario(name_or_path: Union[str, Path]) -> Topology:
    """Load a scenario by bundled name or explicit file path."""
    p = Path(name_or_path)
    if p.exists():
        return load_topology(p)
    bundled = scenario_path(str(name_or_path))
    if bundled.exists():
        return load_topology(bundled)
    raise TopologyError("unknown_scenario", f"no scenario named or at {name_or_path!r}")
