"""Experiment lifecycle: validate, provision clones, divert, inject, guard,
tear down, report.

Teardown order is a hard rule: disarm injection, then restore routing, then
decommission the clone groups. Injected failures must never reach traffic
after the routing table is back to baseline-only.
"""

from __future__ import annotations

import importlib.resources
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import yaml

from . import analysis
from .command import BreakerRegistry
from .engine import Engine
from .injector import FaultInjector, InjectionPoint, InjectionRule, Treatment
from .mesh import Mesh
from .router import Router, diversion_table
from .telemetry import MetricId, TelemetryStore
from .topology import Topology

DEFAULT_MAX_DIVERT = 0.05

DRAFT = "Draft"
VALIDATED = "Validated"
PROVISIONING = "Provisioning"
RUNNING = "Running"
CONCLUDING = "Concluding"
COMPLETED = "Completed"
ABORTED = "Aborted"

PHASES = (DRAFT, VALIDATED, PROVISIONING, RUNNING, CONCLUDING, COMPLETED, ABORTED)

_ALLOWED = {
    (DRAFT, VALIDATED),
    (VALIDATED, PROVISIONING),
    (PROVISIONING, RUNNING),
    (PROVISIONING, ABORTED),
    (RUNNING, CONCLUDING),
    (RUNNING, ABORTED),
    (CONCLUDING, COMPLETED),
    (CONCLUDING, ABORTED),
}


@dataclass(frozen=True)
class SafetyPolicy:
    sps_drop_threshold: float = 0.05
    fallback_failure_threshold: float = 0.02
    evaluation_interval_s: float = 5.0
    min_samples: int = 500

    def __post_init__(self):
        if not 0.0 < self.sps_drop_threshold < 1.0:
            raise ValueError("sps_drop_threshold must be in (0,1)")
        if not 0.0 < self.fallback_failure_threshold < 1.0:
            raise ValueError("fallback_failure_threshold must be in (0,1)")
        if self.evaluation_interval_s <= 0:
            raise ValueError("evaluation_interval_s must be > 0")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")

    def to_doc(self) -> dict:
        return {
            "sps_drop_threshold": self.sps_drop_threshold,
            "fallback_failure_threshold": self.fallback_failure_threshold,
            "evaluation_interval_s": self.evaluation_interval_s,
            "min_samples": self.min_samples,
        }


@dataclass(frozen=True)
class ExperimentSpec:
    id: str
    target_cluster: str
    injection_points: tuple[InjectionPoint, ...]
    treatment: Treatment
    diverted_fraction: float
    duration_minutes: float
    tracked_commands: tuple[str, ...]
    safety: SafetyPolicy = SafetyPolicy()

    def __post_init__(self):
        if not self.id:
            raise ValueError("experiment id must be non-empty")
        if not self.injection_points:
            raise ValueError("injection_points must be non-empty")
        if not 0.0 < self.diverted_fraction < 1.0:
            raise ValueError("diverted_fraction must be in (0,1)")
        if self.duration_minutes <= 0:
            raise ValueError("duration must be > 0")
        if not self.tracked_commands:
            raise ValueError("tracked_commands must be non-empty")

    @property
    def control_group(self) -> str:
        return f"{self.target_cluster}-chap-control"

    @property
    def experiment_group(self) -> str:
        return f"{self.target_cluster}-chap-experiment"

    def to_doc(self) -> dict:
        doc = {
            "schema_version": 1,
            "id": self.id,
            "target_cluster": self.target_cluster,
            "injection_points": [
                {"caller": p.caller, "command": p.command, "target": p.target}
                for p in self.injection_points
            ],
            "treatment": {"kind": self.treatment.kind},
            "diverted_fraction": self.diverted_fraction,
            "duration_minutes": self.duration_minutes,
            "tracked_commands": list(self.tracked_commands),
            "safety": self.safety.to_doc(),
        }
        if self.treatment.involves_latency():
            doc["treatment"]["added_latency_ms"] = self.treatment.added_latency_ms
        return doc


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str

    def to_doc(self) -> dict:
        return {"code": self.code, "message": self.message}


class SpecParseError(ValueError):
    def __init__(self, issues: list[ValidationIssue]):
        self.issues = issues
        super().__init__("; ".join(f"{i.code}: {i.message}" for i in issues))


def parse_experiment_spec(doc: dict) -> ExperimentSpec:
    """Build an ExperimentSpec from a plain document, collecting every schema
    problem into one SpecParseError instead of stopping at the first.
    """
    issues: list[ValidationIssue] = []

    def bad(code: str, message: str) -> None:
        issues.append(ValidationIssue(code, message))

    if not isinstance(doc, dict):
        raise SpecParseError([ValidationIssue("bad_schema", "experiment spec must be a mapping")])
    if doc.get("schema_version") != 1:
        bad("bad_schema", f"unsupported schema_version {doc.get('schema_version')!r}")

    exp_id = doc.get("id")
    if not isinstance(exp_id, str) or not exp_id:
        bad("bad_id", "id must be a non-empty string")
    cluster = doc.get("target_cluster")
    if not isinstance(cluster, str) or not cluster:
        bad("bad_target_cluster", "target_cluster must be a non-empty string")

    points: list[InjectionPoint] = []
    raw_points = doc.get("injection_points")
    if not isinstance(raw_points, list) or not raw_points:
        bad("bad_injection_points", "injection_points must be a non-empty list")
    else:
        for i, p in enumerate(raw_points):
            if not isinstance(p, dict) or not all(
                isinstance(p.get(k), str) and p.get(k) for k in ("caller", "command", "target")
            ):
                bad("bad_injection_points",
                    f"injection_points[{i}] needs caller, command, target strings")
            else:
                points.append(InjectionPoint(p["caller"], p["command"], p["target"]))

    treatment = None
    raw_treatment = doc.get("treatment")
    if not isinstance(raw_treatment, dict):
        bad("bad_treatment", "treatment must be a mapping with a kind")
    else:
        try:
            treatment = Treatment(
                kind=raw_treatment.get("kind", ""),
                added_latency_ms=float(raw_treatment.get("added_latency_ms", 0.0)),
            )
        except (TypeError, ValueError) as exc:
            bad("bad_treatment", str(exc))

    fraction = doc.get("diverted_fraction")
    if not isinstance(fraction, (int, float)) or not 0.0 < float(fraction) < 1.0:
        bad("bad_fraction", "diverted_fraction must be a number in (0,1)")

    duration = doc.get("duration_minutes")
    if not isinstance(duration, (int, float)) or float(duration) <= 0:
        bad("bad_duration", "duration_minutes must be a number > 0")

    tracked = doc.get("tracked_commands")
    if not isinstance(tracked, list) or not tracked or not all(
        isinstance(c, str) and c for c in tracked
    ):
        bad("bad_tracked_commands", "tracked_commands must be a non-empty list of names")

    safety = SafetyPolicy()
    raw_safety = doc.get("safety", {})
    if raw_safety is None:
        raw_safety = {}
    if not isinstance(raw_safety, dict):
        bad("bad_safety", "safety must be a mapping")
    else:
        known = {
            "sps_drop_threshold", "fallback_failure_threshold",
            "evaluation_interval_s", "min_samples",
        }
        unknown = set(raw_safety) - known
        if unknown:
            bad("bad_safety", f"unknown safety fields: {sorted(unknown)}")
        else:
            try:
                safety = SafetyPolicy(**raw_safety)
            except (TypeError, ValueError) as exc:
                bad("bad_safety", str(exc))

    if issues:
        raise SpecParseError(issues)
    return ExperimentSpec(
        id=exp_id,
        target_cluster=cluster,
        injection_points=tuple(points),
        treatment=treatment,
        diverted_fraction=float(fraction),
        duration_minutes=float(duration),
        tracked_commands=tuple(tracked),
        safety=safety,
    )


def experiment_spec_path(name: str) -> Path:
    """Resolve a bundled experiment spec by bare name (e.g. 'alice')."""
    resource = importlib.resources.files("chaoslab") / "experiments" / f"{name}.yaml"
    return Path(str(resource))


def load_experiment_spec(name_or_path: Union[str, Path]) -> ExperimentSpec:
    """Load an experiment spec document by bundled name or explicit path."""
    p = Path(name_or_path)
    if p.exists():
        text = p.read_text()
    else:
        bundled = experiment_spec_path(str(name_or_path))
        if not bundled.exists():
            raise SpecParseError([ValidationIssue(
                "unknown_spec", f"no experiment spec named or at {name_or_path!r}")])
        text = bundled.read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecParseError([ValidationIssue("bad_schema", f"invalid YAML: {exc}")]) from exc
    return parse_experiment_spec(doc)


class Experiment:
    """One experiment's spec plus its lifecycle state and transition log."""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.phase = DRAFT
        self.started_at: Optional[float] = None
        self.ends_at: Optional[float] = None
        self.ended_at: Optional[float] = None
        self.abort_reason: Optional[str] = None
        self.transitions: list[tuple[str, str, float]] = []
        self.report: Optional[dict] = None
        self.teardown_issues: list[str] = []

    def transition(self, to: str, at: float) -> None:
        if (self.phase, to) not in _ALLOWED:
            raise ValueError(f"illegal transition {self.phase} -> {to}")
        self.transitions.append((self.phase, to, at))
        self.phase = to

    def is_terminal(self) -> bool:
        return self.phase in (COMPLETED, ABORTED)

    def state_doc(self) -> dict:
        # wire format carries integer milliseconds
        def ms(x: Optional[float]) -> Optional[int]:
            return None if x is None else int(round(x))

        return {
            "phase": self.phase,
            "started_at_ms": ms(self.started_at),
            "ends_at_ms": ms(self.ends_at),
            "ended_at_ms": ms(self.ended_at),
            "abort_reason": self.abort_reason,
        }


class Orchestrator:
    def __init__(
        self,
        topology: Topology,
        engine: Engine,
        mesh: Mesh,
        router: Router,
        injector: FaultInjector,
        telemetry: TelemetryStore,
        breakers: BreakerRegistry,
        max_divert: float = DEFAULT_MAX_DIVERT,
    ):
        self.topology = topology
        self.engine = engine
        self.mesh = mesh
        self.router = router
        self.injector = injector
        self.telemetry = telemetry
        self.breakers = breakers
        self.max_divert = max_divert
        self._lock = threading.RLock()
        self.experiments: dict[str, Experiment] = {}

    # -- registration and validation ----------------------------------------

    def create(self, spec: ExperimentSpec) -> Experiment:
        with self._lock:
            if spec.id in self.experiments:
                raise ValueError(f"experiment {spec.id!r} already exists")
            exp = Experiment(spec)
            self.experiments[spec.id] = exp
            return exp

    def get(self, exp_id: str) -> Experiment:
        with self._lock:
            return self.experiments[exp_id]

    def validate(self, exp_id: str) -> list[ValidationIssue]:
        """Semantic checks against the live topology and registry; an empty
        result moves the experiment to Validated.
        """
        exp = self.get(exp_id)
        spec = exp.spec
        issues: list[ValidationIssue] = []

        if spec.target_cluster not in self.topology.services:
            issues.append(ValidationIssue(
                "unknown_cluster", f"target_cluster {spec.target_cluster!r} not in topology"))
        for p in spec.injection_points:
            edge = self.topology.find_edge(p.caller, p.command)
            if edge is None or edge.target != p.target:
                issues.append(ValidationIssue(
                    "point_unresolved",
                    f"no edge {p.caller} --{p.command}--> {p.target} in topology"))
        known_commands = {
            e.command_name for svc in self.topology.services.values() for e in svc.dependencies
        }
        for c in spec.tracked_commands:
            if c not in known_commands:
                issues.append(ValidationIssue(
                    "tracked_command_unknown", f"tracked command {c!r} not in topology"))
        if spec.diverted_fraction > self.max_divert:
            issues.append(ValidationIssue(
                "fraction_over_cap",
                f"diverted_fraction {spec.diverted_fraction} exceeds cap {self.max_divert}"))
        with self._lock:
            for other in self.experiments.values():
                if (other.spec.id != spec.id
                        and other.spec.target_cluster == spec.target_cluster
                        and other.phase in (PROVISIONING, RUNNING, CONCLUDING)):
                    issues.append(ValidationIssue(
                        "cluster_busy",
                        f"experiment {other.spec.id!r} is active on "
                        f"{spec.target_cluster!r}"))
                    break

        if not issues and exp.phase == DRAFT:
            exp.transition(VALIDATED, self.engine.now_ms)
        return issues

    # -- lifecycle ------------------------------------------------------------

    def start(self, exp_id: str) -> Experiment:
        """Provision clones, divert traffic, arm injection, start the safety
        monitor. A provisioning failure rolls everything back and aborts.
        """
        with self._lock:
            exp = self.get(exp_id)
            if exp.phase != VALIDATED:
                raise ValueError(f"experiment {exp_id!r} is {exp.phase}, expected {VALIDATED}")
            spec = exp.spec
            now = self.engine.now_ms
            exp.transition(PROVISIONING, now)

            provisioned: list[str] = []
            try:
                self.mesh.provision_clone(spec.target_cluster, spec.control_group, "control")
                provisioned.append(spec.control_group)
                self.mesh.provision_clone(spec.target_cluster, spec.experiment_group, "experiment")
                provisioned.append(spec.experiment_group)
                self.router.install(diversion_table(
                    spec.target_cluster, spec.id, spec.diverted_fraction))
            except Exception as exc:
                self.router.uninstall(spec.target_cluster)
                for group in provisioned:
                    self.mesh.decommission_clone(spec.target_cluster, group)
                exp.abort_reason = f"provisioning_failure: {exc}"
                exp.ended_at = now
                exp.transition(ABORTED, now)
                return exp

            exp.transition(RUNNING, now)
            exp.started_at = now
            exp.ends_at = now + spec.duration_minutes * 60_000.0
            self.injector.arm(InjectionRule(
                experiment_id=spec.id,
                scope_group=spec.experiment_group,
                points=spec.injection_points,
                treatment=spec.treatment,
            ))
        self._schedule_monitor(exp)
        return exp

    def _schedule_monitor(self, exp: Experiment) -> None:
        interval = exp.spec.safety.evaluation_interval_s * 1000.0

        def tick() -> None:
            if exp.phase != RUNNING:
                return
            decision, reason = self.monitor_tick(exp.spec.id, self.engine.now_ms)
            if decision == "continue":
                self.engine.call_at(self.engine.now_ms + interval, tick)
            elif decision == "conclude":
                self.conclude_or_abort(exp.spec.id)
            else:
                self.conclude_or_abort(exp.spec.id, abort_reason=reason)

        self.engine.call_at((exp.started_at or self.engine.now_ms) + interval, tick)

    def _telemetry_available(self) -> bool:
        return self.telemetry is not None

    def monitor_tick(self, exp_id: str, now: float) -> tuple[str, Optional[str]]:
        """Guardrail evaluation: ('continue' | 'conclude' | 'abort', reason).

        Guardrails only engage once both groups reach min_samples. A telemetry
        outage is never ridden out: it aborts.
        """
        exp = self.get(exp_id)
        if exp.phase != RUNNING:
            raise ValueError(f"monitor_tick on {exp.phase} experiment")
        spec = exp.spec
        if now >= (exp.ends_at or now):
            return ("conclude", None)
        if not self._telemetry_available():
            return ("abort", "telemetry_unavailable: failing safe")
        try:
            since = exp.started_at or 0.0
            ctrl = self.telemetry.compute_sps(spec.control_group, since, now)
            expm = self.telemetry.compute_sps(spec.experiment_group, since, now)
            policy = spec.safety
            if min(ctrl.requests, expm.requests) < policy.min_samples:
                return ("continue", None)
            floor = (1.0 - policy.sps_drop_threshold) * (ctrl.normalized or 0.0)
            if (expm.normalized or 0.0) < floor:
                return ("abort",
                        f"sps_drop: experiment normalized SPS {expm.normalized:.4f} "
                        f"below {floor:.4f} (control {ctrl.normalized:.4f})")
            for command in spec.tracked_commands:
                failed = self.telemetry.total(
                    MetricId(spec.experiment_group, command, "fallback_failure"), since, now)
                fraction = failed / expm.requests if expm.requests else 0.0
                if fraction > policy.fallback_failure_threshold:
                    return ("abort",
                            f"fallback_failure: {command} failed-fallback fraction "
                            f"{fraction:.4f} above {policy.fallback_failure_threshold:.4f}")
            return ("continue", None)
        except Exception as exc:
            return ("abort", f"telemetry_unavailable: {exc}")

    def abort(self, exp_id: str, reason: str) -> Experiment:
        """External abort (operator or API). Idempotent on terminal states."""
        exp = self.get(exp_id)
        if exp.is_terminal():
            return exp
        if exp.phase not in (RUNNING, CONCLUDING):
            raise ValueError(f"cannot abort from {exp.phase}")
        self.conclude_or_abort(exp_id, abort_reason=reason)
        return exp

    def conclude_or_abort(self, exp_id: str, abort_reason: Optional[str] = None) -> dict:
        """Tear down (disarm, reroute, decommission — in that order), freeze
        telemetry, analyze, and emit the final report. Idempotent: a second
        call returns the same report.
        """
        with self._lock:
            exp = self.get(exp_id)
            if exp.is_terminal():
                return exp.report or {}
            if exp.phase not in (RUNNING, CONCLUDING):
                raise ValueError(f"cannot conclude from {exp.phase}")
            now = self.engine.now_ms
            spec = exp.spec
            if exp.phase == RUNNING:
                exp.transition(CONCLUDING, now)

            issues: list[str] = []
            try:
                self.injector.disarm(spec.id)
            except Exception as exc:
                issues.append(f"disarm: {exc}")
            try:
                self.router.uninstall(spec.target_cluster)
            except Exception as exc:
                issues.append(f"reroute: {exc}")
            for group in (spec.control_group, spec.experiment_group):
                try:
                    self.mesh.decommission_clone(spec.target_cluster, group)
                except Exception as exc:
                    issues.append(f"decommission {group}: {exc}")
            exp.teardown_issues = issues

            exp.ended_at = now
            exp.abort_reason = abort_reason
            exp.transition(ABORTED if abort_reason else COMPLETED, now)
            exp.report = self._build_report(exp)
            return exp.report

    # -- reporting --------------------------------------------------------------

    def _build_report(self, exp: Experiment) -> dict:
        spec = exp.spec
        since = exp.started_at if exp.started_at is not None else 0.0
        until = exp.ended_at if exp.ended_at is not None else self.engine.now_ms
        snapshot = self.telemetry.snapshot() if self.telemetry is not None else {
            "bucket_ms": 0, "counters": [], "latency": []}
        comparison = analysis.compare_groups(
            snapshot, spec.tracked_commands,
            spec.control_group, spec.experiment_group, since, until)
        final = analysis.verdict(comparison, spec.safety)
        return {
            "schema_version": 1,
            "report_kind": "experiment",
            "scenario": self.topology.name,
            "clock_mode": self.engine.mode,
            "experiment": spec.to_doc(),
            "state": exp.state_doc(),
            "timeline": [
                {"from": f, "to": t, "at_ms": int(round(at))}
                for f, t, at in exp.transitions
            ],
            "groups": {
                "baseline": spec.target_cluster,
                "control": spec.control_group,
                "experiment": spec.experiment_group,
            },
            "thresholds": spec.safety.to_doc(),
            "comparison": comparison.to_doc(),
            "verdict": final.to_doc(),
            "teardown": {
                "complete": not exp.teardown_issues,
                "issues": list(exp.teardown_issues),
            },
            "snapshot": snapshot,
        }
