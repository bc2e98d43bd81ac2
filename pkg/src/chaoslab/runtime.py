"""Wiring: one Platform object per loaded scenario, plus headless run drivers
and the paced loop that maps the simulated clock onto wall time for live use.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from typing import Optional

from .command import BreakerRegistry
from .engine import Engine
from .injector import FaultInjector
from .mesh import Mesh, RunSummary
from .orchestrator import (
    DEFAULT_MAX_DIVERT,
    Experiment,
    ExperimentSpec,
    Orchestrator,
    ValidationIssue,
)
from .router import Router
from .telemetry import REALTIME_BUCKET_MS, SIM_BUCKET_MS, TelemetryStore
from .topology import Topology, TrafficPlan


class ExperimentValidationError(ValueError):
    def __init__(self, issues: list[ValidationIssue]):
        self.issues = issues
        super().__init__("; ".join(f"{i.code}: {i.message}" for i in issues))


class Platform:
    """Everything one scenario needs, wired together: engine, router,
    injector, telemetry, breakers, mesh, orchestrator.
    """

    def __init__(self, topology: Topology, mode: str = "simulated",
                 max_divert: float = DEFAULT_MAX_DIVERT,
                 seed: Optional[int] = None):
        if mode not in ("simulated", "real-time"):
            raise ValueError(f"unknown clock mode {mode!r}")
        if seed is not None:
            topology = topology.with_seed(seed)
        self.topology = topology
        self.mode = mode
        self.engine = Engine(seed=topology.traffic.seed, mode=mode)
        self.router = Router()
        self.injector = FaultInjector()
        self.telemetry = TelemetryStore(
            SIM_BUCKET_MS if mode == "simulated" else REALTIME_BUCKET_MS)
        self.breakers = BreakerRegistry()
        self.mesh = Mesh(self.topology, self.engine, self.router,
                         self.injector, self.telemetry, self.breakers)
        self.orchestrator = Orchestrator(
            self.topology, self.engine, self.mesh, self.router,
            self.injector, self.telemetry, self.breakers, max_divert=max_divert)
        self.lock = threading.RLock()
        self._pacer: Optional[threading.Thread] = None
        self._stop = threading.Event()

    # -- headless -------------------------------------------------------------

    def run_simulation(self, plan: Optional[TrafficPlan] = None,
                       keep_outcomes: bool = False) -> RunSummary:
        """Run one traffic plan to completion on the simulated clock."""
        return self.mesh.run_traffic(plan or self.topology.traffic, keep_outcomes)

    def run_experiment(self, spec: ExperimentSpec,
                       plan: Optional[TrafficPlan] = None,
                       keep_outcomes: bool = False) -> tuple[Experiment, dict, RunSummary]:
        """Full lifecycle, headless: validate, start at t=0, run traffic,
        monitor, conclude or abort, report. Deterministic for a fixed
        (topology, seed, spec).
        """
        exp = self.orchestrator.create(spec)
        issues = self.orchestrator.validate(spec.id)
        if issues:
            raise ExperimentValidationError(issues)
        self.orchestrator.start(spec.id)
        summary = self.drive_started(spec.id, plan, keep_outcomes)
        return exp, exp.report or {}, summary

    def drive_started(self, experiment_id: str,
                      plan: Optional[TrafficPlan] = None,
                      keep_outcomes: bool = False) -> RunSummary:
        """Push a Running experiment through to its terminal state on the
        simulated clock: schedule the traffic plan, drain the engine, and
        conclude if the monitor never fired a terminal decision.
        """
        exp = self.orchestrator.get(experiment_id)
        summary = RunSummary(outcomes=[] if keep_outcomes else None)
        self.mesh.schedule_traffic(plan or self.topology.traffic, summary)
        self.engine.run()
        if not exp.is_terminal():
            # traffic and ticks drained without reaching ends_at (plan shorter
            # than the experiment): conclude on the final simulated instant
            self.orchestrator.conclude_or_abort(experiment_id)
        return summary

    # -- paced real-time --------------------------------------------------------

    def start_paced(self, timescale: float = 1.0, continuous: bool = True) -> None:
        """Drive the engine from a background thread, sleeping between events
        so simulated time advances at `timescale` times wall speed. With
        `continuous`, the scenario's traffic plan is rescheduled end to end
        so a live dashboard always has data flowing.
        """
        if timescale <= 0:
            raise ValueError("timescale must be > 0")
        if self._pacer is not None:
            raise RuntimeError("paced loop already running")
        self._stop.clear()

        plan = self.topology.traffic
        chunk_ms = plan.duration_s * 1000.0

        def pump(offset_requests: int, offset_ms: float) -> None:
            if self._stop.is_set():
                return
            summary = RunSummary()
            base = offset_requests
            spacing = 1000.0 / plan.rate_per_s
            n = int(round(plan.rate_per_s * plan.duration_s))
            for i in range(n):
                at = offset_ms + i * spacing
                self.engine.call_at(at, lambda i=i, at=at: self._arrive(base + i, at, plan, summary))
            if continuous:
                self.engine.call_at(
                    offset_ms + chunk_ms,
                    lambda: pump(base + n, offset_ms + chunk_ms))

        with self.lock:
            pump(0, self.engine.now_ms)

        def drive() -> None:
            while not self._stop.is_set():
                with self.lock:
                    next_at = self.engine.next_event_at()
                    if next_at is None:
                        advance = None
                    else:
                        advance = max(0.0, next_at - self.engine.now_ms)
                if advance is None:
                    time.sleep(0.05)
                    continue
                if advance > 0:
                    self._stop.wait(advance / 1000.0 / timescale)
                    if self._stop.is_set():
                        return
                with self.lock:
                    self.engine.step()

        self._pacer = threading.Thread(target=drive, name="chaoslab-pacer", daemon=True)
        self._pacer.start()

    def _arrive(self, request_id: int, at: float, plan: TrafficPlan, summary: RunSummary) -> None:
        ctx = self.mesh.make_context(request_id, at, plan)
        self.mesh.engine.spawn_immediate(self.mesh._collect(ctx, summary))

    def stop_paced(self) -> None:
        self._stop.set()
        if self._pacer is not None:
            self._pacer.join(timeout=5.0)
            self._pacer = None


def render_report_json(report: dict) -> str:
    """Canonical report serialization: sorted keys, stable layout, trailing
    newline. Byte-identical across runs with the same seed.
    """
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
