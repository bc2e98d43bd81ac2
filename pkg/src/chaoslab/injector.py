"""Fault injection: treatments, scoping rules, and the per-call decision.

A rule only ever fires for requests tagged with its experiment and routed to
its scope group, at the exact call sites it names. Error treatments fail the
call on the client side without ever invoking the target; latency treatments
delay the client and then let the call proceed.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

TREATMENT_KINDS = ("error", "latency", "error_and_latency")


@dataclass(frozen=True)
class Treatment:
    kind: str
    added_latency_ms: float = 0.0

    def __post_init__(self):
        if self.kind not in TREATMENT_KINDS:
            raise ValueError(f"unknown treatment kind {self.kind!r}")
        if self.involves_latency() and self.added_latency_ms <= 0:
            raise ValueError("latency treatments need added_latency_ms > 0")
        if not self.involves_latency() and self.added_latency_ms:
            raise ValueError("error treatments must not carry added latency")

    def involves_error(self) -> bool:
        return self.kind in ("error", "error_and_latency")

    def involves_latency(self) -> bool:
        return self.kind in ("latency", "error_and_latency")


@dataclass(frozen=True)
class InjectionPoint:
    caller: str
    command: str
    target: str


@dataclass(frozen=True)
class InjectionRule:
    experiment_id: str
    scope_group: str
    points: tuple[InjectionPoint, ...]
    treatment: Treatment
    fraction: float = 1.0

    def __post_init__(self):
        if not self.points:
            raise ValueError(f"{self.experiment_id}: rule needs at least one injection point")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"{self.experiment_id}: fraction must be in (0,1]")


class FaultInjector:
    """Holds the armed rules and answers one question per call site:
    which treatment, if any, applies to this request at this point?
    """

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._rules: list[InjectionRule] = []

    def arm(self, rule: InjectionRule) -> None:
        with self._lock:
            self._rules.append(rule)

    def disarm(self, experiment_id: str) -> int:
        """Remove every rule for the experiment; returns how many were removed."""
        with self._lock:
            before = len(self._rules)
            self._rules = [r for r in self._rules if r.experiment_id != experiment_id]
            return before - len(self._rules)

    def active_rules(self) -> tuple[InjectionRule, ...]:
        with self._lock:
            return tuple(self._rules)

    def consult(self, ctx, point: InjectionPoint) -> Optional[Treatment]:
        """Decide the treatment for one call. The fraction draw comes from the
        request's own RNG stream so the decision is independent of event order,
        and is only taken once a rule fully matches.
        """
        with self._lock:
            rules = list(self._rules)
        for rule in rules:
            if ctx.experiment_tag != rule.experiment_id:
                continue
            if ctx.server_group != rule.scope_group:
                continue
            if point not in rule.points:
                continue
            if rule.fraction >= 1.0 or ctx.rng.random() < rule.fraction:
                return rule.treatment
        return None
