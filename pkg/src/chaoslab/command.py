"""Command wrapper around every RPC edge: timeout, fallback, circuit breaker.

Every execution lands in exactly one of three outcome counters per
(server group, command): success, fallback_success, fallback_failure.
Short-circuited executions still count as fallback_success/failure (per the
fallback result) and additionally bump a short_circuit annotation counter,
so the three main counters stay exhaustive.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

PRIMARY_ERRORS = ("injected_error", "intrinsic_error", "timeout", "overload", "short_circuit")

CLOSED = "closed"
OPEN = "open"
HALF_OPEN = "half_open"


@dataclass(frozen=True)
class CommandConfig:
    command_name: str
    timeout_ms: float = 1000.0
    breaker_error_threshold: float = 0.5
    breaker_window_ms: float = 10_000.0
    breaker_min_volume: int = 20
    breaker_cooldown_ms: float = 5_000.0

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError(f"{self.command_name}: timeout must be > 0")
        if not 0.0 < self.breaker_error_threshold <= 1.0:
            raise ValueError(f"{self.command_name}: breaker threshold must be in (0,1]")
        if self.breaker_min_volume < 1:
            raise ValueError(f"{self.command_name}: breaker min_volume must be >= 1")


@dataclass(frozen=True)
class CommandOutcome:
    kind: str  # success | fallback_success | fallback_failure
    primary_error: Optional[str]
    latency_ms: float
    short_circuited: bool = False

    def __post_init__(self):
        if self.kind == "success" and self.primary_error is not None:
            raise ValueError("success outcome must not carry a primary_error")
        if self.kind != "success" and self.primary_error is None:
            raise ValueError(f"{self.kind} outcome requires a primary_error")
        if self.primary_error is not None and self.primary_error not in PRIMARY_ERRORS:
            raise ValueError(f"unknown primary_error {self.primary_error!r}")


@dataclass(frozen=True)
class CallResult:
    """What a primary or fallback call reports back to the command wrapper."""

    ok: bool
    error_class: Optional[str] = None  # injected_error | intrinsic_error | overload


BREAKER_BUCKETS = 10  # rolling window subdivisions


@dataclass(frozen=True)
class BreakerState:
    """Rolling error/total counts over the breaker window, kept as a bounded
    run of sub-buckets so recording stays O(1) at any traffic rate.
    """

    state: str = CLOSED
    window: tuple[tuple[int, int, int], ...] = ()  # (bucket_index, errors, total)
    opened_at: float = 0.0
    probe_in_flight: bool = False
    probe_result: Optional[bool] = None  # True = probe succeeded

    def window_counts(self) -> tuple[int, int]:
        errors = total = 0
        for _, e, t in self.window:
            errors += e
            total += t
        return errors, total


def _evict(state: BreakerState, config: CommandConfig, now: float) -> BreakerState:
    window = state.window
    if not window:
        return state
    width = config.breaker_window_ms / BREAKER_BUCKETS
    floor = int(now // width) - BREAKER_BUCKETS
    if window[0][0] > floor:  # oldest bucket still live: nothing to evict
        return state
    return replace(state, window=tuple(b for b in window if b[0] > floor))


def breaker_evaluate(state: BreakerState, config: CommandConfig, now: float) -> BreakerState:
    """Pure transition function for the four-edge breaker machine.

    Window buckets older than breaker_window_ms are evicted before any
    transition is considered.
    """
    state = _evict(state, config, now)

    if state.state == CLOSED:
        errors, total = state.window_counts()
        if total >= config.breaker_min_volume:
            if errors / total >= config.breaker_error_threshold:
                return replace(
                    state, state=OPEN, opened_at=now, probe_in_flight=False, probe_result=None
                )
        return state

    if state.state == OPEN:
        if now - state.opened_at >= config.breaker_cooldown_ms:
            return replace(state, state=HALF_OPEN, probe_in_flight=False, probe_result=None)
        return state

    # half_open: resolve the probe if one finished
    if state.probe_result is True:
        return BreakerState(state=CLOSED)
    if state.probe_result is False:
        return replace(
            state, state=OPEN, opened_at=now, probe_in_flight=False, probe_result=None
        )
    return state


class BreakerRegistry:
    """Shared breaker state per (server group, command); safe under concurrent use."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._states: dict[tuple[str, str], BreakerState] = {}
        self.transitions: list[tuple[str, str, str, str, float]] = []  # (group, cmd, from, to, at)

    def state_of(self, group: str, command: str) -> BreakerState:
        with self._lock:
            return self._states.get((group, command), BreakerState())

    def _swap(self, key: tuple[str, str], new: BreakerState, now: float) -> None:
        old = self._states.get(key, BreakerState())
        if new.state != old.state:
            self.transitions.append((key[0], key[1], old.state, new.state, now))
        self._states[key] = new

    def begin_call(self, group: str, command: str, config: CommandConfig, now: float) -> str:
        """Returns 'proceed', 'probe', or 'short_circuit' for this execution."""
        key = (group, command)
        with self._lock:
            state = breaker_evaluate(self._states.get(key, BreakerState()), config, now)
            if state.state == CLOSED:
                decision = "proceed"
            elif state.state == OPEN:
                decision = "short_circuit"
            elif not state.probe_in_flight:
                state = replace(state, probe_in_flight=True)
                decision = "probe"
            else:
                decision = "short_circuit"
            self._swap(key, state, now)
            return decision

    def record(
        self, group: str, command: str, config: CommandConfig,
        at: float, is_error: bool, was_probe: bool = False,
    ) -> None:
        key = (group, command)
        width = config.breaker_window_ms / BREAKER_BUCKETS
        bucket = int(at // width)
        with self._lock:
            state = self._states.get(key, BreakerState())
            window = state.window
            if window and window[-1][0] == bucket:
                b, e, t = window[-1]
                window = window[:-1] + ((b, e + (1 if is_error else 0), t + 1),)
            else:
                window = window + ((bucket, 1 if is_error else 0, 1),)
            state = replace(state, window=window)
            if was_probe:
                state = replace(state, probe_result=not is_error)
            state = breaker_evaluate(state, config, at)
            self._swap(key, state, at)


def execute_command(
    config: CommandConfig,
    ctx,
    primary: Callable[[], "Generator"],
    fallback,
    *,
    group: str,
    telemetry,
    breakers: BreakerRegistry,
    now_fn: Callable[[], float],
    alternate_call: Optional[Callable[[str], "Generator"]] = None,
    treatment=None,
):
    """Engine task wrapping one RPC edge; returns a CommandOutcome.

    `primary` is a zero-arg thunk producing the downstream-call task; it is
    never invoked when the breaker short-circuits or an error treatment fires.
    `fallback` is a FallbackSpec; alternate-service-call fallbacks run through
    `alternate_call(target)` without a command wrapper of their own.
    """
    start = now_fn()
    name = config.command_name
    decision = breakers.begin_call(group, name, config, start)

    primary_error: Optional[str] = None
    if decision == "short_circuit":
        primary_error = "short_circuit"
        telemetry.increment_outcome(group, name, "short_circuit_annotation", start)
    else:
        if treatment is None:
            attempt = primary()
        else:
            attempt = _treated_primary(
                treatment, primary, ctx, group=group, command=name,
                telemetry=telemetry, now_fn=now_fn,
            )
        completed, result = yield ("call", attempt, config.timeout_ms)
        if not completed:
            primary_error = "timeout"
        elif result.ok:
            primary_error = None
        else:
            primary_error = result.error_class or "intrinsic_error"
            if primary_error == "overload":
                telemetry.increment_outcome(group, name, "overload", now_fn())
        breakers.record(
            group, name, config, now_fn(), is_error=primary_error is not None,
            was_probe=decision == "probe",
        )

    if primary_error is None:
        end = now_fn()
        outcome = CommandOutcome("success", None, end - start)
    else:
        fb_ok = yield from _run_fallback(fallback, alternate_call)
        end = now_fn()
        kind = "fallback_success" if fb_ok else "fallback_failure"
        outcome = CommandOutcome(
            kind, primary_error, end - start, short_circuited=decision == "short_circuit"
        )

    telemetry.increment_outcome(group, name, outcome.kind, end)
    telemetry.observe_latency(group, name, end, outcome.latency_ms)
    return outcome


def _treated_primary(treatment, primary, ctx, *, group, command, telemetry, now_fn):
    """Apply the fault treatment, then run the real call if one survives."""
    if treatment is not None:
        if treatment.involves_latency():
            telemetry.increment_outcome(group, command, "injected_latency", now_fn())
            ctx.injected_treatments.append(f"latency+{treatment.added_latency_ms:g}ms@{command}")
            yield ("wait", treatment.added_latency_ms)
        if treatment.involves_error():
            telemetry.increment_outcome(group, command, "injected_error", now_fn())
            ctx.injected_treatments.append(f"error@{command}")
            return CallResult(False, "injected_error")
    completed, result = yield ("call", primary(), None)
    return result


def _run_fallback(fallback, alternate_call):
    """Run a FallbackSpec; returns True when the fallback served successfully."""
    if fallback is None or fallback.kind == "broken":
        return False
    if fallback.kind == "static-value":
        return True
    # alternate-service-call: a real downstream call, not wrapped in a command
    if alternate_call is None:
        return False
    completed, result = yield ("call", alternate_call(fallback.alternate_target), None)
    return bool(completed and result.ok)
