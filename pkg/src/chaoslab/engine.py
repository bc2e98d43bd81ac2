"""Deterministic discrete-event engine.

Work is expressed as generator tasks that yield instructions:

    ("wait", delay_ms)               -> resume after delay_ms of simulated time
    ("call", generator, timeout_ms)  -> spawn the generator as a child task and
                                        resume with (completed, value) when it
                                        finishes or the timeout fires, whichever
                                        comes first

A timed-out child keeps running to completion in the background (abandoned
RPCs still occupy downstream capacity); its late result is discarded. Event
ordering is (timestamp, sequence number), so identical schedules replay
bit-identically regardless of wall clock.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Any, Callable, Generator, Optional

Task = Generator[tuple, Any, Any]


@dataclass
class MeshClock:
    """Clock view exposed to the rest of the platform."""

    mode: str  # "simulated" | "real-time"
    now_ms: float
    seed: int


class _TaskState:
    __slots__ = ("gen", "done", "result", "waiters")

    def __init__(self, gen: Task):
        self.gen = gen
        self.done = False
        self.result: Any = None
        self.waiters: list[tuple["_TaskState", "_WaitHandle"]] = []


class _WaitHandle:
    """One pending call-with-timeout; consumed by whichever event fires first."""

    __slots__ = ("consumed",)

    def __init__(self) -> None:
        self.consumed = False


class Engine:
    def __init__(self, seed: int = 0, mode: str = "simulated"):
        self.seed = seed
        self.mode = mode
        self.now_ms: float = 0.0
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = 0
        self.events_processed = 0

    @property
    def clock(self) -> MeshClock:
        return MeshClock(mode=self.mode, now_ms=self.now_ms, seed=self.seed)

    def _push(self, at_ms: float, action: Callable[[], None]) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (at_ms, self._seq, action))

    def call_at(self, at_ms: float, fn: Callable[[], None]) -> None:
        """Schedule a plain callback (used for arrivals, monitor ticks)."""
        self._push(max(at_ms, self.now_ms), fn)

    def spawn(self, gen: Task, at_ms: Optional[float] = None) -> _TaskState:
        task = _TaskState(gen)
        start = self.now_ms if at_ms is None else max(at_ms, self.now_ms)
        self._push(start, lambda: self._step(task, None))
        return task

    def spawn_immediate(self, gen: Task) -> _TaskState:
        """Start a task synchronously at the current timestamp (no queue hop).
        Only valid from inside an event action or before the run starts.
        """
        task = _TaskState(gen)
        self._step(task, None)
        return task

    def _finish(self, task: _TaskState, result: Any) -> None:
        task.done = True
        task.result = result
        for waiter, handle in task.waiters:
            if not handle.consumed:
                handle.consumed = True
                self._step(waiter, (True, result))
        task.waiters.clear()

    def _step(self, task: _TaskState, send_value: Any) -> None:
        try:
            instr = task.gen.send(send_value)
        except StopIteration as stop:
            self._finish(task, stop.value)
            return
        kind = instr[0]
        if kind == "wait":
            self._push(self.now_ms + instr[1], lambda: self._step(task, None))
        elif kind == "call":
            child_gen, timeout_ms = instr[1], instr[2]
            child = _TaskState(child_gen)
            handle = _WaitHandle()
            child.waiters.append((task, handle))
            if timeout_ms is not None:
                self._push(self.now_ms + timeout_ms, self._timeout_action(task, handle))
            # Run the child synchronously at the current timestamp; it will
            # yield its own waits. Immediate completion resumes the parent
            # through the waiter list above.
            self._step(child, None)
        else:
            raise RuntimeError(f"unknown engine instruction {kind!r}")

    def _timeout_action(self, task: _TaskState, handle: _WaitHandle) -> Callable[[], None]:
        def fire() -> None:
            if not handle.consumed:
                handle.consumed = True
                self._step(task, (False, None))

        return fire

    def next_event_at(self) -> Optional[float]:
        return self._heap[0][0] if self._heap else None

    def step(self) -> bool:
        """Process exactly one event; False when the queue is empty."""
        if not self._heap:
            return False
        at, _, action = heapq.heappop(self._heap)
        if at > self.now_ms:
            self.now_ms = at
        self.events_processed += 1
        action()
        return True

    def run_until(self, t_ms: float) -> None:
        """Process every event with timestamp <= t_ms; clock ends at t_ms."""
        heap = self._heap
        while heap and heap[0][0] <= t_ms:
            at, _, action = heapq.heappop(heap)
            if at > self.now_ms:
                self.now_ms = at
            self.events_processed += 1
            action()
        if t_ms > self.now_ms:
            self.now_ms = t_ms

    def run(self) -> None:
        """Drain the event queue completely."""
        heap = self._heap
        while heap:
            at, _, action = heapq.heappop(heap)
            if at > self.now_ms:
                self.now_ms = at
            self.events_processed += 1
            action()

    def pending(self) -> int:
        return len(self._heap)


def run_task(engine: Engine, gen: Task) -> Any:
    """Spawn a task and drain the engine; returns the task's result."""
    task = engine.spawn(gen)
    engine.run()
    if not task.done:
        raise RuntimeError("task did not complete; engine drained with task still waiting")
    return task.result
