"""Event engine semantics: deterministic ordering, wait/call instructions,
timeouts that orphan (not cancel) children, and the run helpers.
"""

import pytest

from chaoslab.engine import Engine, run_task


def test_wait_advances_clock():
    eng = Engine()
    seen = []

    def task():
        yield ("wait", 250)
        seen.append(eng.now_ms)

    run_task(eng, task())
    assert seen == [250]


def test_events_fire_in_timestamp_order_with_fifo_ties():
    eng = Engine()
    order = []
    eng.call_at(10, lambda: order.append("b"))
    eng.call_at(5, lambda: order.append("a"))
    eng.call_at(10, lambda: order.append("c"))  # same time: insertion order
    eng.run()
    assert order == ["a", "b", "c"]


def test_call_returns_child_result():
    eng = Engine()

    def child():
        yield ("wait", 5)
        return 123

    def parent():
        completed, value = yield ("call", child(), 1000)
        return (completed, value)

    assert run_task(eng, parent()) == (True, 123)


def test_call_without_timeout_waits_forever():
    eng = Engine()

    def child():
        yield ("wait", 60_000)
        return "late but fine"

    def parent():
        completed, value = yield ("call", child(), None)
        return (completed, value)

    assert run_task(eng, parent()) == (True, "late but fine")


def test_timeout_resumes_parent_with_not_completed():
    eng = Engine()

    def child():
        yield ("wait", 500)
        return "ignored"

    def parent():
        completed, value = yield ("call", child(), 100)
        return (completed, value, eng.now_ms)

    assert run_task(eng, parent()) == (False, None, 100)


def test_timed_out_child_keeps_running():
    """An abandoned call is an orphan, not a cancellation: it still finishes."""
    eng = Engine()
    finished = []

    def child():
        yield ("wait", 500)
        finished.append(eng.now_ms)
        return "done"

    def parent():
        completed, _ = yield ("call", child(), 100)
        return completed

    task = eng.spawn(parent())
    eng.run()
    assert task.result is False
    assert finished == [500]


def test_late_child_result_is_discarded():
    eng = Engine()
    resumes = []

    def child():
        yield ("wait", 500)
        return "late"

    def parent():
        completed, value = yield ("call", child(), 100)
        resumes.append((completed, value))
        yield ("wait", 1000)  # still alive when the orphan finishes
        return "parent done"

    task = eng.spawn(parent())
    eng.run()
    # parent resumed exactly once, with the timeout result
    assert resumes == [(False, None)]
    assert task.result == "parent done"


def test_immediate_child_completion_resumes_parent():
    eng = Engine()

    def child():
        return 7
        yield  # pragma: no cover - marks this as a generator

    def parent():
        completed, value = yield ("call", child(), 10)
        return (completed, value, eng.now_ms)

    assert run_task(eng, parent()) == (True, 7, 0.0)


def test_spawn_immediate_runs_at_current_timestamp():
    eng = Engine()
    started_at = []

    def task():
        started_at.append(eng.now_ms)
        yield ("wait", 1)

    def driver():
        eng.spawn_immediate(task())

    eng.call_at(42, driver)
    eng.run()
    assert started_at == [42]


def test_run_until_stops_at_boundary():
    eng = Engine()
    fired = []
    for t in (10, 20, 30):
        eng.call_at(t, lambda t=t: fired.append(t))
    eng.run_until(20)
    assert fired == [10, 20]
    assert eng.now_ms == 20
    eng.run()
    assert fired == [10, 20, 30]


def test_run_until_advances_clock_even_without_events():
    eng = Engine()
    eng.run_until(500)
    assert eng.now_ms == 500


def test_step_processes_one_event():
    eng = Engine()
    fired = []
    eng.call_at(5, lambda: fired.append("a"))
    eng.call_at(10, lambda: fired.append("b"))
    assert eng.next_event_at() == 5
    assert eng.step() is True
    assert fired == ["a"]
    assert eng.step() is True
    assert eng.step() is False
    assert eng.next_event_at() is None


def test_call_at_never_schedules_in_the_past():
    eng = Engine()
    at = []
    eng.call_at(100, lambda: eng.call_at(50, lambda: at.append(eng.now_ms)))
    eng.run()
    assert at == [100]


def test_identical_schedules_replay_identically():
    def run_once():
        eng = Engine(seed=1)
        log = []

        def worker(name, delay):
            yield ("wait", delay)
            log.append((name, eng.now_ms))

        for i in range(50):
            eng.spawn(worker(f"w{i}", (i * 7) % 13))
        eng.run()
        return log, eng.events_processed

    assert run_once() == run_once()


def test_unknown_instruction_rejected():
    eng = Engine()

    def task():
        yield ("teleport", 1)

    with pytest.raises(RuntimeError, match="unknown engine instruction"):
        run_task(eng, task())


def test_blocked_parent_is_not_marked_done():
    eng = Engine()

    def stuck():
        while True:
            yield ("wait", 1)

    def parent():
        completed, _ = yield ("call", stuck(), None)
        return completed

    # drain a bounded slice; the parent still waits on its endless child
    task = eng.spawn(parent())
    eng.run_until(10)
    assert not task.done
