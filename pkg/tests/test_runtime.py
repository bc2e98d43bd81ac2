"""Platform wiring: determinism, clock modes, the paced real-time loop."""

import dataclasses
import json
import time

import pytest

from chaoslab import load_topology
from chaoslab.injector import InjectionPoint
from chaoslab.orchestrator import SafetyPolicy, load_experiment_spec
from chaoslab.runtime import ExperimentValidationError, Platform, render_report_json
from chaoslab.topology import scenario_path


def test_rejects_unknown_mode(two_hop):
    with pytest.raises(ValueError):
        Platform(two_hop, mode="warp")


def test_seed_override_rewrites_plan(two_hop):
    platform = Platform(two_hop, seed=99)
    assert platform.topology.traffic.seed == 99
    assert platform.engine.seed == 99


def test_bucket_width_follows_clock_mode(two_hop):
    assert Platform(two_hop).telemetry.bucket_ms == 1000.0
    assert Platform(two_hop, mode="real-time").telemetry.bucket_ms == 5000.0


def test_run_experiment_is_deterministic(two_hop):
    def report_bytes():
        platform = Platform(two_hop)
        spec = load_experiment_spec("alice")
        # retarget the bundled spec shape onto the tiny fixture topology
        spec = dataclasses.replace(
            spec,
            target_cluster="front",
            injection_points=(InjectionPoint("front", "GetThing", "back"),),
            tracked_commands=("GetThing",),
            duration_minutes=0.2,
            diverted_fraction=0.02,
            safety=SafetyPolicy(min_samples=5, evaluation_interval_s=1.0),
        )
        _, report, _ = platform.run_experiment(spec)
        return render_report_json(report)

    first, second = report_bytes(), report_bytes()
    assert first == second
    assert first.endswith("\n")
    json.loads(first)  # canonical form is valid JSON


def test_run_experiment_surfaces_validation_issues(two_hop_platform):
    spec = load_experiment_spec("alice")  # targets the gallery topology
    with pytest.raises(ExperimentValidationError) as err:
        two_hop_platform.run_experiment(spec)
    assert err.value.issues


def test_paced_loop_advances_with_wall_time(two_hop):
    platform = Platform(two_hop, mode="real-time")
    platform.start_paced(timescale=200.0)
    try:
        deadline = time.monotonic() + 5.0
        while platform.engine.now_ms < 2000.0 and time.monotonic() < deadline:
            time.sleep(0.02)
        with platform.lock:
            advanced = platform.engine.now_ms
            processed = platform.engine.events_processed
    finally:
        platform.stop_paced()
    assert advanced >= 2000.0
    assert processed > 0


def test_paced_loop_is_continuous_across_plan_boundaries(two_hop):
    """With continuous pumping, request ids keep counting up past one plan's
    worth of traffic instead of resetting."""
    platform = Platform(two_hop, mode="real-time")
    # shrink the plan so the boundary is crossed quickly at high timescale
    platform.topology = dataclasses.replace(
        platform.topology,
        traffic=dataclasses.replace(platform.topology.traffic, duration_s=1.0),
    )
    platform.start_paced(timescale=500.0)
    try:
        deadline = time.monotonic() + 5.0
        while platform.engine.now_ms < 2500.0 and time.monotonic() < deadline:
            time.sleep(0.02)
    finally:
        platform.stop_paced()
    assert platform.engine.now_ms >= 2500.0
    front = platform.mesh.deployment("front")
    assert front.arrivals > 100  # more than one 1s x 100/s chunk arrived


def test_stop_paced_halts_and_is_reentrant(two_hop):
    platform = Platform(two_hop, mode="real-time")
    platform.start_paced(timescale=100.0)
    platform.stop_paced()
    frozen = platform.engine.now_ms
    time.sleep(0.1)
    assert platform.engine.now_ms == frozen
    platform.stop_paced()  # second stop is a no-op
    platform.start_paced(timescale=100.0)  # restart works after a stop
    platform.stop_paced()


def test_start_paced_rejects_double_start_and_bad_timescale(two_hop):
    platform = Platform(two_hop, mode="real-time")
    with pytest.raises(ValueError):
        platform.start_paced(timescale=0.0)
    platform.start_paced(timescale=100.0)
    try:
        with pytest.raises(RuntimeError):
            platform.start_paced(timescale=100.0)
    finally:
        platform.stop_paced()


def test_bundled_scenarios_build_platforms():
    for name in ("gallery", "gallery-broken", "cascade", "cascade-healthy",
                 "cascade-noamp"):
        topo = load_topology(scenario_path(name))
        platform = Platform(topo)
        assert platform.topology.name == name
