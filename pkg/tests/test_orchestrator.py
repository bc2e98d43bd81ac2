"""Experiment lifecycle: spec parsing, validation, transitions, guardrails,
teardown ordering, fail-safe aborts."""

import pytest

from chaoslab.injector import InjectionPoint, Treatment
from chaoslab.orchestrator import (
    ABORTED,
    COMPLETED,
    CONCLUDING,
    DRAFT,
    PROVISIONING,
    RUNNING,
    VALIDATED,
    Experiment,
    ExperimentSpec,
    SafetyPolicy,
    SpecParseError,
    load_experiment_spec,
    parse_experiment_spec,
)
from chaoslab.runtime import ExperimentValidationError, Platform

POINT = {"caller": "front", "command": "GetThing", "target": "back"}

GOOD_DOC = {
    "schema_version": 1,
    "id": "exp-1",
    "target_cluster": "back",
    "injection_points": [POINT],
    "treatment": {"kind": "error"},
    "diverted_fraction": 0.01,
    "duration_minutes": 1.0,
    "tracked_commands": ["GetThing"],
    "safety": {"min_samples": 20, "evaluation_interval_s": 1.0},
}


def spec(**overrides):
    doc = dict(GOOD_DOC)
    doc.update(overrides)
    return parse_experiment_spec(doc)


# -- spec parsing -------------------------------------------------------------

def test_parse_good_doc_round_trips():
    s = spec()
    assert s.id == "exp-1"
    assert s.control_group == "back-chap-control"
    assert s.experiment_group == "back-chap-experiment"
    assert s.injection_points == (InjectionPoint("front", "GetThing", "back"),)
    assert s.safety.min_samples == 20
    # doc -> spec -> doc -> spec is a fixed point
    assert parse_experiment_spec(s.to_doc()) == s


def test_parse_collects_every_issue():
    doc = dict(GOOD_DOC)
    doc.update(schema_version=2, id="", diverted_fraction=1.5,
               duration_minutes=0, treatment={"kind": "explode"})
    with pytest.raises(SpecParseError) as err:
        parse_experiment_spec(doc)
    codes = sorted(i.code for i in err.value.issues)
    assert codes == [
        "bad_duration", "bad_fraction", "bad_id", "bad_schema", "bad_treatment",
    ]


@pytest.mark.parametrize("field,value,code", [
    ("injection_points", [], "bad_injection_points"),
    ("injection_points", [{"caller": "a"}], "bad_injection_points"),
    ("tracked_commands", [], "bad_tracked_commands"),
    ("tracked_commands", [1], "bad_tracked_commands"),
    ("target_cluster", None, "bad_target_cluster"),
    ("safety", {"bogus": 1}, "bad_safety"),
    ("safety", {"min_samples": 0}, "bad_safety"),
    ("treatment", None, "bad_treatment"),
])
def test_parse_single_field_issues(field, value, code):
    with pytest.raises(SpecParseError) as err:
        spec(**{field: value})
    assert [i.code for i in err.value.issues] == [code]


def test_load_bundled_spec_by_name():
    s = load_experiment_spec("alice")
    assert s.target_cluster == "api"
    assert s.treatment.kind == "error"
    assert s.diverted_fraction == 0.003


def test_load_unknown_spec():
    with pytest.raises(SpecParseError) as err:
        load_experiment_spec("no-such-experiment")
    assert err.value.issues[0].code == "unknown_spec"


def test_load_spec_from_path(tmp_path):
    import yaml
    p = tmp_path / "mine.yaml"
    p.write_text(yaml.safe_dump(GOOD_DOC))
    assert load_experiment_spec(p).id == "exp-1"


# -- semantic validation -------------------------------------------------------

def orch(platform):
    return platform.orchestrator


def test_validate_good_spec_moves_to_validated(two_hop_platform):
    s = spec()
    orch(two_hop_platform).create(s)
    assert orch(two_hop_platform).validate(s.id) == []
    assert orch(two_hop_platform).get(s.id).phase == VALIDATED


def test_validate_issue_codes(two_hop_platform):
    o = orch(two_hop_platform)
    cases = {
        "unknown_cluster": spec(id="e1", target_cluster="nowhere"),
        "point_unresolved": spec(id="e2", injection_points=[
            {"caller": "front", "command": "GetThing", "target": "front"}]),
        "tracked_command_unknown": spec(id="e3", tracked_commands=["Nope"]),
        "fraction_over_cap": spec(id="e4", diverted_fraction=0.5),
    }
    for code, s in cases.items():
        o.create(s)
        issues = o.validate(s.id)
        assert code in {i.code for i in issues}, code
        assert o.get(s.id).phase == DRAFT


def test_validate_cluster_busy(two_hop_platform):
    o = orch(two_hop_platform)
    first = spec(id="first")
    o.create(first)
    o.validate(first.id)
    o.start(first.id)
    assert o.get(first.id).phase == RUNNING
    second = spec(id="second")
    o.create(second)
    assert {i.code for i in o.validate(second.id)} == {"cluster_busy"}
    # after the first experiment ends the cluster frees up
    o.conclude_or_abort(first.id)
    assert o.validate(second.id) == []


def test_duplicate_id_rejected(two_hop_platform):
    o = orch(two_hop_platform)
    o.create(spec())
    with pytest.raises(ValueError):
        o.create(spec())


# -- lifecycle ------------------------------------------------------------------

def started(platform, **overrides):
    s = spec(**overrides)
    o = orch(platform)
    o.create(s)
    assert o.validate(s.id) == []
    o.start(s.id)
    return s, o


def test_start_provisions_diverts_and_arms(two_hop_platform):
    s, o = started(two_hop_platform)
    exp = o.get(s.id)
    assert exp.phase == RUNNING
    assert exp.started_at == 0.0
    assert exp.ends_at == 60_000.0
    names = two_hop_platform.mesh.deployment_names()
    assert "back-chap-control" in names and "back-chap-experiment" in names
    assert two_hop_platform.router.table_for("back") is not None
    (rule,) = two_hop_platform.injector.active_rules()
    assert rule.experiment_id == s.id
    assert rule.scope_group == "back-chap-experiment"


def test_start_requires_validated(two_hop_platform):
    s = spec()
    o = orch(two_hop_platform)
    o.create(s)
    with pytest.raises(ValueError):
        o.start(s.id)  # still Draft


def test_illegal_transitions_rejected():
    exp = Experiment(spec())
    with pytest.raises(ValueError):
        exp.transition(RUNNING, 0.0)  # Draft -> Running skips two phases
    exp.transition(VALIDATED, 0.0)
    exp.transition(PROVISIONING, 1.0)
    exp.transition(RUNNING, 2.0)
    exp.transition(CONCLUDING, 3.0)
    exp.transition(COMPLETED, 4.0)
    with pytest.raises(ValueError):
        exp.transition(ABORTED, 5.0)  # terminal states are final
    assert [t[:2] for t in exp.transitions] == [
        (DRAFT, VALIDATED), (VALIDATED, PROVISIONING), (PROVISIONING, RUNNING),
        (RUNNING, CONCLUDING), (CONCLUDING, COMPLETED),
    ]


def test_provisioning_failure_rolls_back(two_hop_platform):
    s = spec()
    o = orch(two_hop_platform)
    # occupy the experiment group name so the second provision blows up
    two_hop_platform.mesh.provision_clone("back", s.experiment_group, "experiment")
    o.create(s)
    o.validate(s.id)
    exp = o.start(s.id)
    assert exp.phase == ABORTED
    assert exp.abort_reason.startswith("provisioning_failure:")
    # the control clone created before the failure is gone again
    assert s.control_group not in two_hop_platform.mesh.deployment_names()
    assert two_hop_platform.router.table_for("back") is None
    assert two_hop_platform.injector.active_rules() == ()


def test_conclude_tears_down_in_order(two_hop_platform):
    s, o = started(two_hop_platform)
    calls = []
    injector, router, mesh = (
        two_hop_platform.injector, two_hop_platform.router, two_hop_platform.mesh)
    real_disarm, real_uninstall, real_decom = (
        injector.disarm, router.uninstall, mesh.decommission_clone)
    injector.disarm = lambda *a: (calls.append("disarm"), real_disarm(*a))[1]
    router.uninstall = lambda *a: (calls.append("reroute"), real_uninstall(*a))[1]
    mesh.decommission_clone = (
        lambda *a: (calls.append("decommission"), real_decom(*a))[1])
    report = o.conclude_or_abort(s.id)
    assert calls == ["disarm", "reroute", "decommission", "decommission"]
    exp = o.get(s.id)
    assert exp.phase == COMPLETED
    assert report["teardown"] == {"complete": True, "issues": []}
    assert two_hop_platform.mesh.deployment_names() == ["back", "front"]


def test_conclude_is_idempotent(two_hop_platform):
    s, o = started(two_hop_platform)
    first = o.conclude_or_abort(s.id)
    second = o.conclude_or_abort(s.id)
    assert first is second


def test_external_abort_records_reason(two_hop_platform):
    s, o = started(two_hop_platform)
    o.abort(s.id, "manual_abort: operator said so")
    exp = o.get(s.id)
    assert exp.phase == ABORTED
    assert exp.abort_reason == "manual_abort: operator said so"
    assert exp.report["verdict"]["result"] in (
        "resilient", "not_resilient", "inconclusive")
    # idempotent once terminal
    o.abort(s.id, "again")
    assert exp.abort_reason == "manual_abort: operator said so"


def test_abort_from_draft_rejected(two_hop_platform):
    s = spec()
    o = orch(two_hop_platform)
    o.create(s)
    with pytest.raises(ValueError):
        o.abort(s.id, "nope")


def test_teardown_issue_recorded_not_fatal(two_hop_platform):
    s, o = started(two_hop_platform)
    two_hop_platform.router.uninstall = lambda *a: (_ for _ in ()).throw(
        RuntimeError("router wedged"))
    report = o.conclude_or_abort(s.id)
    assert report["teardown"]["complete"] is False
    assert any("router wedged" in i for i in report["teardown"]["issues"])
    assert o.get(s.id).phase == COMPLETED  # a sticky table is reported, not fatal


# -- guardrail monitor -----------------------------------------------------------

def test_monitor_concludes_at_end_of_window(two_hop_platform):
    s, o = started(two_hop_platform)
    exp = o.get(s.id)
    assert o.monitor_tick(s.id, exp.ends_at) == ("conclude", None)
    assert o.monitor_tick(s.id, exp.ends_at + 1) == ("conclude", None)


def test_monitor_waits_for_min_samples(two_hop_platform):
    s, o = started(two_hop_platform)
    # no traffic at all yet: guardrails must hold fire
    assert o.monitor_tick(s.id, 5000.0) == ("continue", None)


def test_monitor_aborts_on_telemetry_outage(two_hop_platform):
    s, o = started(two_hop_platform)
    o._telemetry_available = lambda: False
    decision, reason = o.monitor_tick(s.id, 5000.0)
    assert decision == "abort"
    assert reason.startswith("telemetry_unavailable")


def test_monitor_aborts_on_telemetry_exception(two_hop_platform):
    s, o = started(two_hop_platform)
    def boom(*a, **k):
        raise RuntimeError("snapshot store on fire")
    o.telemetry.compute_sps = boom
    decision, reason = o.monitor_tick(s.id, 5000.0)
    assert decision == "abort"
    assert "snapshot store on fire" in reason


def test_monitor_tick_requires_running(two_hop_platform):
    s = spec()
    o = orch(two_hop_platform)
    o.create(s)
    with pytest.raises(ValueError):
        o.monitor_tick(s.id, 0.0)


def seed_group_traffic(platform, group, ok, bad, command="GetThing", at=100.0):
    tel = platform.telemetry
    for _ in range(ok):
        tel.increment_outcome(group, command, "success", at)
        tel.record_request(group, "success", at)
        tel.record_stream_start(group, at)
    for _ in range(bad):
        tel.increment_outcome(group, command, "fallback_failure", at)
        tel.record_request(group, "failure", at)


def test_monitor_aborts_on_sps_drop(two_hop_platform):
    s, o = started(two_hop_platform)
    seed_group_traffic(two_hop_platform, s.control_group, ok=100, bad=0)
    seed_group_traffic(two_hop_platform, s.experiment_group, ok=80, bad=20)
    decision, reason = o.monitor_tick(s.id, 5000.0)
    assert decision == "abort"
    assert reason.startswith("sps_drop:")


def test_monitor_aborts_on_fallback_failures(two_hop_platform):
    # keep SPS inside tolerance but push failed fallbacks over their threshold
    s, o = started(two_hop_platform, safety={
        "min_samples": 20, "sps_drop_threshold": 0.10,
        "fallback_failure_threshold": 0.02, "evaluation_interval_s": 1.0})
    seed_group_traffic(two_hop_platform, s.control_group, ok=100, bad=0)
    seed_group_traffic(two_hop_platform, s.experiment_group, ok=96, bad=4)
    decision, reason = o.monitor_tick(s.id, 5000.0)
    assert decision == "abort"
    assert reason.startswith("fallback_failure: GetThing")


def test_monitor_continues_when_healthy(two_hop_platform):
    s, o = started(two_hop_platform)
    seed_group_traffic(two_hop_platform, s.control_group, ok=100, bad=0)
    seed_group_traffic(two_hop_platform, s.experiment_group, ok=99, bad=1)
    # 1% failed fallbacks is under the 2% default; SPS ratio 0.99 over 0.95
    assert o.monitor_tick(s.id, 5000.0) == ("continue", None)


# -- end-to-end through the engine ----------------------------------------------

def test_scheduled_monitor_runs_experiment_to_completion(two_hop_platform):
    """The self-rescheduling monitor tick advances the clock past the traffic
    tail and concludes the experiment at its window end."""
    s = spec(safety={"min_samples": 5, "evaluation_interval_s": 1.0})
    o = orch(two_hop_platform)
    o.create(s)
    assert o.validate(s.id) == []
    o.start(s.id)
    two_hop_platform.drive_started(s.id)
    final = o.get(s.id)
    assert final.phase == COMPLETED  # static-value fallback keeps it healthy
    assert final.ended_at == final.ends_at == 60_000.0
    assert final.report is not None


def test_run_experiment_raises_on_validation_issues(two_hop_platform):
    s = spec(target_cluster="nowhere")
    with pytest.raises(ExperimentValidationError) as err:
        two_hop_platform.run_experiment(s)
    assert any(i.code == "unknown_cluster" for i in err.value.issues)


def test_report_shape_and_state_doc(two_hop_platform):
    s, o = started(two_hop_platform)
    report = o.conclude_or_abort(s.id)
    assert set(report) >= {
        "schema_version", "report_kind", "scenario", "clock_mode", "experiment",
        "state", "timeline", "groups", "thresholds", "comparison", "verdict",
        "teardown", "snapshot",
    }
    assert report["report_kind"] == "experiment"
    assert report["state"]["phase"] == COMPLETED
    for key in ("started_at_ms", "ends_at_ms", "ended_at_ms"):
        assert report["state"][key] is None or isinstance(report["state"][key], int)
    phases = [(t["from"], t["to"]) for t in report["timeline"]]
    assert phases[0] == (DRAFT, VALIDATED)
    assert phases[-1] == (CONCLUDING, COMPLETED)
