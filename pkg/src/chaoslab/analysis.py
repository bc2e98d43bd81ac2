"""Control-vs-experiment comparison and the automated resilience verdict.

Everything here is a pure function over a frozen telemetry snapshot, so
identical snapshots always produce identical reports and verdicts, and a
report file can be re-analyzed offline.

The verdict is threshold-based on fractions and ratios; the two-proportion
z statistic is computed and reported for information only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .telemetry import REQUEST_OUTCOMES

OUTCOME_TRIPLE = ("success", "fallback_success", "fallback_failure")


def _window_total(snapshot: dict, group: str, command: str, outcome: Optional[str],
                  since: float, until: float) -> Optional[int]:
    """Sum of a counter's buckets inside [since, until); None when the metric
    has never been written (distinct from an all-zero window).
    """
    width = snapshot["bucket_ms"]
    lo, hi = int(since // width), int(until // width)
    for entry in snapshot["counters"]:
        if entry["group"] == group and entry["command"] == command and entry["outcome"] == outcome:
            return sum(n for b, n in entry["buckets"].items() if lo <= int(b) < hi)
    return None


def _group_requests(snapshot: dict, group: str, since: float, until: float) -> int:
    return sum(
        _window_total(snapshot, group, "requests", o, since, until) or 0
        for o in REQUEST_OUTCOMES
    )


def _stream_starts(snapshot: dict, group: str, since: float, until: float) -> int:
    return _window_total(snapshot, group, "sps", None, since, until) or 0


def two_proportion_z(successes_a: int, total_a: int, successes_b: int, total_b: int) -> Optional[float]:
    """z statistic for H0: the two success proportions are equal (b minus a).
    None when either total is zero or the pooled variance degenerates.
    """
    if total_a <= 0 or total_b <= 0:
        return None
    pa, pb = successes_a / total_a, successes_b / total_b
    pooled = (successes_a + successes_b) / (total_a + total_b)
    var = pooled * (1.0 - pooled) * (1.0 / total_a + 1.0 / total_b)
    if var <= 0.0:
        return None
    return (pb - pa) / math.sqrt(var)


@dataclass(frozen=True)
class CommandTriple:
    command: str
    control: dict
    experiment: dict
    control_fractions: dict
    experiment_fractions: dict
    missing: bool


@dataclass(frozen=True)
class ComparisonReport:
    window_since_ms: float
    window_until_ms: float
    control_group: str
    experiment_group: str
    control_requests: int
    experiment_requests: int
    control_stream_starts: int
    experiment_stream_starts: int
    control_normalized_sps: Optional[float]
    experiment_normalized_sps: Optional[float]
    sps_ratio: Optional[float]  # experiment / control, normalized
    sps_difference: Optional[float]  # difference of stream-start proportions
    sps_z: Optional[float]
    commands: tuple[CommandTriple, ...]
    missing_commands: tuple[str, ...]

    def experiment_fallback_failure_fraction(self) -> float:
        """Worst per-request failed-fallback fraction across tracked commands."""
        worst = 0.0
        for triple in self.commands:
            worst = max(worst, triple.experiment_fractions.get("fallback_failure", 0.0))
        return worst

    def to_doc(self) -> dict:
        return {
            "window": {"since_ms": int(round(self.window_since_ms)),
                       "until_ms": int(round(self.window_until_ms))},
            "groups": {"control": self.control_group, "experiment": self.experiment_group},
            "requests": {"control": self.control_requests, "experiment": self.experiment_requests},
            "stream_starts": {
                "control": self.control_stream_starts,
                "experiment": self.experiment_stream_starts,
            },
            "normalized_sps": {
                "control": self.control_normalized_sps,
                "experiment": self.experiment_normalized_sps,
                "ratio": self.sps_ratio,
                "difference": self.sps_difference,
                "z": self.sps_z,
            },
            "commands": [
                {
                    "command": t.command,
                    "control": t.control,
                    "experiment": t.experiment,
                    "control_fractions": t.control_fractions,
                    "experiment_fractions": t.experiment_fractions,
                    "missing": t.missing,
                }
                for t in self.commands
            ],
            "missing_commands": list(self.missing_commands),
        }


def compare_groups(
    snapshot: dict,
    tracked_commands,
    control_group: str,
    experiment_group: str,
    since: float,
    until: float,
) -> ComparisonReport:
    """Per-command outcome triples and SPS comparison over one window.

    A tracked command absent from the snapshot is flagged and reported with
    zero counts; the report is still produced.
    """
    ctrl_req = _group_requests(snapshot, control_group, since, until)
    exp_req = _group_requests(snapshot, experiment_group, since, until)
    ctrl_sps = _stream_starts(snapshot, control_group, since, until)
    exp_sps = _stream_starts(snapshot, experiment_group, since, until)

    ctrl_norm = ctrl_sps / ctrl_req if ctrl_req > 0 else None
    exp_norm = exp_sps / exp_req if exp_req > 0 else None
    ratio = exp_norm / ctrl_norm if (ctrl_norm not in (None, 0.0) and exp_norm is not None) else None
    difference = exp_norm - ctrl_norm if (ctrl_norm is not None and exp_norm is not None) else None

    triples, missing = [], []
    for command in tracked_commands:
        counts = {}
        seen = False
        for group in (control_group, experiment_group):
            per = {}
            for outcome in OUTCOME_TRIPLE:
                n = _window_total(snapshot, group, command, outcome, since, until)
                if n is not None:
                    seen = True
                per[outcome] = n or 0
            counts[group] = per
        if not seen:
            missing.append(command)
        ctrl_counts = counts[control_group]
        exp_counts = counts[experiment_group]
        triples.append(CommandTriple(
            command=command,
            control=ctrl_counts,
            experiment=exp_counts,
            control_fractions={
                o: (ctrl_counts[o] / ctrl_req if ctrl_req > 0 else 0.0) for o in OUTCOME_TRIPLE
            },
            experiment_fractions={
                o: (exp_counts[o] / exp_req if exp_req > 0 else 0.0) for o in OUTCOME_TRIPLE
            },
            missing=not seen,
        ))

    return ComparisonReport(
        window_since_ms=since,
        window_until_ms=until,
        control_group=control_group,
        experiment_group=experiment_group,
        control_requests=ctrl_req,
        experiment_requests=exp_req,
        control_stream_starts=ctrl_sps,
        experiment_stream_starts=exp_sps,
        control_normalized_sps=ctrl_norm,
        experiment_normalized_sps=exp_norm,
        sps_ratio=ratio,
        sps_difference=difference,
        sps_z=two_proportion_z(ctrl_sps, ctrl_req, exp_sps, exp_req),
        commands=tuple(triples),
        missing_commands=tuple(missing),
    )


@dataclass(frozen=True)
class Verdict:
    result: str  # resilient | not_resilient | inconclusive
    reasons: tuple[dict, ...]

    def __post_init__(self):
        if self.result == "not_resilient" and not self.reasons:
            raise ValueError("not_resilient verdict requires at least one reason")

    def to_doc(self) -> dict:
        return {"result": self.result, "reasons": list(self.reasons)}


def verdict(report: ComparisonReport, policy) -> Verdict:
    """resilient iff SPS holds up, failed fallbacks stay under threshold, and
    both groups met the sample floor; inconclusive exactly when the sample
    floor is unmet.
    """
    samples = min(report.control_requests, report.experiment_requests)
    if samples < policy.min_samples:
        return Verdict("inconclusive", (
            {
                "code": "insufficient_samples",
                "measured": samples,
                "threshold": policy.min_samples,
                "message": f"smallest group has {samples} requests, "
                           f"need {policy.min_samples}",
            },
        ))

    reasons = []
    floor = 1.0 - policy.sps_drop_threshold
    if report.sps_ratio is None or report.sps_ratio < floor:
        reasons.append({
            "code": "sps_drop",
            "measured": report.sps_ratio,
            "threshold": floor,
            "message": f"normalized SPS ratio {report.sps_ratio} below {floor:.4f}",
        })
    worst = report.experiment_fallback_failure_fraction()
    if worst > policy.fallback_failure_threshold:
        reasons.append({
            "code": "fallback_failure",
            "measured": worst,
            "threshold": policy.fallback_failure_threshold,
            "message": f"experiment failed-fallback fraction {worst:.4f} above "
                       f"{policy.fallback_failure_threshold:.4f}",
        })
    if reasons:
        return Verdict("not_resilient", tuple(reasons))
    return Verdict("resilient", ())
