"""Monte-Carlo campaigns: run many seeded trials and aggregate them.

Trial ``i`` of a campaign uses seed ``base_seed + i``.  Aggregates are
computed from the per-trial rows only, so they do not depend on the order
the trials ran in.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Optional

import numpy as np

from ..params import coin_success_bound, failure_bounds, whp_coin_success_bound
from ..simnet.report import S_PROPERTIES, TrialReport
from ..simnet.trace import TraceWriter, replay
from ..simnet.trial import run_trial
from .config import ConfigError, ExperimentConfig, trial_inputs

CONFIDENCE = 0.99
DECISION_ROUND_LIMIT = 40

CSV_FIELDS = (
    "seed", "protocol", "n", "f", "adversary", "words", "messages", "duration",
    "s_failure", "s3_failure", "safety_violation", "liveness_violation",
    "coin_unanimous", "coin_all_returned", "coin_count_ok", "coin_propagated",
    "approver_validity", "approver_graded", "approver_termination",
    "decided", "decision", "max_round", "unanimous_input", "digest",
)


def wilson_interval(successes: int, trials: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion; ``(0, 1)`` with no trials."""
    if trials == 0:
        return 0.0, 1.0
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def frequency(successes: int, trials: int) -> dict:
    lo, hi = wilson_interval(successes, trials)
    return {"count": int(successes), "trials": int(trials),
            "rate": successes / trials if trials else None, "ci_low": lo, "ci_high": hi}


def bound_check(successes: int, trials: int, bound: float) -> dict:
    """One-sided test ``rate >= bound - 3 sigma`` with sigma from Binomial(trials, bound)."""
    sigma = math.sqrt(bound * (1 - bound) / trials) if trials else 0.0
    rate = successes / trials if trials else None
    return {"bound": bound, "sigma": sigma, "rate": rate,
            "ok": None if rate is None else rate >= bound - 3 * sigma}


def _summary(values) -> dict:
    if not len(values):
        return {"mean": None, "p50": None, "p90": None, "p99": None, "max": None}
    a = np.asarray(values, dtype=float)
    p50, p90, p99 = np.percentile(a, [50, 90, 99])
    return {"mean": float(a.mean()), "p50": float(p50), "p90": float(p90), "p99": float(p99), "max": float(a.max())}


def _opt(x):
    return "" if x is None else x


def trial_row(report: TrialReport) -> dict:
    """One CSV row; blank cells mean the check does not apply to this protocol."""
    row = {
        "seed": report.seed, "protocol": report.protocol, "n": report.n, "f": report.f,
        "adversary": report.adversary, "words": report.words, "messages": report.messages,
        "duration": report.duration, "s_failure": report.s_failure, "s3_failure": report.s3_failure,
        "safety_violation": report.safety_violation, "liveness_violation": report.liveness_violation,
        "digest": report.digest,
    }
    if report.protocol in ("shared_coin", "whp_coin"):
        c = report.coin_checks[0]
        row.update(coin_unanimous=_opt(c["unanimous"]), coin_all_returned=c["all_returned"],
                   coin_count_ok=_opt(c["count_ok"]), coin_propagated=_opt(c["propagated"]))
    if report.protocol == "approver":
        a = report.approver_checks[0]
        row.update(approver_validity=_opt(a["validity"]), approver_graded=a["graded_agreement"],
                   approver_termination=_opt(a["termination"]))
    if report.protocol == "agreement":
        g = report.agreement_checks
        decisions = {o for o, ok in zip(report.outputs, report.correct) if ok and o >= 0}
        row.update(decided=g["all_decided"], decision=decisions.pop() if len(decisions) == 1 else "",
                   max_round=g["max_decision_round"], unanimous_input=_opt(g["unanimous_input"]))
    return {k: row.get(k, "") for k in CSV_FIELDS}


@dataclass
class CampaignReport:
    config: dict
    params: dict
    trials: int
    aggregates: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    @property
    def unexplained_safety(self) -> int:
        """Safety violations in trials that logged no S-property failure."""
        return sum(1 for v in self.violations if not v["s_failure"])

    @property
    def exit_code(self) -> int:
        return 1 if self.unexplained_safety else 0

    def to_json(self) -> str:
        body = {"config": self.config, "params": self.params, "trials": self.trials,
                "aggregates": self.aggregates, "violations": self.violations}
        return json.dumps(body, sort_keys=True, indent=2) + "\n"

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / "trials.csv", out / "campaign.json"
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(self.rows[0]) if self.rows else list(CSV_FIELDS),
                               lineterminator="\n")
            w.writeheader()
            w.writerows(self.rows)
        json_path.write_text(self.to_json(), encoding="utf-8")
        return csv_path, json_path


def _committee_rates(reports: list, params) -> dict:
    """Per-committee S1..S4 failure rates against the analytic tails."""
    if params.full_participation:
        return {}
    bounds = failure_bounds(params)
    total = sum(len(r.committees) for r in reports)
    out = {}
    for prop in S_PROPERTIES[:4]:
        fails = sum(1 for r in reports for c in r.committees if not c[prop])
        rate = fails / total if total else None
        b = bounds[prop]
        sigma = math.sqrt(b * (1 - b) / total) if total else 0.0
        out[prop] = {"failures": fails, "committees": total, "rate": rate, "analytic_bound": b,
                     "ok": None if rate is None else rate <= b + 3 * sigma}
    return out


def aggregate(config: ExperimentConfig, params, reports: list) -> dict:
    proto = config.protocol
    agg: dict = {
        "words": _summary([r.words for r in reports]),
        "messages": _summary([r.messages for r in reports]),
        "duration": _summary([r.duration for r in reports]),
        "s_failure_trials": sum(r.s_failure for r in reports),
        "committee_failure_rates": _committee_rates(reports, params),
        "liveness_violations": sum(r.liveness_violation for r in reports),
    }
    t = len(reports)
    if proto in ("shared_coin", "whp_coin"):
        checks = [r.coin_checks[0] for r in reports]
        bound = (coin_success_bound(params.epsilon) if proto == "shared_coin"
                 else whp_coin_success_bound(params.d))
        for b in (0, 1):
            k = sum(c["unanimous"] == b for c in checks)
            agg[f"unanimous_{b}"] = frequency(k, t)
            agg[f"unanimous_{b}_bound"] = bound_check(k, t, bound)
        agg["all_returned"] = frequency(sum(c["all_returned"] for c in checks), t)
        agg["common_count_failures"] = sum(c["count_ok"] is False for c in checks)
        agg["common_count_checked"] = sum(c["count_ok"] is not None for c in checks)
        agg["propagation_failures"] = sum(c["propagated"] is False for c in checks)
    elif proto == "approver":
        clean = [r for r in reports if not r.s_failure]
        live = [r for r in reports if not r.s3_failure]
        a = [r.approver_checks[0] for r in clean]
        agg["validity_violations"] = sum(c["validity"] is False for c in a)
        agg["graded_violations"] = sum(not c["graded_agreement"] for c in a)
        agg["termination"] = frequency(sum(r.approver_checks[0]["termination"] is True for r in live), len(live))
    elif proto == "agreement":
        clean = [r for r in reports if not r.s_failure]
        g = [r.agreement_checks for r in clean]
        agg["agreement_violations"] = sum(not c["agreement"] for c in g)
        agg["validity_violations"] = sum(c["validity"] is False for c in g)
        within = sum(r.agreement_checks["all_decided"]
                     and r.agreement_checks["max_decision_round"] < DECISION_ROUND_LIMIT for r in reports)
        agg[f"decided_within_{DECISION_ROUND_LIMIT}_rounds"] = frequency(within, t)
        unanimous = [c for c in g if c["unanimous_input"] is not None]
        agg["unanimous_round0"] = frequency(sum(c["decided_round0"] for c in unanimous), len(unanimous))
        rounds = [r.agreement_checks["max_decision_round"] for r in reports if r.agreement_checks["all_decided"]]
        agg["rounds_to_decide"] = _summary([x + 1 for x in rounds])
    return agg


def campaign_report(config: ExperimentConfig, params, reports: list) -> CampaignReport:
    """Aggregate finished trial reports; order-independent given the seeds."""
    reports = sorted(reports, key=lambda r: r.seed)
    violations = [{"seed": r.seed, "s_failure": r.s_failure, "notes": r.notes}
                  for r in reports if r.safety_violation]
    return CampaignReport(config.to_dict(), params.as_dict(), len(reports),
                          aggregate(config, params, reports) if reports else {}, violations,
                          [trial_row(r) for r in reports])


def run_campaign(config: ExperimentConfig, progress=None) -> CampaignReport:
    """Run every trial of ``config``; configuration errors surface before any trial runs."""
    params = config.validate()
    if config.protocol == "sampling_only":
        from .sampling import sampling_campaign

        return sampling_campaign(config, params)
    spec = config.adversary_spec()
    reports = []
    trace_dir = None if config.trace_dir is None else Path(config.trace_dir)
    if trace_dir is not None:
        trace_dir.mkdir(parents=True, exist_ok=True)
    for i in range(config.trials):
        seed = config.base_seed + i
        inputs = trial_inputs(config, params.n, seed)
        trace = None if trace_dir is None else TraceWriter(trace_path(trace_dir, seed))
        try:
            reports.append(run_trial(config.protocol, params, spec, seed, inputs, engine=config.engine,
                                     trace=trace))
        finally:
            if trace is not None:
                trace.close()
        if progress is not None:
            progress(i + 1, config.trials)
    report = campaign_report(config, params, reports)
    if config.out is not None:
        report.write(config.out)
    return report


def trace_path(trace_dir, seed: int) -> Path:
    return Path(trace_dir) / f"trial-{seed}.jsonl"


def replay_campaign(config: ExperimentConfig) -> CampaignReport:
    """Rebuild a traced campaign from its trace files alone."""
    params = config.validate()
    if config.trace_dir is None:
        raise ConfigError("replaying a campaign needs its trace_dir")
    reports = []
    for i in range(config.trials):
        rep, recorded = replay(trace_path(config.trace_dir, config.base_seed + i))
        if rep.digest != recorded:
            raise ValueError(f"trial {config.base_seed + i} does not replay to its recorded digest")
        reports.append(rep)
    return campaign_report(config, params, reports)


def load_rows(path) -> list:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
