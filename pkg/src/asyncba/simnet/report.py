"""Trial logs and the report builder shared by both simulation engines.

An engine reduces a finished trial to a :class:`TrialLog`: per-instance
coin and approver logs, final outcomes and the complexity metrics.  The
report is computed from the log alone, so two engines that agree on the log
agree on the report hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from ..crypto_sim import Registry
from ..messages import APPROVER_VALUES, STAGE_COIN, InstanceId, value_name
from ..params import Parameters, common_value_lower_bound

COIN_NONE = -1
COIN_FAULT = -2
OWNER_NONE = -1

S_PROPERTIES = ("S1", "S2", "S3", "S4", "S5", "S6")


@dataclass
class CoinLog:
    """One coin instance.

    ``rows`` lists the correct processes that sent SECOND (for the committee
    coin only SECOND members send), ``table[k, j]`` says whether ``rows[k]``
    had counted ``j``'s FIRST before sending.  ``values`` holds the returned
    bit, ``COIN_NONE`` or ``COIN_FAULT``; ``final_value`` / ``final_owner``
    the candidate held at return.
    """

    instance: InstanceId
    committee: bool
    started: np.ndarray
    rows: np.ndarray
    table: np.ndarray
    values: np.ndarray
    final_value: np.ndarray
    final_owner: np.ndarray


@dataclass
class ApproverLog:
    """One approver instance; ``inputs`` is -1 where the process never started
    and ``results`` holds value masks (0 = no return)."""

    instance: InstanceId
    inputs: np.ndarray
    results: np.ndarray
    ok_rows: np.ndarray
    ok_table: np.ndarray


@dataclass
class TrialLog:
    protocol: str
    params: Parameters
    seed: int
    adversary: str
    correct: np.ndarray
    done: np.ndarray
    inputs: Optional[np.ndarray] = None
    coin_logs: list = field(default_factory=list)
    approver_logs: list = field(default_factory=list)
    decisions: Optional[np.ndarray] = None
    decision_rounds: Optional[np.ndarray] = None
    violations: list = field(default_factory=list)
    faults: list = field(default_factory=list)
    words: int = 0
    messages: int = 0
    duration: int = 0
    budget_exhausted: bool = False
    replaceability_ok: bool = True


@dataclass
class TrialReport:
    protocol: str
    n: int
    f: int
    seed: int
    adversary: str
    correct: list
    outputs: list
    decision_rounds: list
    words: int
    messages: int
    duration: int
    committees: list
    s_failure: bool
    s3_failure: bool
    coin_checks: list
    approver_checks: list
    agreement_checks: dict
    replaceability_ok: bool
    safety_violation: bool
    liveness_violation: bool
    notes: list
    digest: str = ""

    def to_dict(self) -> dict:
        # every field is already JSON-shaped, so a shallow view suffices
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def canonical_json(self) -> str:
        body = self.to_dict()
        body.pop("digest")
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    def compute_digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @property
    def all_done(self) -> bool:
        return not self.liveness_violation


# -- committee statistics ------------------------------------------------


def committee_roles(inst: InstanceId, full_coin: bool = False) -> list:
    """``(role label, committee string)`` for every committee an instance samples."""
    if inst.stage == STAGE_COIN:
        if full_coin:
            return [("ALL", None)]
        return [("FIRST", inst.committee_string("FIRST")), ("SECOND", inst.committee_string("SECOND"))]
    roles = [("INIT", inst.committee_string("INIT"))]
    roles += [(f"ECHO.{value_name(v)}", inst.committee_string("ECHO", v)) for v in APPROVER_VALUES]
    roles.append(("OK", inst.committee_string("OK")))
    return roles


def s_flags(params: Parameters, size: int, correct: int, byzantine: int) -> dict:
    lam, d, W, B = params.lam, params.d, params.W, params.B
    return {
        "S1": size <= (1 + d) * lam,
        "S2": size >= (1 - d) * lam,
        "S3": correct >= W,
        "S4": byzantine <= B,
        "S5": 2 * W - size >= B + 1,
        "S6": B + 1 + W - size >= 1,
    }


def committee_stats(params: Parameters, registry: Registry, corrupt: np.ndarray, inst: InstanceId,
                    full_coin: bool = False) -> list:
    out = []
    for role, s in committee_roles(inst, full_coin):
        members = np.ones(params.n, dtype=bool) if s is None else registry.sample_all(s, params.lam)
        size = int(members.sum())
        byz = int((members & corrupt).sum())
        rec = {"instance": inst.label, "role": role, "size": size, "correct": size - byz, "byzantine": byz}
        rec.update(s_flags(params, size, size - byz, byz))
        out.append(rec)
    return out


# -- per-instance checks -------------------------------------------------


def _verdict(results) -> str:
    results = [r for r in results if r is not None]
    if any(r is False for r in results):
        return "fail"
    return "pass" if results else "n/a"


def coin_check(log: CoinLog, params: Parameters, registry: Registry, correct: np.ndarray,
               committees: dict) -> dict:
    n = params.n
    if log.committee:
        owners = registry.sample_all(log.instance.committee_string("FIRST"), params.lam)
        seconds = registry.sample_all(log.instance.committee_string("SECOND"), params.lam)
        threshold = params.B + 1
        bound = common_value_lower_bound(params, committee_mode=True)
        roles = committees
        complete = bool(np.all(np.isin(np.flatnonzero(seconds & correct), log.rows)))
        applicable = complete and all(roles[r][p] for r in ("FIRST", "SECOND") for p in ("S1", "S2", "S4"))
        propagate_ok = roles["SECOND"]["S3"] and roles["SECOND"]["S6"]
    else:
        owners = np.ones(n, dtype=bool)
        threshold = params.f + 1
        bound = common_value_lower_bound(params, committee_mode=False)
        complete = bool(np.all(np.isin(np.flatnonzero(correct), log.rows)))
        applicable = complete
        propagate_ok = True
    column_counts = log.table.sum(axis=0) if len(log.rows) else np.zeros(n, dtype=np.int64)
    common = column_counts >= threshold
    count = int(common.sum())
    vals = registry.vrf_values_all(log.instance.coin_input())
    vmin_owner = -1
    if owners.any():
        idx = np.flatnonzero(owners)
        vmin_owner = int(idx[np.argmin(vals[idx])])
    vmin_common = vmin_owner >= 0 and bool(common[vmin_owner])
    returned = correct & (log.values != COIN_NONE)
    holders = log.final_owner[returned]
    propagated = None
    if vmin_common and propagate_ok:
        propagated = bool(np.all(holders == vmin_owner))
    correct_vals = log.values[correct]
    unanimous = None
    if correct.any() and np.all(correct_vals == correct_vals[0]) and correct_vals[0] >= 0:
        unanimous = int(correct_vals[0])
    return {
        "instance": log.instance.label,
        "common_count": count,
        "common_bound": bound,
        "count_ok": (count >= bound) if applicable else None,
        "vmin_owner": vmin_owner,
        "vmin_common": vmin_common,
        "propagated": propagated,
        "all_returned": bool(np.all(log.values[correct] != COIN_NONE)),
        "faults": int(np.sum(log.values[correct] == COIN_FAULT)),
        "unanimous": unanimous,
    }


def approver_check(log: ApproverLog, params: Parameters, correct: np.ndarray) -> dict:
    started = correct & (log.inputs >= 0)
    inputs = sorted({int(v) for v in log.inputs[started]})
    returned = correct & (log.results > 0)
    res = log.results[returned]
    validity = None
    if len(inputs) == 1:
        validity = bool(np.all(res == (1 << inputs[0])))
    singles = sorted({int(m) for m in res if m in (1, 2, 4)})
    graded = len(singles) <= 1
    termination = bool(np.all(returned[correct])) if np.all(started[correct]) else None
    min_inter = None
    if len(log.ok_rows) >= 2:
        t = log.ok_table
        inter = (t & np.roll(t, -1, axis=0)).sum(axis=1)
        min_inter = int(inter.min())
    return {
        "instance": log.instance.label,
        "inputs": [value_name(v) for v in inputs],
        "assumption1": len(inputs) <= 2,
        "validity": validity,
        "graded_agreement": graded,
        "termination": termination,
        "size_ok": all(bin(int(m)).count("1") <= 2 for m in res),
        "ok_intersection_min": min_inter,
        "ok_intersection_ok": None if min_inter is None else min_inter >= params.B + 1,
    }


def agreement_check(log: TrialLog) -> dict:
    correct = log.correct
    dec = log.decisions[correct]
    rounds = log.decision_rounds[correct]
    decided = dec[dec >= 0]
    inputs = sorted({int(v) for v in log.inputs[correct]})
    agreement = len(set(decided.tolist())) <= 1
    validity = None
    if len(inputs) == 1:
        validity = bool(np.all(decided == inputs[0]))
    all_decided = bool(np.all(dec >= 0))
    return {
        "agreement": agreement,
        "validity": validity,
        "all_decided": all_decided,
        "unanimous_input": inputs[0] if len(inputs) == 1 else None,
        "decided_round0": bool(all_decided and np.all(rounds == 0)),
        "max_decision_round": int(rounds.max()) if all_decided and len(rounds) else -1,
    }


# -- report --------------------------------------------------------------


def _outputs(log: TrialLog) -> list:
    if log.protocol == "agreement":
        return [int(x) for x in log.decisions]
    if log.protocol == "approver":
        return [int(x) for x in log.approver_logs[0].results]
    return [int(x) for x in log.coin_logs[0].values]


def build_report(log: TrialLog, registry: Registry) -> TrialReport:
    params = log.params
    correct = np.asarray(log.correct, dtype=bool)
    corrupt = ~correct
    full_coin = log.protocol == "shared_coin"
    committees: list = []
    coin_checks: list = []
    approver_checks: list = []
    for clog in log.coin_logs:
        stats = committee_stats(params, registry, corrupt, clog.instance, full_coin)
        committees += stats
        coin_checks.append(coin_check(clog, params, registry, correct, {s["role"]: s for s in stats}))
    for alog in log.approver_logs:
        committees += committee_stats(params, registry, corrupt, alog.instance)
        approver_checks.append(approver_check(alog, params, correct))
    committees.sort(key=lambda c: (c["instance"], c["role"]))
    s_failure = any(not c[p] for c in committees for p in S_PROPERTIES)
    s3_failure = any(not c["S3"] for c in committees)

    agreement_checks: dict = {}
    safety = bool(log.violations)
    if log.protocol == "agreement":
        agreement_checks = agreement_check(log)
        safety |= not agreement_checks["agreement"] or agreement_checks["validity"] is False
    for a in approver_checks:
        safety |= a["validity"] is False or not a["graded_agreement"]
    liveness = log.budget_exhausted or not bool(np.all(log.done[correct]))

    notes = sorted(set(log.violations)) + sorted(set(log.faults))
    rounds = [] if log.decision_rounds is None else [int(x) for x in log.decision_rounds]
    report = TrialReport(
        protocol=log.protocol, n=params.n, f=params.f, seed=int(log.seed), adversary=log.adversary,
        correct=[bool(x) for x in correct],
        outputs=_outputs(log),
        decision_rounds=rounds,
        words=int(log.words), messages=int(log.messages), duration=int(log.duration),
        committees=committees, s_failure=s_failure, s3_failure=s3_failure,
        coin_checks=coin_checks, approver_checks=approver_checks, agreement_checks=agreement_checks,
        replaceability_ok=bool(log.replaceability_ok),
        safety_violation=bool(safety), liveness_violation=bool(liveness),
        notes=notes,
    )
    report.digest = report.compute_digest()
    return report


def summarize_approver(report: TrialReport) -> dict:
    """Collapse per-instance approver checks into one verdict per property."""
    checks = report.approver_checks
    return {
        key: _verdict([c[key] for c in checks])
        for key in ("assumption1", "validity", "graded_agreement", "termination", "size_ok", "ok_intersection_ok")
    }
