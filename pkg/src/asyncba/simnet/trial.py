"""Single-trial entry point and log extraction for the event engine."""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..crypto_sim import Registry
from ..messages import values_mask
from ..params import Parameters
from .adversaries import AdversarySpec, TimedAdversary, make_plan
from .network import PROTOCOLS, Network, RunResult
from .report import COIN_FAULT, COIN_NONE, OWNER_NONE, ApproverLog, CoinLog, TrialLog, TrialReport, build_report

ENGINES = ("event", "batch")


def check_inputs(protocol: str, params: Parameters, inputs) -> Optional[np.ndarray]:
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {', '.join(PROTOCOLS)}")
    if protocol in ("shared_coin", "whp_coin"):
        return None
    if inputs is None or len(inputs) != params.n:
        raise ValueError(f"{protocol} needs one input per process")
    arr = np.asarray(inputs, dtype=np.int8)
    allowed = (0, 1, 2) if protocol == "approver" else (0, 1)
    if not np.isin(arr, allowed).all():
        raise ValueError(f"{protocol} inputs must lie in {allowed}")
    return arr


def _coin_log(inst, machines: list, correct: np.ndarray, n: int, committee: bool) -> CoinLog:
    started = np.zeros(n, dtype=bool)
    values = np.full(n, COIN_NONE, dtype=np.int64)
    final_value = np.zeros(n, dtype=np.uint64)
    final_owner = np.full(n, OWNER_NONE, dtype=np.int64)
    rows, table = [], []
    for p in np.flatnonzero(correct):
        m = machines[p]
        if m is None:
            continue
        started[p] = True
        if m.second_sent:
            rows.append(p)
            row = np.zeros(n, dtype=bool)
            row[list(m.first_seen_at_second)] = True
            table.append(row)
        if m.done:
            values[p] = COIN_FAULT if m.output is None else m.output
            cand = m.returned_candidate
            if cand.owner >= 0:
                final_value[p] = cand.value
                final_owner[p] = cand.owner
    tab = np.array(table, dtype=bool).reshape(len(rows), n)
    return CoinLog(inst, committee, started, np.array(rows, dtype=np.int64), tab, values, final_value, final_owner)


def _approver_log(inst, machines: list, correct: np.ndarray, n: int) -> ApproverLog:
    inputs = np.full(n, -1, dtype=np.int8)
    results = np.zeros(n, dtype=np.int8)
    rows, table = [], []
    for p in np.flatnonzero(correct):
        m = machines[p]
        if m is None:
            continue
        inputs[p] = m.state.v
        if m.done:
            results[p] = values_mask(m.result)
            rows.append(p)
            row = np.zeros(n, dtype=bool)
            row[m.ok_order] = True
            table.append(row)
    tab = np.array(table, dtype=bool).reshape(len(rows), n)
    return ApproverLog(inst, inputs, results, np.array(rows, dtype=np.int64), tab)


def event_metrics(res: RunResult, correct: np.ndarray) -> tuple[int, int, int]:
    """``(words, messages, duration)`` up to the last correct completion."""
    finish = np.array(res.finish_event)[correct]
    t_last = int(finish.max()) if correct.any() and np.all(finish >= 0) else res.events
    words = messages = duration = 0
    for env in res.envelopes:
        if env.meta.sender_correct and env.sent_at <= t_last:
            words += env.meta.word_cost
            messages += 1
        if env.delivered_at is not None and env.delivered_at <= t_last and env.depth > duration:
            duration = env.depth
    return words, messages, duration


def event_log(res: RunResult, seed: int, adversary: str, inputs) -> TrialLog:
    params, protocol = res.params, res.protocol
    n = params.n
    correct = np.ones(n, dtype=bool)
    correct[list(res.corrupted)] = False
    done = np.array([p.done for p in res.processes], dtype=bool)
    instances = sorted({inst for p in np.flatnonzero(correct) for inst in res.processes[p].machines()})
    log = TrialLog(protocol, params, seed, adversary, correct, done,
                   inputs=None if inputs is None else np.asarray(inputs, dtype=np.int8))
    for inst in instances:
        machines = [res.processes[p].machines().get(inst) if correct[p] else None for p in range(n)]
        if inst.stage == "COIN":
            log.coin_logs.append(_coin_log(inst, machines, correct, n, protocol != "shared_coin"))
        else:
            log.approver_logs.append(_approver_log(inst, machines, correct, n))
    if protocol == "agreement":
        log.decisions = np.full(n, -1, dtype=np.int8)
        log.decision_rounds = np.full(n, -1, dtype=np.int64)
        for p in np.flatnonzero(correct):
            m = res.processes[p].machine
            if m.decision is not None:
                log.decisions[p] = m.decision
                log.decision_rounds[p] = m.decision_round
            log.violations += m.violations
            log.faults += m.faults
    log.words, log.messages, log.duration = event_metrics(res, correct)
    log.budget_exhausted = res.budget_exhausted
    log.replaceability_ok = res.replaceability_ok
    return log


def run_trial(protocol: str, params: Parameters, adversary, seed: int, inputs=None,
              engine: str = "event", event_budget: Optional[int] = None, trace=None) -> TrialReport:
    """Run one trial and return its report.

    ``adversary`` is an :class:`AdversarySpec` or a name.  The batch engine
    accepts only the built-in timed adversaries and no trace.
    """
    spec = adversary if isinstance(adversary, AdversarySpec) else AdversarySpec(adversary)
    arr = check_inputs(protocol, params, inputs)
    registry = Registry(params.n, seed)
    if engine == "batch":
        from .batch import batch_log

        if trace is not None:
            raise ValueError("the batch engine does not write traces")
        return build_report(batch_log(protocol, params, spec, seed, arr, registry), registry)
    if engine != "event":
        raise ValueError(f"unknown engine {engine!r}")
    adv = TimedAdversary(make_plan(spec, params, seed))
    return run_event(protocol, params, spec.name, seed, arr, registry, adv, event_budget, trace)


def run_event(protocol, params, adversary_name, seed, inputs, registry, adv, event_budget=None,
              trace=None) -> TrialReport:
    net = Network(params, registry, protocol, None if inputs is None else [int(v) for v in inputs], adv,
                  event_budget=event_budget, trace=trace)
    if trace is not None:
        trace.header(protocol, params, seed, adv, inputs, net.event_budget)
    res = net.run()
    report = build_report(event_log(res, seed, adversary_name, inputs), registry)
    if trace is not None:
        trace.end(res.events, report.digest)
    return report
