"""Vectorised trial engine for the built-in timed adversaries.

With a timed adversary every message's arrival key is a function of its
send event, so a whole trial can be computed threshold by threshold instead
of event by event.  Each process handles its messages in arrival-key order;
messages for an instance it has not started yet are handled, in the same
order, at the start event.  A quorum is therefore reached at
``max(k-th arrival key, start key)``.

The engine reproduces the event engine's :class:`TrialLog` exactly, with
one documented exception: for ``min_value_suppressor`` the corruption budget
is spent round by round rather than in global event order, which can only
matter once the budget is exhausted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..crypto_sim import Registry
from ..messages import APPROVER_VALUES, BOT, STAGE_A1, STAGE_A2, STAGE_COIN, InstanceId, kind_of, message_slot
from ..params import Parameters
from .adversaries import AdversarySpec, flip, make_plan
from .delays import KEY_SHIFT, NEVER, message_rank, pack_keys
from .network import STANDALONE_INSTANCE
from .report import COIN_FAULT, COIN_NONE, OWNER_NONE, ApproverLog, CoinLog, TrialLog

DEFAULT_MAX_ROUNDS = 500

HONEST, SILENT, EQUIVOCATE = 0, 1, 2


def kth_smallest(arr: np.ndarray, k: int) -> np.ndarray:
    """Column-wise ``k``-th smallest key (1-based); ``NEVER`` if a column has fewer."""
    n = arr.shape[1]
    if arr.shape[0] < k:
        return np.full(n, NEVER, dtype=np.int64)
    return np.partition(arr, k - 1, axis=0)[k - 1]


def at_or_after(keys: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Event at which a quorum reached at ``keys`` is handled, given start keys."""
    out = np.maximum(keys, start)
    out[(keys == NEVER) | (start == NEVER)] = NEVER
    return out


def lex_le(a_key, a_pid, b_key, b_pid):
    return (a_key < b_key) | ((a_key == b_key) & (a_pid <= b_pid))


@dataclass
class Broadcasts:
    """Every send of the trial: sender, send key, per-receiver arrival keys and cost."""

    n: int
    senders: list = field(default_factory=list)
    keys: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    costs: list = field(default_factory=list)

    def add(self, sender: int, key: int, row: np.ndarray, cost: int) -> None:
        self.senders.append(int(sender))
        self.keys.append(int(key))
        self.rows.append(row)
        self.costs.append(int(cost))


@dataclass
class CoinPhase:
    inst: InstanceId
    committee: bool
    started: np.ndarray
    rows: np.ndarray
    table: np.ndarray
    ret: np.ndarray
    value: np.ndarray
    fval: np.ndarray
    fown: np.ndarray


@dataclass
class ApproverPhase:
    inst: InstanceId
    inputs: np.ndarray
    ret: np.ndarray
    masks: np.ndarray
    ok_sets: np.ndarray


class BatchTrial:
    def __init__(self, protocol: str, params: Parameters, spec: AdversarySpec, seed: int, inputs,
                 registry: Registry, max_rounds: int = DEFAULT_MAX_ROUNDS):
        self.protocol = protocol
        self.params = params
        self.spec = spec
        self.seed = seed
        self.inputs = inputs
        self.registry = registry
        self.max_rounds = max_rounds
        self.plan = make_plan(spec, params, seed)
        n = params.n
        self.n = n
        self.evens = (np.arange(n) % 2) == 0
        self.behavior = np.full(n, HONEST, dtype=np.int8)
        if self.plan.initial_corrupt:
            idx = list(self.plan.initial_corrupt)
            self.behavior[idx] = SILENT if self.plan.behavior == "silent" else EQUIVOCATE
        # suppressor corruptions: pid -> (delivery key, receiver, cause instance)
        self.corrupt_at: dict = {}
        self.small_seen: dict = {}
        self.bc = Broadcasts(n)
        self.coin_phases: list = []
        self.approver_phases: list = []
        self.exhausted = False

    # -- adversary bookkeeping ----------------------------------------

    def allowed(self, j: int, inst: InstanceId, start_key: int, send_key: int) -> bool:
        """Whether process ``j`` really sends a message of ``inst`` at ``send_key``."""
        b = self.behavior[j]
        if b == SILENT:
            return False
        hit = self.corrupt_at.get(j)
        if hit is None:
            return True
        dk, dr, cause = hit
        if not (start_key, j) <= (dk, dr):
            return False
        if inst == cause:
            return (send_key, j) <= (dk, dr)
        return True

    def correct_at(self, j: int, key: int) -> bool:
        if self.behavior[j] != HONEST:
            return False
        hit = self.corrupt_at.get(j)
        return hit is None or (key, j) <= (hit[0], hit[1])

    def correct_mask(self) -> np.ndarray:
        mask = self.behavior == HONEST
        mask[list(self.corrupt_at)] = False
        return mask

    def arrivals(self, slot: int, rank: int, senders: np.ndarray, keys: np.ndarray, extra=None) -> np.ndarray:
        senders = np.asarray(senders, dtype=np.int64)
        if len(senders) == 0:
            return np.empty((0, self.n), dtype=np.int64)
        times = np.asarray(keys, dtype=np.int64) >> np.int64(KEY_SHIFT)
        delay = self.plan.base_delays(slot, senders)
        if extra is not None:
            delay = delay + np.asarray(extra, dtype=np.int64)[:, None]
        return pack_keys(times[:, None] + delay, senders[:, None], rank)

    def _suppress(self, inst: InstanceId, senders: np.ndarray, values: np.ndarray, arr: np.ndarray) -> None:
        small = []
        for i, j in enumerate(senders):
            if int(values[i]) >= self.plan.tau:
                continue
            q = int(np.argmin(arr[i]))
            d = (int(arr[i, q]), q)
            self.small_seen[(int(j), inst)] = d
            small.append((d, int(j)))
        for d, j in sorted(small):
            if j in self.corrupt_at or len(self.corrupt_at) >= self.params.f:
                continue
            self.corrupt_at[j] = (d[0], d[1], inst)

    # -- coin ---------------------------------------------------------

    def coin(self, inst: InstanceId, S: np.ndarray, committee: bool) -> np.ndarray:
        """Run one coin instance; returns the per-process return keys."""
        n, p = self.n, self.params
        r = inst.round
        kf, ks = kind_of(STAGE_COIN, "FIRST"), kind_of(STAGE_COIN, "SECOND")
        slot_f, slot_s = message_slot(r, kf), message_slot(r, ks)
        rank_f, rank_s = message_rank(r, kf), message_rank(r, ks)
        if committee:
            fm = self.registry.sample_all(inst.committee_string("FIRST"), p.lam)
            sm = self.registry.sample_all(inst.committee_string("SECOND"), p.lam)
            k, cost = p.W, 3
        else:
            fm = sm = np.ones(n, dtype=bool)
            k, cost = p.n - p.f, 2
        vals = self.registry.vrf_values_all(inst.coin_input())
        started = S != NEVER

        F = np.array([j for j in np.flatnonzero(started & fm) if self.allowed(j, inst, S[j], S[j])], dtype=np.int64)
        A1 = self.arrivals(slot_f, rank_f, F, S[F])
        for i, j in enumerate(F):
            self.bc.add(j, S[j], A1[i], cost)
        fvals = vals[F]
        if self.plan.suppress:
            self._suppress(inst, F, fvals, A1)

        counts = sm & started
        K2 = kth_smallest(A1, k)
        K2[~counts] = NEVER
        E2 = at_or_after(K2, S)
        own = started & fm

        # candidates as ranks in the (value, owner) order; none = n (low) or -1 (high)
        by_rank = np.lexsort((np.arange(n), vals))
        rank = np.empty(n, dtype=np.int64)
        rank[by_rank] = np.arange(n)
        rf = rank[F][:, None]
        counted = A1 <= K2[None, :]
        lo0 = np.minimum(np.where(counted, rf, n).min(axis=0, initial=n), np.where(own, rank, n))
        hi0 = np.maximum(np.where(counted, rf, -1).max(axis=0, initial=-1), np.where(own, rank, -1))

        Q = np.array([j for j in np.flatnonzero(counts & (E2 != NEVER)) if self.allowed(j, inst, S[j], E2[j])],
                     dtype=np.int64)
        extra = np.zeros(len(Q), dtype=np.int64)
        if self.plan.suppress:
            for i, q in enumerate(Q):
                seen = self.small_seen.get((int(q), inst))
                if seen is not None and seen <= (int(E2[q]), int(q)):
                    extra[i] = self.plan.penalty
        SA = self.arrivals(slot_s, rank_s, Q, E2[Q], extra)
        for i, q in enumerate(Q):
            self.bc.add(q, E2[q], SA[i], cost)
        # a sender's value only depends on SECONDs that reached it earlier, so
        # iterating from the FIRST-only values converges to the exact values
        split = (self.behavior[Q] == EQUIVOCATE)[:, None] & ~self.evens[None, :]
        before = SA < K2[None, :]
        lo, hi = lo0, hi0
        for _ in range(len(Q) + 1):
            SR = np.where(split, hi[Q][:, None], lo[Q][:, None])
            new_lo = np.minimum(lo0, np.where(before, SR, n).min(axis=0, initial=n))
            new_hi = np.maximum(hi0, np.where(before, SR, -1).max(axis=0, initial=-1))
            if np.array_equal(new_lo, lo) and np.array_equal(new_hi, hi):
                break
            lo, hi = new_lo, new_hi
        SR = np.where(split, hi[Q][:, None], lo[Q][:, None])

        K3 = kth_smallest(SA, k)
        R = at_or_after(K3, S)
        ret = R != NEVER
        best = np.minimum(np.where(own, rank, n),
                          np.where((A1 < K3[None, :]) & counts[None, :], rf, n).min(axis=0, initial=n))
        best = np.minimum(best, np.where(SA <= K3[None, :], SR, n).min(axis=0, initial=n))
        present = best < n
        owner = np.where(present, by_rank[np.minimum(best, n - 1)], OWNER_NONE)
        fval = np.where(present, vals[np.maximum(owner, 0)], np.uint64(0)).astype(np.uint64)
        value = np.full(n, COIN_NONE, dtype=np.int64)
        value[ret & present] = (fval[ret & present] & np.uint64(1)).astype(np.int64)
        value[ret & ~present] = COIN_FAULT
        rows = np.sort(Q)
        tab = np.zeros((len(rows), n), dtype=bool)
        tab[:, F] = counted[:, rows].T
        self.coin_phases.append(CoinPhase(inst, committee, started, rows, tab, R, value, fval, owner))
        return R

    # -- approver -----------------------------------------------------

    def approver(self, inst: InstanceId, S: np.ndarray, inputs: np.ndarray) -> tuple:
        """Run one approver instance; returns ``(return keys, result masks)``."""
        n, p = self.n, self.params
        W, B, lam, r, stage = p.W, p.B, p.lam, inst.round, inst.stage
        started = S != NEVER
        im = self.registry.sample_all(inst.committee_string("INIT"), lam)
        om = self.registry.sample_all(inst.committee_string("OK"), lam)
        em = {v: self.registry.sample_all(inst.committee_string("ECHO", v), lam) for v in APPROVER_VALUES}
        equiv = self.behavior == EQUIVOCATE

        ki = kind_of(stage, "INIT")
        senders = np.array([j for j in np.flatnonzero(started & im) if self.allowed(j, inst, S[j], S[j])],
                           dtype=np.int64)
        AI = self.arrivals(message_slot(r, ki), message_rank(r, ki), senders, S[senders])
        VI = np.empty_like(AI)
        for i, j in enumerate(senders):
            x = int(inputs[j])
            VI[i] = np.where(self.evens, x, flip(x)) if equiv[j] else x
            self.bc.add(j, S[j], AI[i], 3)

        kok = np.full((len(APPROVER_VALUES), n), NEVER, dtype=np.int64)
        for v in APPROVER_VALUES:
            ke = kind_of(stage, "ECHO", v)
            Kv = kth_smallest(np.where(VI == v, AI, NEVER), B + 1)
            E = at_or_after(Kv, S)
            E[equiv] = S[equiv]
            echoers = [j for j in np.flatnonzero(em[v] & (E != NEVER)) if self.allowed(j, inst, S[j], E[j])]
            echoers = np.array(echoers, dtype=np.int64)
            AE = self.arrivals(message_slot(r, ke), message_rank(r, ke), echoers, E[echoers])
            for i, j in enumerate(echoers):
                self.bc.add(j, E[j], AE[i], 4)
            kok[v] = kth_smallest(AE, W)

        ko = kind_of(stage, "OK")
        slot_o, rank_o = message_slot(r, ko), message_rank(r, ko)
        order = np.argsort(kok, axis=0, kind="stable")
        first, second = order[0], order[1]
        cols = np.arange(n)
        E_ok = at_or_after(kok[first, cols], S)
        E_w = at_or_after(kok[second, cols], S)
        ok_ids, ok_rows, ok_vals = [], [], []
        for j in np.flatnonzero(om & (E_ok != NEVER)):
            if not self.allowed(j, inst, S[j], E_ok[j]):
                continue
            row = self.arrivals(slot_o, rank_o, [j], [E_ok[j]])[0]
            vals = np.full(n, first[j], dtype=np.int64)
            if equiv[j]:
                row = np.where(self.evens, row, NEVER)
                self.bc.add(j, E_ok[j], row, W + 3)
                if E_w[j] != NEVER:
                    row_w = np.where(self.evens, NEVER, self.arrivals(slot_o, rank_o, [j], [E_w[j]])[0])
                    self.bc.add(j, E_w[j], row_w, W + 3)
                    row = np.where(self.evens, row, row_w)
                    vals = np.where(self.evens, first[j], second[j])
            else:
                self.bc.add(j, E_ok[j], row, W + 3)
            ok_ids.append(j)
            ok_rows.append(row)
            ok_vals.append(vals)
        AO = np.array(ok_rows, dtype=np.int64).reshape(len(ok_rows), n)
        VO = np.array(ok_vals, dtype=np.int64).reshape(len(ok_rows), n)
        Kr = kth_smallest(AO, W)
        R = at_or_after(Kr, S)
        counted = (AO <= Kr[None, :]) & (R != NEVER)[None, :]
        masks = np.zeros(n, dtype=np.int8)
        for v in APPROVER_VALUES:
            masks |= np.where((counted & (VO == v)).any(axis=0), 1 << v, 0).astype(np.int8)
        ok_sets = np.zeros((n, n), dtype=bool)
        ok_sets[:, np.array(ok_ids, dtype=np.int64)] = counted.T
        inp = np.where(started, inputs, -1).astype(np.int8)
        self.approver_phases.append(ApproverPhase(inst, inp, R, masks, ok_sets))
        return R, masks

    # -- protocols ----------------------------------------------------

    def run(self) -> None:
        S = np.where(self.behavior == SILENT, NEVER, 0).astype(np.int64)
        if self.protocol == "shared_coin":
            self.finish = self.coin(STANDALONE_INSTANCE["shared_coin"], S, committee=False)
        elif self.protocol == "whp_coin":
            self.finish = self.coin(STANDALONE_INSTANCE["whp_coin"], S, committee=True)
        elif self.protocol == "approver":
            self.finish, _ = self.approver(STANDALONE_INSTANCE["approver"], S, np.asarray(self.inputs))
        else:
            self.agreement(S)

    def agreement(self, S: np.ndarray) -> None:
        n = self.n
        est = np.asarray(self.inputs, dtype=np.int64).copy()
        self.decisions = np.full(n, -1, dtype=np.int8)
        self.decision_rounds = np.full(n, -1, dtype=np.int64)
        self.finish = np.full(n, NEVER, dtype=np.int64)
        self.violations: list = []
        self.faults: list = []
        r = 0
        while (S != NEVER).any():
            if r >= self.max_rounds:
                self.exhausted = True
                break
            R1, vals = self.approver(InstanceId(0, r, STAGE_A1), S, est)
            propose = np.full(n, BOT, dtype=np.int64)
            for q in np.flatnonzero(R1 != NEVER):
                m = int(vals[q])
                if m in (1, 2, 4):
                    propose[q] = m.bit_length() - 1
                    if m == 4:
                        self._note(q, self.faults, f"r{r}: first approve returned {{bot}}")
            Rc = self.coin(InstanceId(0, r, STAGE_COIN), R1, committee=True)
            coin = self.coin_phases[-1].value
            R2, props = self.approver(InstanceId(0, r, STAGE_A2), Rc, propose)
            nxt = np.full(n, NEVER, dtype=np.int64)
            for q in np.flatnonzero(R2 != NEVER):
                m = int(props[q])
                c = int(coin[q]) if coin[q] >= 0 else None
                non_bot = [v for v in (0, 1) if m >> v & 1]
                if len(non_bot) > 1:
                    members = sorted(v for v in APPROVER_VALUES if m >> v & 1)
                    self._note(q, self.violations, f"r{r}: second approve returned {members}")
                    if c is not None:
                        est[q] = c
                elif non_bot and m == 1 << non_bot[0]:
                    est[q] = non_bot[0]
                    if self.decisions[q] < 0:
                        self.decisions[q] = non_bot[0]
                        self.decision_rounds[q] = r
                        self.finish[q] = R2[q]
                elif non_bot:
                    est[q] = non_bot[0]
                elif c is not None:
                    est[q] = c
                else:
                    self._note(q, self.faults, f"r{r}: coin produced no value")
                if not (self.decision_rounds[q] >= 0 and r >= self.decision_rounds[q] + 1):
                    nxt[q] = R2[q]
            S = nxt
            r += 1

    def _note(self, q: int, sink: list, text: str) -> None:
        sink.append((int(q), text))

    # -- outputs ------------------------------------------------------

    def metrics(self, correct: np.ndarray) -> tuple[int, int, int]:
        bc = self.bc
        if not bc.rows:
            return 0, 0, 0
        fin = self.finish[correct]
        if correct.any() and np.all(fin != NEVER):
            pids = np.flatnonzero(correct)
            last = max(zip(fin.tolist(), pids.tolist()))
        else:
            last = (int(NEVER), self.n)
        keys = np.array(bc.keys, dtype=np.int64)
        senders = np.array(bc.senders, dtype=np.int64)
        order = np.lexsort((senders, keys))
        keys, senders = keys[order], senders[order]
        arr = np.stack(bc.rows)[order]
        costs = np.array(bc.costs, dtype=np.int64)[order]
        depth = np.zeros(len(keys), dtype=np.int64)
        for b in range(len(keys)):
            if b:
                hit = arr[:b, senders[b]] <= keys[b]
                depth[b] = 1 + (depth[:b][hit].max() if hit.any() else 0)
            else:
                depth[b] = 1
        receivers = (arr != NEVER).sum(axis=1)
        sent = lex_le(keys, senders, last[0], last[1])
        ok = np.array([self.correct_at(j, k) for j, k in zip(senders.tolist(), keys.tolist())], dtype=bool)
        words = int((costs * receivers)[sent & ok].sum())
        messages = int(receivers[sent & ok].sum())
        pid = np.arange(self.n)[None, :]
        delivered = (arr != NEVER) & lex_le(arr, pid, last[0], last[1])
        duration = int(depth[delivered.any(axis=1)].max()) if delivered.any() else 0
        return words, messages, duration

    def log(self) -> TrialLog:
        n = self.n
        correct = self.correct_mask()
        if self.protocol == "agreement":
            done = self.decisions >= 0
        else:
            done = self.finish != NEVER
        log = TrialLog(self.protocol, self.params, self.seed, self.spec.name, correct, done,
                       inputs=None if self.inputs is None else np.asarray(self.inputs, dtype=np.int8))
        for ph in self.coin_phases:
            started = ph.started & correct
            if not started.any():
                continue
            keep = correct[ph.rows] if len(ph.rows) else np.zeros(0, dtype=bool)
            value = np.where(started, ph.value, COIN_NONE)
            log.coin_logs.append(CoinLog(ph.inst, ph.committee, started, ph.rows[keep], ph.table[keep], value,
                                         np.where(started, ph.fval, 0).astype(np.uint64),
                                         np.where(started, ph.fown, OWNER_NONE)))
        for ph in self.approver_phases:
            started = (ph.inputs >= 0) & correct
            if not started.any():
                continue
            inputs = np.where(started, ph.inputs, -1).astype(np.int8)
            returned = started & (ph.ret != NEVER)
            results = np.where(returned, ph.masks, 0).astype(np.int8)
            rows = np.flatnonzero(returned)
            log.approver_logs.append(ApproverLog(ph.inst, inputs, results, rows, ph.ok_sets[rows]))
        log.coin_logs.sort(key=lambda c: c.instance)
        log.approver_logs.sort(key=lambda a: a.instance)
        if self.protocol == "agreement":
            log.decisions = np.where(correct, self.decisions, -1).astype(np.int8)
            log.decision_rounds = np.where(correct, self.decision_rounds, -1)
            log.violations = [t for q, t in self.violations if correct[q]]
            log.faults = [t for q, t in self.faults if correct[q]]
        log.words, log.messages, log.duration = self.metrics(correct)
        log.budget_exhausted = self.exhausted
        return log


def batch_log(protocol: str, params: Parameters, spec: AdversarySpec, seed: int, inputs, registry: Registry,
              max_rounds: int = DEFAULT_MAX_ROUNDS) -> TrialLog:
    trial = BatchTrial(protocol, params, spec, seed, inputs, registry, max_rounds)
    trial.run()
    return trial.log()
