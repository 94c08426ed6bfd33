"""Built-in delayed-adaptive adversaries.

Every built-in adversary is *timed*: when a message is sent it is assigned
an integer delay computed from metadata only (sender, receiver, message
type) plus, for the suppressor, contents of already-delivered messages in
the sender's causal past.  The adversary then always delivers the in-flight
message with the smallest arrival key.  The same plan drives the
vectorised engine, which is why the plan is separate from the event-loop
adapter.

``uniform_random``
    Exponential delays with mean one unit.  Since the exponential law is
    memoryless this is the same as repeatedly delivering a uniformly chosen
    in-flight message.
``fifo``
    Every delay is exactly one unit; ties resolve by sender id, so the run is
    lock-step and each channel is FIFO.
``targeted_delay``
    Exponential delays, plus a fixed penalty on every message to or from a
    seed-chosen victim set of size ``f``.
``crash_f``
    ``f`` seed-chosen processes are corrupted before the start and never send.
``equivocator``
    ``f`` seed-chosen processes are corrupted before the start.  They follow
    the honest timing but send conflicting values to even and odd receivers.
``min_value_suppressor``
    Watches delivered FIRST messages.  The first time a small value (below
    twice the expected minimum) from a still-correct sender is delivered, it
    corrupts that sender while budget lasts.  SECOND messages from a process
    whose small FIRST value it has already seen are delayed by the penalty.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from ..approver import Approver
from ..crypto_sim import MASK64, VALUE_DOMAIN, mix64
from ..messages import APPROVER_VALUES, BOT, Echo, Init, InstanceId, Ok, Second, Send, echo_payload
from ..params import Parameters
from .delays import KEY_SHIFT, TICKS, delay_hash, delay_hash_matrix, exponential_delay, exponential_delays, pack_key

ADVERSARIES = ("uniform_random", "fifo", "targeted_delay", "crash_f", "equivocator", "min_value_suppressor")

DEFAULT_PENALTY_UNITS = 100
_DELAY_SALT = 0x5DE1A7
_SUBSET_SALT = 0xB1A5


class AdversaryError(RuntimeError):
    """The adversary asked for something the model forbids."""


class Deliver(NamedTuple):
    msg_id: int


class Corrupt(NamedTuple):
    pid: int
    cause: Optional[InstanceId] = None


@dataclass(frozen=True)
class AdversarySpec:
    name: str
    penalty_units: int = DEFAULT_PENALTY_UNITS

    def __post_init__(self):
        if self.name not in ADVERSARIES:
            raise ValueError(f"unknown adversary {self.name!r}; choose from {', '.join(ADVERSARIES)}")

    def as_dict(self) -> dict:
        return {"name": self.name, "penalty_units": self.penalty_units}


def seeded_subset(seed: int, n: int, k: int, salt: int = _SUBSET_SALT) -> np.ndarray:
    """Sorted ``k``-subset of ``range(n)`` chosen from ``seed``."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & MASK64, salt])))
    return np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)


def flip(v: int) -> int:
    return 0 if v == BOT else 1 - v


@dataclass
class TimedPlan:
    """Everything a timed adversary decides up front for one trial."""

    spec: AdversarySpec
    n: int
    f: int
    seed: int
    delay_seed: int
    constant: bool
    victims: np.ndarray
    initial_corrupt: tuple
    behavior: Optional[str]
    suppress: bool
    tau: int
    penalty: int
    victim_list: list = field(default_factory=list)

    def base_delay(self, slot: int, sender: int, receiver: int) -> int:
        if self.constant:
            d = TICKS
        else:
            d = exponential_delay(delay_hash(self.delay_seed, slot, sender, receiver))
        if self.victim_list and (self.victim_list[sender] or self.victim_list[receiver]):
            d += self.penalty
        return d

    def base_delays(self, slot: int, senders: np.ndarray) -> np.ndarray:
        """Delay matrix ``len(senders) x n`` for one message type."""
        senders = np.asarray(senders, dtype=np.int64)
        if self.constant:
            d = np.full((len(senders), self.n), TICKS, dtype=np.int64)
        else:
            d = exponential_delays(delay_hash_matrix(self.delay_seed, slot, senders, np.arange(self.n)))
        if self.victim_list:
            hit = self.victims[senders][:, None] | self.victims[None, :]
            d = d + hit * np.int64(self.penalty)
        return d


def make_plan(spec: AdversarySpec, params: Parameters, seed: int) -> TimedPlan:
    n, f = params.n, params.f
    name = spec.name
    victims = np.zeros(n, dtype=bool)
    initial: tuple = ()
    behavior = None
    if name == "targeted_delay" and f > 0:
        victims[seeded_subset(seed, n, f)] = True
    if name in ("crash_f", "equivocator") and f > 0:
        initial = tuple(int(p) for p in seeded_subset(seed, n, f))
        behavior = "silent" if name == "crash_f" else "equivocate"
    # small means below twice the expected minimum of the FIRST values
    tau = min(VALUE_DOMAIN, int(2 * VALUE_DOMAIN / params.lam))
    return TimedPlan(
        spec=spec, n=n, f=f, seed=seed,
        delay_seed=mix64((seed ^ _DELAY_SALT) & MASK64),
        constant=(name == "fifo"),
        victims=victims,
        initial_corrupt=initial,
        behavior=behavior,
        suppress=(name == "min_value_suppressor"),
        tau=tau,
        penalty=spec.penalty_units * TICKS,
        victim_list=[bool(x) for x in victims] if victims.any() else [],
    )


class TimedAdversary:
    """Event-loop adapter: turns a :class:`TimedPlan` into deliver/corrupt actions."""

    def __init__(self, plan: TimedPlan):
        self.plan = plan
        self.name = plan.spec.name
        self.heap: list = []
        self.now = 0
        self.first_seen: set = set()
        self.small_seen: set = set()
        self.queued: deque = deque()

    def setup(self, view) -> list:
        return [Corrupt(p) for p in self.plan.initial_corrupt]

    def next_action(self, view):
        last = view.take_last_delivered()
        if last is not None and self.plan.suppress:
            self._observe(view, *last)
        for meta in view.drain_new():
            self._schedule(meta)
        if self.queued:
            return self.queued.popleft()
        if not self.heap:
            return None
        key, _receiver, msg_id = heapq.heappop(self.heap)
        self.now = key >> KEY_SHIFT
        return Deliver(msg_id)

    def _schedule(self, meta) -> None:
        delay = self.plan.base_delay(meta.slot, meta.sender, meta.receiver)
        if self.plan.suppress and meta.tag == "SECOND" and (meta.sender, meta.instance) in self.small_seen:
            delay += self.plan.penalty
        key = pack_key(self.now + delay, meta.sender, meta.rank)
        heapq.heappush(self.heap, (key, meta.receiver, meta.msg_id))

    def _observe(self, view, meta, payload) -> None:
        if meta.tag != "FIRST":
            return
        ident = (meta.sender, meta.instance)
        if ident in self.first_seen:
            return
        self.first_seen.add(ident)
        if payload.vrf.value >= self.plan.tau:
            return
        self.small_seen.add(ident)
        pending = {c.pid for c in self.queued}
        if meta.sender in view.corrupted or meta.sender in pending:
            return
        if view.budget_remaining - len(self.queued) > 0:
            self.queued.append(Corrupt(meta.sender, meta.instance))

    def behavior(self, pid: int, node, keys, cause: Optional[InstanceId]):
        return make_behavior(self.plan.behavior or ("suppressed" if self.plan.suppress else "silent"),
                             pid, node, keys, self.plan.n, cause)


# -- Byzantine behaviours -----------------------------------------------


class SilentNode:
    """Never sends anything and does not run its protocol."""

    def __init__(self, inner):
        self.inner = inner

    def start(self) -> list:
        return []

    def handle(self, msg) -> list:
        return []


class SuppressedNode:
    """Keeps running honestly but stays quiet in the instance where it was
    corrupted and in every instance it starts afterwards."""

    def __init__(self, inner, cause: Optional[InstanceId]):
        self.inner = inner
        self.allowed = set(inner.machines()) - {cause}

    def start(self) -> list:
        return self._filter(self.inner.start())

    def handle(self, msg) -> list:
        return self._filter(self.inner.handle(msg))

    def _filter(self, sends: list) -> list:
        return [s for s in sends if s.message.instance in self.allowed]


class EquivocatorNode:
    """Runs the honest machine and splits its output by receiver parity."""

    def __init__(self, inner, keys, n: int):
        self.inner = inner
        self.keys = keys
        self.pid = keys.process_id
        self.evens = tuple(range(0, n, 2))
        self.odds = tuple(range(1, n, 2))
        self.echoed: set = set()
        self.second_ok: set = set()

    def start(self) -> list:
        return self._transform(self.inner.start())

    def handle(self, msg) -> list:
        return self._transform(self.inner.handle(msg))

    def _transform(self, sends: list) -> list:
        out = []
        machines = self.inner.machines()
        for s in sends:
            m = s.message
            if isinstance(m, Init):
                out.append(Send(m, self.evens))
                out.append(Send(replace(m, value=flip(m.value)), self.odds))
            elif isinstance(m, Echo):
                continue
            elif isinstance(m, Ok):
                out.append(Send(m, self.evens))
            elif isinstance(m, Second):
                coin = machines[m.instance]
                out.append(Send(m, self.evens))
                out.append(Send(coin.make_second(coin.second_max), self.odds))
            else:
                out.append(s)
        for inst, mach in machines.items():
            if not isinstance(mach, Approver) or not mach.started:
                continue
            if inst not in self.echoed:
                self.echoed.add(inst)
                for v in APPROVER_VALUES:
                    if mach.echo_proofs[v].member:
                        sig = self.keys.sign(echo_payload(inst, v))
                        out.append(Send(Echo(inst, self.pid, v, mach.echo_proofs[v], sig)))
            if mach.ok_value is not None and inst not in self.second_ok:
                w = next((x for x in mach.echo_quorums if x != mach.ok_value), None)
                if w is not None:
                    self.second_ok.add(inst)
                    out.append(Send(Ok(inst, self.pid, w, mach.ok_proof, mach.endorsements(w)), self.odds))
        return out


def make_behavior(kind: str, pid: int, node, keys, n: int, cause: Optional[InstanceId] = None):
    if kind == "silent":
        return SilentNode(node)
    if kind == "equivocate":
        return EquivocatorNode(node, keys, n)
    if kind == "suppressed":
        return SuppressedNode(node, cause)
    raise ValueError(f"unknown behaviour {kind!r}")
