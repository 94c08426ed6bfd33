"""Deterministic event-driven asynchronous network.

The adversary owns the schedule: at every step it either delivers one
in-flight envelope or corrupts one process.  It sees envelope metadata,
the payloads of delivered envelopes and everything about corrupted
processes, but never the payload of an in-flight envelope from a correct
sender.  Causality is tracked with vector clocks and with the causal depth
of every envelope (one more than the deepest envelope its sender had
received when sending it).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..agreement import Agreement
from ..approver import Approver
from ..crypto_sim import Registry
from ..messages import STAGE_A1, STAGE_COIN, InstanceId, message_kind, message_slot
from ..params import Parameters
from ..shared_coin import NodeContext, SharedCoin
from ..whp_coin import WhpCoin
from .adversaries import AdversaryError, Corrupt, Deliver
from .delays import MAX_PROCESSES, message_rank

PROTOCOLS = ("shared_coin", "whp_coin", "approver", "agreement")

STANDALONE_INSTANCE = {
    "shared_coin": InstanceId(0, 0, STAGE_COIN),
    "whp_coin": InstanceId(0, 0, STAGE_COIN),
    "approver": InstanceId(0, 0, STAGE_A1),
}


class ConfinementError(PermissionError):
    """The adversary tried to read something outside its view."""


class Process:
    """Uniform start/handle adapter around one protocol machine."""

    def __init__(self, protocol: str, ctx: NodeContext, value: Optional[int] = None):
        self.protocol = protocol
        self.value = value
        if protocol == "agreement":
            self.machine = Agreement(ctx)
        elif protocol == "approver":
            self.machine = Approver(ctx, STANDALONE_INSTANCE[protocol])
        elif protocol == "shared_coin":
            self.machine = SharedCoin(ctx, STANDALONE_INSTANCE[protocol])
        elif protocol == "whp_coin":
            self.machine = WhpCoin(ctx, STANDALONE_INSTANCE[protocol])
        else:
            raise ValueError(f"unknown protocol {protocol!r}")

    def start(self) -> list:
        if self.protocol in ("agreement", "approver"):
            return self.machine.start(self.value)
        return self.machine.start()

    def handle(self, msg) -> list:
        return self.machine.handle(msg)

    @property
    def done(self) -> bool:
        return self.machine.done

    def machines(self) -> dict:
        """Started protocol instances of this process by instance id."""
        m = self.machine
        if isinstance(m, Agreement):
            return m.instances
        return {m.instance: m} if m.started else {}


@dataclass(frozen=True)
class EnvelopeMeta:
    """What the adversary may know about any envelope."""

    msg_id: int
    sender: int
    receiver: int
    tag: str
    instance: InstanceId
    kind: int
    slot: int
    rank: int
    word_cost: int
    sender_correct: bool


@dataclass
class Envelope:
    meta: EnvelopeMeta
    payload: object
    clock: np.ndarray
    depth: int
    sent_at: int
    delivered_at: Optional[int] = None

    @property
    def status(self) -> str:
        return "in_flight" if self.delivered_at is None else "delivered"


class AdversaryView:
    """The adversary's window onto a running trial."""

    def __init__(self, net: "Network"):
        self._net = net
        self.n = net.params.n
        self.f = net.params.f
        self.params = net.params
        self.pki = net.registry.public
        self._new: list[EnvelopeMeta] = []
        self._last: Optional[tuple] = None

    @property
    def corrupted(self) -> frozenset:
        return frozenset(self._net.corrupted)

    @property
    def budget_remaining(self) -> int:
        return self.f - len(self._net.corrupted)

    def meta(self, msg_id: int) -> EnvelopeMeta:
        return self._net.envelopes[msg_id].meta

    def in_flight(self) -> list:
        return sorted(self._net.in_flight)

    def payload(self, msg_id: int):
        env = self._net.envelopes[msg_id]
        if env.delivered_at is None and env.meta.sender_correct:
            raise ConfinementError(f"envelope {msg_id} from a correct sender is still in flight")
        return env.payload

    def handle(self, pid: int):
        if pid not in self._net.corrupted:
            raise ConfinementError(f"process {pid} is not corrupted")
        return self._net.registry.handle(pid)

    def state(self, pid: int):
        if pid not in self._net.corrupted:
            raise ConfinementError(f"process {pid} is not corrupted")
        return self._net.processes[pid]

    def drain_new(self) -> list:
        new, self._new = self._new, []
        return new

    def take_last_delivered(self) -> Optional[tuple]:
        last, self._last = self._last, None
        return last


@dataclass
class RunResult:
    params: Parameters
    protocol: str
    processes: list
    envelopes: list
    corrupted: dict
    events: int
    budget_exhausted: bool
    finish_event: list = field(default_factory=list)
    replaceability_ok: bool = True


def default_event_budget(protocol: str, params: Parameters) -> int:
    """Ten times a generous estimate of the deliveries in a trial."""
    n, lam = params.n, min(params.lam, params.n)
    per_instance = {"shared_coin": 2 * n, "whp_coin": 2 * lam, "approver": 5 * lam}
    if protocol == "agreement":
        broadcasts = 12 * lam * 10
    else:
        broadcasts = per_instance[protocol]
    return int(10 * broadcasts * n) + 10


class Network:
    def __init__(self, params: Parameters, registry: Registry, protocol: str, inputs, adversary,
                 event_budget: Optional[int] = None, trace=None):
        if params.n > MAX_PROCESSES:
            raise ValueError(f"at most {MAX_PROCESSES} processes are supported")
        self.params = params
        self.registry = registry
        self.protocol = protocol
        self.adversary = adversary
        self.trace = trace
        n = params.n
        self.event_budget = default_event_budget(protocol, params) if event_budget is None else event_budget
        self.contexts = [NodeContext(p, params, registry.handle(p), registry.public) for p in range(n)]
        self.processes = [Process(protocol, self.contexts[p], None if inputs is None else inputs[p])
                          for p in range(n)]
        self.nodes = list(self.processes)
        self.corrupted: dict[int, int] = {}
        self.clocks = np.zeros((n, n), dtype=np.int64)
        self.depth = [0] * n
        self.envelopes: list[Envelope] = []
        self.in_flight: set[int] = set()
        self.event = 0
        self.finish_event = [-1] * n
        self.view = AdversaryView(self)
        self._roles: set = set()
        self.replaceability_ok = True

    # -- sending ------------------------------------------------------

    def _emit(self, pid: int, sends: list) -> None:
        n = self.params.n
        correct = pid not in self.corrupted
        for s in sends:
            msg = s.message
            inst = msg.instance
            kind = message_kind(msg)
            if correct:
                role = (pid, inst, kind)
                if role in self._roles:
                    self.replaceability_ok = False
                self._roles.add(role)
            self.clocks[pid, pid] += 1
            clock = self.clocks[pid].copy()
            clock.setflags(write=False)
            depth = self.depth[pid] + 1
            slot, rank = message_slot(inst.round, kind), message_rank(inst.round, kind)
            dests = range(n) if s.dests is None else s.dests
            for q in dests:
                mid = len(self.envelopes)
                meta = EnvelopeMeta(mid, pid, q, msg.tag, inst, kind, slot, rank, msg.words, correct)
                self.envelopes.append(Envelope(meta, msg, clock, depth, self.event))
                self.in_flight.add(mid)
                self.view._new.append(meta)
                if self.trace is not None:
                    self.trace.send(self.event, meta, clock)

    # -- actions ------------------------------------------------------

    def _corrupt(self, pid: int, cause=None) -> None:
        if pid in self.corrupted:
            raise AdversaryError(f"process {pid} is already corrupted")
        if len(self.corrupted) >= self.params.f:
            raise AdversaryError(f"corruption budget f={self.params.f} exhausted")
        if not 0 <= pid < self.params.n:
            raise AdversaryError(f"unknown process {pid}")
        self.corrupted[pid] = self.event
        self.nodes[pid] = self.adversary.behavior(pid, self.processes[pid], self.registry.handle(pid), cause)
        if self.trace is not None:
            self.trace.corrupt(self.event, pid, cause)

    def _deliver(self, msg_id: int) -> None:
        if msg_id not in self.in_flight:
            raise AdversaryError(f"envelope {msg_id} is not in flight")
        self.in_flight.discard(msg_id)
        env = self.envelopes[msg_id]
        env.delivered_at = self.event
        q = env.meta.receiver
        np.maximum(self.clocks[q], env.clock, out=self.clocks[q])
        self.clocks[q, q] += 1
        if env.depth > self.depth[q]:
            self.depth[q] = env.depth
        if self.trace is not None:
            self.trace.deliver(self.event, env.meta, self.clocks[q])
        was_done = self.processes[q].done
        self._emit(q, self.nodes[q].handle(env.payload))
        if not was_done and self.processes[q].done:
            self.finish_event[q] = self.event
        self.view._last = (env.meta, env.payload)

    def run(self) -> RunResult:
        for act in self.adversary.setup(self.view):
            self._corrupt(act.pid, act.cause)
        for p in range(self.params.n):
            self._emit(p, self.nodes[p].start())
            if self.processes[p].done:
                self.finish_event[p] = 0
        exhausted = False
        while True:
            if self.event >= self.event_budget:
                exhausted = bool(self.in_flight)
                break
            action = self.adversary.next_action(self.view)
            if action is None:
                break
            self.event += 1
            if isinstance(action, Deliver):
                self._deliver(action.msg_id)
            elif isinstance(action, Corrupt):
                self._corrupt(action.pid, action.cause)
            else:
                raise AdversaryError(f"unknown action {action!r}")
        return RunResult(self.params, self.protocol, self.processes, self.envelopes, dict(self.corrupted),
                         self.event, exhausted, self.finish_event, self.replaceability_ok)


def clock_digest(clock: np.ndarray) -> str:
    return hashlib.blake2b(np.ascontiguousarray(clock, dtype=np.int64).tobytes(), digest_size=8).hexdigest()
