"""Full-participation two-phase VRF shared coin.

Every process broadcasts its VRF value for the round (FIRST), waits for
``n - f`` FIRST messages, broadcasts the smallest value it has seen
(SECOND), waits for ``n - f`` SECOND messages and outputs the low bit of the
smallest value it holds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .crypto_sim import KeyHandle, PublicRegistry, VrfOutput
from .messages import NO_CANDIDATE, Candidate, First, InstanceId, Second, Send
from .params import Parameters


class Phase(enum.Enum):
    INIT = "init"
    FIRST_SENT = "first_sent"
    SECOND_SENT = "second_sent"
    DONE = "done"


class ProtocolError(RuntimeError):
    """A state machine was driven in a way its protocol forbids."""


@dataclass
class NodeContext:
    """What a correct process knows: its id, the constants, its keys and the PKI."""

    pid: int
    params: Parameters
    keys: KeyHandle
    pki: PublicRegistry
    audit: dict = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.audit[reason] = self.audit.get(reason, 0) + 1


@dataclass
class CoinState:
    r: int
    v: Candidate = NO_CANDIDATE
    first_set: set = field(default_factory=set)
    second_set: set = field(default_factory=set)
    phase: Phase = Phase.INIT
    output: Optional[int] = None


class CoinBase:
    """Bookkeeping shared by both coin variants.

    ``v`` keeps shrinking after the output is fixed and FIRST messages keep
    being counted, so a process that returned early still sends its SECOND.
    """

    def __init__(self, ctx: NodeContext, instance: InstanceId, threshold: int):
        self.ctx = ctx
        self.instance = instance
        self.state = CoinState(r=instance.round)
        self.threshold = threshold
        self.coin_input = instance.coin_input()
        # candidate -> (VRF output, owner's FIRST membership proof) for forwarding
        self.evidence: dict[Candidate, tuple] = {}
        self.second_sent = False
        self.first_seen_at_second: Optional[frozenset] = None
        self.second_candidate: Optional[Candidate] = None
        # largest candidate processed when SECOND was triggered (used by equivocating wrappers)
        self.second_max: Optional[Candidate] = None
        self._max_known: Optional[Candidate] = None
        self.returned_candidate: Optional[Candidate] = None

    @property
    def done(self) -> bool:
        return self.state.phase is Phase.DONE

    @property
    def output(self) -> Optional[int]:
        return self.state.output

    @property
    def started(self) -> bool:
        return self.state.phase is not Phase.INIT

    def _update(self, cand: Candidate, vrf: VrfOutput, owner_proof=None) -> None:
        self.evidence.setdefault(cand, (vrf, owner_proof))
        if self._max_known is None or cand > self._max_known:
            self._max_known = cand
        if cand < self.state.v:
            self.state.v = cand

    def _count_first(self, msg: First) -> list:
        st = self.state
        if msg.sender in st.first_set:
            return []
        self._update(msg.candidate, msg.vrf, msg.proof)
        st.first_set.add(msg.sender)
        if len(st.first_set) == self.threshold and not self.second_sent:
            self.second_sent = True
            self.first_seen_at_second = frozenset(st.first_set)
            self.second_candidate = st.v
            self.second_max = self._max_known
            if st.phase is Phase.FIRST_SENT:
                st.phase = Phase.SECOND_SENT
            return [Send(self.make_second(st.v))]
        return []

    def _count_second(self, msg: Second) -> Optional[int]:
        st = self.state
        if msg.sender in st.second_set:
            return None
        self._update(msg.candidate, msg.vrf, msg.owner_proof)
        st.second_set.add(msg.sender)
        if len(st.second_set) == self.threshold and st.output is None:
            st.phase = Phase.DONE
            self.returned_candidate = st.v
            st.output = self._finish()
            return st.output
        return None

    def _finish(self) -> Optional[int]:
        return self.state.v.lsb

    def make_second(self, cand: Candidate) -> Second:
        raise NotImplementedError

    def handle(self, msg) -> list:
        if isinstance(msg, First):
            return self.on_first(msg)
        if isinstance(msg, Second):
            self.on_second(msg)
            return []
        self.ctx.reject("coin.unexpected")
        return []


class SharedCoin(CoinBase):
    """One process's machine for one full-participation coin instance."""

    def __init__(self, ctx: NodeContext, instance: InstanceId):
        super().__init__(ctx, instance, ctx.params.n - ctx.params.f)

    def start(self) -> list:
        st = self.state
        if st.phase is not Phase.INIT:
            raise ProtocolError("coin instance started twice")
        vrf = self.ctx.keys.vrf_eval(self.coin_input)
        self._update(Candidate(vrf.value, self.ctx.pid), vrf)
        st.phase = Phase.FIRST_SENT
        return [Send(First(self.instance, self.ctx.pid, vrf))]

    def on_first(self, msg: First) -> list:
        if not self.ctx.pki.vrf_verify(msg.sender, self.coin_input, msg.vrf):
            self.ctx.reject("first.bad_vrf")
            return []
        return self._count_first(msg)

    def on_second(self, msg: Second) -> Optional[int]:
        if not self.ctx.pki.vrf_verify(msg.owner, self.coin_input, msg.vrf):
            self.ctx.reject("second.bad_vrf")
            return None
        return self._count_second(msg)

    def make_second(self, cand: Candidate) -> Second:
        return Second(self.instance, self.ctx.pid, cand.owner, self.evidence[cand][0])


# Operation-style aliases.
def coin_start(machine: SharedCoin) -> list:
    return machine.start()


def coin_on_first(machine: SharedCoin, msg: First) -> list:
    return machine.on_first(msg)


def coin_on_second(machine: SharedCoin, msg: Second) -> Optional[int]:
    return machine.on_second(msg)
