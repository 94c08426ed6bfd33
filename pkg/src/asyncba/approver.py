"""Committee-based approver (graded broadcast over {0, 1, bot}).

INIT members broadcast their input.  A value heard from ``B + 1`` INIT
members is echoed by the members of that value's ECHO committee.  The first
value with ``W`` echoes is endorsed by OK members, whose OK carries the
``W`` signed echoes as proof.  A process returns the set of values in the
first ``W`` valid OK messages it receives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .messages import APPROVER_VALUES, BOT, Echo, Endorsement, Init, InstanceId, Ok, Send, echo_payload
from .shared_coin import NodeContext, ProtocolError


@dataclass(frozen=True)
class OkProof:
    value: int
    endorsements: tuple


@dataclass
class ApproverState:
    v: Optional[int] = None
    init_counts: dict = field(default_factory=lambda: {v: set() for v in APPROVER_VALUES})
    echo_counts: dict = field(default_factory=lambda: {v: {} for v in APPROVER_VALUES})
    ok_values: dict = field(default_factory=dict)
    ok_sent: bool = False
    result: Optional[frozenset] = None


class Approver:
    def __init__(self, ctx: NodeContext, instance: InstanceId):
        self.ctx = ctx
        self.instance = instance
        self.state = ApproverState()
        p = ctx.params
        self.W, self.B, self.lam = p.W, p.B, p.lam
        self.init_string = instance.committee_string("INIT")
        self.ok_string = instance.committee_string("OK")
        self.echo_strings = {v: instance.committee_string("ECHO", v) for v in APPROVER_VALUES}
        self.init_proof = ctx.keys.sample(self.init_string, self.lam)
        self.ok_proof = ctx.keys.sample(self.ok_string, self.lam)
        self.echo_proofs = {v: ctx.keys.sample(s, self.lam) for v, s in self.echo_strings.items()}
        self.started = False
        self.echoed: list[int] = []
        self.ok_value: Optional[int] = None
        # values in the order they first collected W echoes
        self.echo_quorums: list[int] = []
        # senders whose OK was counted towards the return, in arrival order
        self.ok_order: list[int] = []

    @property
    def result(self) -> Optional[frozenset]:
        return self.state.result

    @property
    def done(self) -> bool:
        return self.state.result is not None

    def start(self, v: int) -> list:
        if self.started:
            raise ProtocolError("approver instance started twice")
        if v not in APPROVER_VALUES:
            raise ValueError(f"approver input must be 0, 1 or bot, got {v!r}")
        self.started = True
        self.state.v = v
        if not self.init_proof.member:
            return []
        return [Send(Init(self.instance, self.ctx.pid, v, self.init_proof))]

    def on_init(self, msg: Init) -> list:
        st = self.state
        if msg.value not in APPROVER_VALUES or \
                not self.ctx.pki.committee_val(self.init_string, self.lam, msg.sender, msg.proof):
            self.ctx.reject("init.invalid")
            return []
        senders = st.init_counts[msg.value]
        if msg.sender in senders:
            return []
        senders.add(msg.sender)
        v = msg.value
        if len(senders) == self.B + 1 and self.echo_proofs[v].member and v not in self.echoed:
            return [Send(self.make_echo(v))]
        return []

    def make_echo(self, v: int) -> Echo:
        self.echoed.append(v)
        sig = self.ctx.keys.sign(echo_payload(self.instance, v))
        return Echo(self.instance, self.ctx.pid, v, self.echo_proofs[v], sig)

    def _valid_endorsement(self, value: int, e: Endorsement) -> bool:
        pki = self.ctx.pki
        return e.signature.signer == e.signer and \
            pki.committee_val(self.echo_strings[value], self.lam, e.signer, e.proof) and \
            pki.verify_sig(e.signature, echo_payload(self.instance, value))

    def on_echo(self, msg: Echo) -> list:
        st = self.state
        if msg.value not in APPROVER_VALUES or not self._valid_endorsement(msg.value, msg.endorsement()):
            self.ctx.reject("echo.invalid")
            return []
        store = st.echo_counts[msg.value]
        if msg.sender in store:
            return []
        store[msg.sender] = msg.endorsement()
        if len(store) == self.W:
            self.echo_quorums.append(msg.value)
            if self.ok_proof.member and not st.ok_sent:
                return [Send(self.make_ok(msg.value))]
        return []

    def endorsements(self, v: int) -> tuple:
        """The earliest ``W`` stored echoes for ``v``."""
        return tuple(list(self.state.echo_counts[v].values())[: self.W])

    def make_ok(self, v: int) -> Ok:
        self.state.ok_sent = True
        self.ok_value = v
        return Ok(self.instance, self.ctx.pid, v, self.ok_proof, self.endorsements(v))

    def valid_ok(self, msg: Ok) -> bool:
        if msg.value not in APPROVER_VALUES or len(msg.endorsements) != self.W:
            return False
        if not self.ctx.pki.committee_val(self.ok_string, self.lam, msg.sender, msg.proof):
            return False
        signers = {e.signer for e in msg.endorsements}
        if len(signers) != self.W:
            return False
        return all(self._valid_endorsement(msg.value, e) for e in msg.endorsements)

    def on_ok(self, msg: Ok) -> Optional[frozenset]:
        st = self.state
        if msg.sender in st.ok_values:
            return None
        if not self.valid_ok(msg):
            self.ctx.reject("ok.invalid")
            return None
        st.ok_values[msg.sender] = msg.value
        if st.result is None:
            self.ok_order.append(msg.sender)
            if len(self.ok_order) == self.W:
                st.result = frozenset(st.ok_values[s] for s in self.ok_order)
                return st.result
        return None

    def handle(self, msg) -> list:
        if isinstance(msg, Init):
            return self.on_init(msg)
        if isinstance(msg, Echo):
            return self.on_echo(msg)
        if isinstance(msg, Ok):
            self.on_ok(msg)
            return []
        self.ctx.reject("approver.unexpected")
        return []


def canonical(values) -> tuple:
    """Values in the fixed order 0 < 1 < bot."""
    return tuple(sorted(values, key=lambda v: (v == BOT, v)))


def approve_start(machine: Approver, v: int) -> list:
    return machine.start(v)


def approve_on_init(machine: Approver, msg: Init) -> list:
    return machine.on_init(msg)


def approve_on_echo(machine: Approver, msg: Echo) -> list:
    return machine.on_echo(msg)


def approve_on_ok(machine: Approver, msg: Ok) -> Optional[frozenset]:
    return machine.on_ok(msg)
