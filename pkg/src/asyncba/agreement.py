"""Binary Byzantine Agreement round loop built on the approver and the committee coin.

Round ``r``: approve the estimate; propose the approved value if it is
unique (else bot); toss the coin; approve the proposal; adopt or decide.
A process that decided in round ``d`` still runs round ``d + 1`` so that
laggards have helpers, then stops starting rounds.  It keeps answering in
instances it has already started.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Optional

from .approver import Approver
from .messages import BINARY, BOT, STAGE_A1, STAGE_A2, STAGE_COIN, InstanceId
from .shared_coin import NodeContext, ProtocolError
from .whp_coin import WhpCoin


class Agreement:
    def __init__(self, ctx: NodeContext, ba: int = 0):
        self.ctx = ctx
        self.ba = ba
        self.est: Optional[int] = None
        self.propose: Optional[int] = None
        self.decision: Optional[int] = None
        self.decision_round: Optional[int] = None
        self.r = -1
        self.stage: Optional[str] = None
        self.halted = False
        self.instances: dict[InstanceId, object] = {}
        self.pending: dict[InstanceId, list] = defaultdict(list)
        self.coins: dict[int, Optional[int]] = {}
        self.approver_inputs: dict[InstanceId, int] = {}
        # safety-relevant events (conflicting approved values)
        self.violations: list[str] = []
        # anomalies that only arise when committee sampling misbehaves
        self.faults: list[str] = []

    # -- accessors ----------------------------------------------------

    @property
    def round(self) -> int:
        return self.r

    @property
    def done(self) -> bool:
        return self.decision is not None

    @property
    def output(self) -> Optional[int]:
        return self.decision

    def instance(self, r: int, stage: str) -> InstanceId:
        return InstanceId(self.ba, r, stage)

    # -- driving ------------------------------------------------------

    def start(self, v: int) -> list:
        if self.r >= 0:
            raise ProtocolError("agreement started twice")
        if v not in BINARY:
            raise ValueError(f"agreement input must be 0 or 1, got {v!r}")
        self.est = v
        out = self._begin_round(0)
        return out + self._advance()

    def handle(self, msg) -> list:
        inst = msg.instance
        if inst.ba != self.ba:
            self.ctx.reject("ba.foreign_instance")
            return []
        machine = self.instances.get(inst)
        if machine is None:
            self.pending[inst].append(msg)
            return []
        return machine.handle(msg) + self._advance()

    def _open(self, inst: InstanceId, machine, *args) -> list:
        self.instances[inst] = machine
        out = machine.start(*args)
        for msg in self.pending.pop(inst, ()):
            out += machine.handle(msg)
        return out

    def _begin_round(self, r: int) -> list:
        self.r = r
        self.stage = STAGE_A1
        inst = self.instance(r, STAGE_A1)
        self.approver_inputs[inst] = self.est
        return self._open(inst, Approver(self.ctx, inst), self.est)

    def _advance(self) -> list:
        out: list = []
        while not self.halted:
            machine = self.instances[self.instance(self.r, self.stage)]
            if not machine.done:
                break
            if self.stage == STAGE_A1:
                self.on_first_approve(machine.result)
                self.stage = STAGE_COIN
                inst = self.instance(self.r, STAGE_COIN)
                out += self._open(inst, WhpCoin(self.ctx, inst))
            elif self.stage == STAGE_COIN:
                self.on_coin(machine.output)
                self.stage = STAGE_A2
                inst = self.instance(self.r, STAGE_A2)
                self.approver_inputs[inst] = self.propose
                out += self._open(inst, Approver(self.ctx, inst), self.propose)
            else:
                self.on_second_approve(machine.result)
                if self.decision_round is not None and self.r >= self.decision_round + 1:
                    self.halted = True
                else:
                    out += self._begin_round(self.r + 1)
        return out

    # -- round logic --------------------------------------------------

    def on_first_approve(self, vals) -> None:
        if not vals:
            raise ProtocolError("approver returned an empty set")
        if len(vals) == 1:
            (v,) = vals
            if v == BOT:
                # unreachable while the INIT committee has at most B Byzantine members
                self.faults.append(f"r{self.r}: first approve returned {{bot}}")
            self.propose = v
        else:
            self.propose = BOT

    def on_coin(self, c: Optional[int]) -> None:
        self.coins[self.r] = c

    def on_second_approve(self, props) -> None:
        if not props:
            raise ProtocolError("approver returned an empty set")
        c = self.coins.get(self.r)
        non_bot = sorted(v for v in props if v != BOT)
        if len(non_bot) > 1:
            self.violations.append(f"r{self.r}: second approve returned {sorted(props)}")
            if c is not None:
                self.est = c
        elif non_bot and len(props) == 1:
            v = non_bot[0]
            self.est = v
            if self.decision is None:
                self.decision = v
                self.decision_round = self.r
        elif non_bot:
            self.est = non_bot[0]
        elif c is not None:
            self.est = c
        else:
            self.faults.append(f"r{self.r}: coin produced no value")


def ba_start(machine: Agreement, v: int) -> list:
    return machine.start(v)


def ba_decision(machine: Agreement) -> Optional[int]:
    return machine.decision


def ba_round(machine: Agreement) -> int:
    return machine.round
