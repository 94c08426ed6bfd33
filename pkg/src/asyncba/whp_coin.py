"""Committee-based shared coin.

Only members of the FIRST committee draw a VRF value and only members of the
SECOND committee relay the minimum they saw; everyone listens and outputs.
Both waits are for ``W`` distinct, validly sampled senders.
"""

from __future__ import annotations

from typing import Optional

from .messages import Candidate, First, InstanceId, Second, Send
from .shared_coin import CoinBase, NodeContext, Phase, ProtocolError


class WhpCoin(CoinBase):
    def __init__(self, ctx: NodeContext, instance: InstanceId):
        super().__init__(ctx, instance, ctx.params.W)
        lam = ctx.params.lam
        self.first_string = instance.committee_string("FIRST")
        self.second_string = instance.committee_string("SECOND")
        self.first_proof = ctx.keys.sample(self.first_string, lam)
        self.second_proof = ctx.keys.sample(self.second_string, lam)
        self.fault = False

    @property
    def in_first(self) -> bool:
        return self.first_proof.member

    @property
    def in_second(self) -> bool:
        return self.second_proof.member

    def start(self) -> list:
        st = self.state
        if st.phase is not Phase.INIT:
            raise ProtocolError("coin instance started twice")
        st.phase = Phase.FIRST_SENT
        if not self.in_first:
            return []
        vrf = self.ctx.keys.vrf_eval(self.coin_input)
        self._update(Candidate(vrf.value, self.ctx.pid), vrf, self.first_proof)
        return [Send(First(self.instance, self.ctx.pid, vrf, self.first_proof))]

    def _valid_first_owner(self, owner: int, vrf, proof) -> bool:
        pki, lam = self.ctx.pki, self.ctx.params.lam
        return pki.committee_val(self.first_string, lam, owner, proof) and \
            pki.vrf_verify(owner, self.coin_input, vrf)

    def on_first(self, msg: First) -> list:
        if not self.in_second:
            return []
        if not self._valid_first_owner(msg.sender, msg.vrf, msg.proof):
            self.ctx.reject("first.invalid")
            return []
        return self._count_first(msg)

    def on_second(self, msg: Second) -> Optional[int]:
        pki, lam = self.ctx.pki, self.ctx.params.lam
        if not pki.committee_val(self.second_string, lam, msg.sender, msg.proof):
            self.ctx.reject("second.not_member")
            return None
        if not self._valid_first_owner(msg.owner, msg.vrf, msg.owner_proof):
            self.ctx.reject("second.invalid_value")
            return None
        return self._count_second(msg)

    def _finish(self) -> Optional[int]:
        if self.state.v.owner < 0:
            # no valid value was ever seen; only possible when sampling went wrong
            self.fault = True
            return None
        return self.state.v.lsb

    def make_second(self, cand: Candidate) -> Second:
        vrf, owner_proof = self.evidence[cand]
        return Second(self.instance, self.ctx.pid, cand.owner, vrf, owner_proof, self.second_proof)
