"""Protocol message types, instance identifiers and word accounting.

A word is one signature, one VRF output or one value from a finite domain.
Each message type reports its own cost through ``words``; the tag, instance
id and round share a single finite-domain word.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .crypto_sim import INFINITY, SampleProof, Signature, VrfOutput, encode_string

BOT = 2
BINARY = (0, 1)
APPROVER_VALUES = (0, 1, BOT)

STAGE_A1 = "A1"
STAGE_COIN = "COIN"
STAGE_A2 = "A2"
STAGES = (STAGE_A1, STAGE_COIN, STAGE_A2)

# Message kinds in the order they occur inside one agreement round.  The
# index feeds the delivery-order key and the per-message delay hash.
KINDS = (
    ("A1", "INIT", None), ("A1", "ECHO", 0), ("A1", "ECHO", 1), ("A1", "ECHO", BOT), ("A1", "OK", None),
    ("COIN", "FIRST", None), ("COIN", "SECOND", None),
    ("A2", "INIT", None), ("A2", "ECHO", 0), ("A2", "ECHO", 1), ("A2", "ECHO", BOT), ("A2", "OK", None),
)
KIND_INDEX = {k: i for i, k in enumerate(KINDS)}
KINDS_PER_ROUND = 16


def value_name(v: Optional[int]) -> str:
    return {0: "0", 1: "1", BOT: "bot", None: "-"}[v]


def values_mask(values) -> int:
    """Bit mask over {0, 1, bot}: bit v is set iff v is in ``values``."""
    m = 0
    for v in values:
        m |= 1 << v
    return m


def mask_values(mask: int) -> tuple[int, ...]:
    return tuple(v for v in APPROVER_VALUES if mask >> v & 1)


def kind_of(stage: str, tag: str, value: Optional[int] = None) -> int:
    return KIND_INDEX[(stage, tag, value if tag == "ECHO" else None)]


def message_slot(round_: int, kind: int) -> int:
    """Identifier of one message type in one round, unique within a trial."""
    return round_ * KINDS_PER_ROUND + kind


@dataclass(frozen=True, order=True)
class InstanceId:
    ba: int
    round: int
    stage: str

    def committee_string(self, role: str, value: Optional[int] = None) -> bytes:
        return encode_string(f"{self.stage}.{role}", self.ba, self.round, value)

    def coin_input(self) -> bytes:
        return encode_string("COIN", self.ba, self.round)

    @property
    def label(self) -> str:
        return f"r{self.round}.{self.stage}"


@dataclass(frozen=True, order=True)
class Candidate:
    """A coin candidate; ordered by VRF value, ties broken by owner id."""

    value: int
    owner: int

    @property
    def lsb(self) -> int:
        return self.value & 1


NO_CANDIDATE = Candidate(INFINITY, -1)


@dataclass(frozen=True)
class First:
    instance: InstanceId
    sender: int
    vrf: VrfOutput
    proof: Optional[SampleProof] = None
    tag = "FIRST"

    @property
    def words(self) -> int:
        # tag/round word + VRF output (+ committee proof)
        return 2 + (self.proof is not None)

    @property
    def candidate(self) -> Candidate:
        return Candidate(self.vrf.value, self.sender)


@dataclass(frozen=True)
class Second:
    instance: InstanceId
    sender: int
    owner: int
    vrf: VrfOutput
    owner_proof: Optional[SampleProof] = None
    proof: Optional[SampleProof] = None
    tag = "SECOND"

    @property
    def words(self) -> int:
        # The owner's membership proof travels with its VRF output and is
        # accounted inside that word.
        return 2 + (self.proof is not None)

    @property
    def candidate(self) -> Candidate:
        return Candidate(self.vrf.value, self.owner)


@dataclass(frozen=True)
class Init:
    instance: InstanceId
    sender: int
    value: int
    proof: SampleProof
    tag = "INIT"

    @property
    def words(self) -> int:
        return 3


@dataclass(frozen=True)
class Endorsement:
    signer: int
    proof: SampleProof
    signature: Signature


@dataclass(frozen=True)
class Echo:
    instance: InstanceId
    sender: int
    value: int
    proof: SampleProof
    signature: Signature
    tag = "ECHO"

    @property
    def words(self) -> int:
        return 4

    def endorsement(self) -> Endorsement:
        return Endorsement(self.sender, self.proof, self.signature)


@dataclass(frozen=True)
class Ok:
    instance: InstanceId
    sender: int
    value: int
    proof: SampleProof
    endorsements: tuple
    tag = "OK"

    @property
    def words(self) -> int:
        # one word per endorsement signature (echoer proof folded in) + value + proof + tag
        return len(self.endorsements) + 3


def echo_payload(instance: InstanceId, value: int) -> bytes:
    """Bytes an echoer signs: the echo committee string itself."""
    return b"ECHO" + instance.committee_string("ECHO", value)


def message_kind(msg) -> int:
    value = msg.value if isinstance(msg, Echo) else None
    return kind_of(msg.instance.stage, msg.tag, value)


@dataclass(frozen=True)
class Send:
    """A message handed to the network; ``dests=None`` means every process."""

    message: object
    dests: Optional[tuple] = None
