"""Integer message-delay model shared by the event-driven and vectorised engines.

Every message gets a delay that is a pure function of the trial's delay
seed, its type slot, sender and receiver.  Deliveries are ordered by an
integer key packing (arrival time, sender, message rank); ties between
receivers are broken by receiver id.  All arithmetic is integral so the two
engines agree bit for bit.
"""

from __future__ import annotations

import math

import numpy as np

from ..crypto_sim import MASK64, mix64, mix64_array

TICKS = 1 << 20  # ticks per delay unit
RANK_BITS = 5
SENDER_BITS = 14
KEY_SHIFT = RANK_BITS + SENDER_BITS
MAX_PROCESSES = 1 << SENDER_BITS
TIME_LIMIT = 1 << (63 - KEY_SHIFT)
NEVER = np.iinfo(np.int64).max  # key of an event that does not happen

_TABLE_BITS = 16


def _exp_table() -> np.ndarray:
    # inverse CDF of Exp(1) on a uniform grid, in ticks; the last point stays finite
    size = 1 << _TABLE_BITS
    return np.array([round(-math.log(1.0 - k / (size + 1)) * TICKS) for k in range(size + 1)], dtype=np.int64)


EXP_TABLE = _exp_table()
_EXP_LIST = [int(x) for x in EXP_TABLE]


def message_rank(round_: int, kind: int) -> int:
    return ((round_ & 1) << 4) | kind


def pack_key(time: int, sender: int, rank: int) -> int:
    if time >= TIME_LIMIT:
        raise OverflowError("simulated time exceeds the delivery key range")
    return (time << KEY_SHIFT) | (sender << RANK_BITS) | rank


def pack_keys(times: np.ndarray, senders: np.ndarray, rank: int) -> np.ndarray:
    times = np.asarray(times, dtype=np.int64)
    if times.size and int(times.max()) >= TIME_LIMIT:
        raise OverflowError("simulated time exceeds the delivery key range")
    return (times << KEY_SHIFT) | (np.asarray(senders, dtype=np.int64) << RANK_BITS) | rank


def key_time(key):
    return key >> KEY_SHIFT


def delay_hash(seed: int, slot: int, sender: int, receiver: int) -> int:
    return mix64(mix64(mix64((seed ^ slot) & MASK64) ^ sender) ^ receiver)


def delay_hash_matrix(seed: int, slot: int, senders: np.ndarray, receivers: np.ndarray) -> np.ndarray:
    base = np.uint64(mix64((seed ^ slot) & MASK64))
    rows = mix64_array(base ^ np.asarray(senders, dtype=np.uint64))
    return mix64_array(rows[:, None] ^ np.asarray(receivers, dtype=np.uint64)[None, :])


def exponential_delay(h: int) -> int:
    idx = h >> (64 - _TABLE_BITS)
    frac = (h >> 32) & 0xFFFF
    lo = _EXP_LIST[idx]
    return 1 + lo + (((_EXP_LIST[idx + 1] - lo) * frac) >> 16)


def exponential_delays(h: np.ndarray) -> np.ndarray:
    idx = (h >> np.uint64(64 - _TABLE_BITS)).astype(np.int64)
    frac = ((h >> np.uint64(32)) & np.uint64(0xFFFF)).astype(np.int64)
    lo = EXP_TABLE[idx]
    return 1 + lo + (((EXP_TABLE[idx + 1] - lo) * frac) >> 16)
