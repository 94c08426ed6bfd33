import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncba.approver import Approver, approve_on_echo, approve_on_init, approve_on_ok, approve_start, canonical
from asyncba.messages import BOT, Init, InstanceId, Ok
from asyncba.params import derive_params
from asyncba.shared_coin import ProtocolError

from conftest import fifo_drive, make_contexts

INST = InstanceId(0, 2, "A1")


def setup(n=300, seed=0):
    params = derive_params(n, 0.2, 0.05)
    reg, ctxs = make_contexts(params, seed)
    return params, reg, [Approver(c, INST) for c in ctxs]


def committee(reg, params, role, value=None):
    return np.flatnonzero(reg.sample_all(INST.committee_string(role, value), params.lam))


def inits(reg, params, value, k):
    s = INST.committee_string("INIT")
    return [Init(INST, int(j), value, reg.sample(int(j), s, params.lam)) for j in committee(reg, params, "INIT")[:k]]


def test_start_and_input_domain():
    params, reg, ms = setup()
    im = set(committee(reg, params, "INIT"))
    for p in range(20):
        out = approve_start(ms[p], 1)
        assert len(out) == (p in im)
        if out:
            assert out[0].message.words == 3 and out[0].dests is None
    with pytest.raises(ProtocolError):
        approve_start(ms[0], 1)
    with pytest.raises(ValueError):
        approve_start(ms[25], 3)


def test_echo_threshold_is_b_plus_one_and_once():
    params, reg, ms = setup()
    me = ms[int(committee(reg, params, "ECHO", 1)[0])]
    msgs = inits(reg, params, 1, params.B + 3)
    assert len(msgs) == params.B + 3
    outs = [approve_on_init(me, m) for m in msgs]
    assert [len(o) for o in outs] == [0] * params.B + [1, 0, 0]
    echo = outs[params.B][0].message
    assert echo.value == 1 and echo.words == 4


def test_member_of_two_echo_committees_echoes_both():
    params, reg, ms = setup()
    both = np.intersect1d(committee(reg, params, "ECHO", 0), committee(reg, params, "ECHO", BOT))
    me = ms[int(both[0])]
    sent = [s.message.value for v in (0, BOT) for m in inits(reg, params, v, params.B + 1)
            for s in approve_on_init(me, m)]
    assert sorted(sent) == [0, BOT]


def echoes_for(reg, params, ms, value, k):
    out = []
    for j in committee(reg, params, "ECHO", value)[:k]:
        out.append(ms[int(j)].make_echo(value))
    return out


def test_ok_on_first_echo_quorum_only():
    params, reg, ms = setup()
    ok_members = committee(reg, params, "OK")
    me = ms[int(ok_members[0])]
    e1 = echoes_for(reg, params, ms, 1, params.W)
    e0 = echoes_for(reg, params, ms, 0, params.W)
    outs = [approve_on_echo(me, e) for e in e1 + e0]
    sent = [s.message for o in outs for s in o]
    assert len(sent) == 1 and sent[0].value == 1
    assert sent[0].words == params.W + 3
    assert me.echo_quorums == [1, 0]


def test_non_ok_member_never_sends_ok():
    params, reg, ms = setup()
    outsider = ms[int(np.setdiff1d(np.arange(params.n), committee(reg, params, "OK"))[0])]
    assert all(approve_on_echo(outsider, e) == [] for e in echoes_for(reg, params, ms, 1, params.W))


def test_invalid_ok_proof_dropped():
    params, reg, ms = setup()
    okm = committee(reg, params, "OK")
    sender = int(okm[0])
    proof = reg.sample(sender, INST.committee_string("OK"), params.lam)
    ends = tuple(e.endorsement() for e in echoes_for(reg, params, ms, 1, params.W))
    me = ms[int(okm[1])]
    short = Ok(INST, sender, 1, proof, ends[:-1])
    wrong_value = Ok(INST, sender, 0, proof, ends)
    dup = Ok(INST, sender, 1, proof, ends[:-1] + ends[:1])
    for bad in (short, wrong_value, dup):
        assert approve_on_ok(me, bad) is None
    assert me.ctx.audit["ok.invalid"] == 3
    assert approve_on_ok(me, Ok(INST, sender, 1, proof, ends)) is None
    assert me.state.ok_values == {sender: 1}


def test_all_same_input_returns_singleton():
    params, reg, ms = setup()
    fifo_drive(ms, [(p, m.start(1)) for p, m in enumerate(ms)])
    assert {m.result for m in ms} == {frozenset({1})}


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(0, 2 ** 32), st.sampled_from([0, 1]))
def test_split_inputs_graded_agreement_any_order(seed, order, v):
    rnd = random.Random(order)
    params, reg, ms = setup(n=120, seed=seed)
    pool = []

    def post(sends):
        for s in sends:
            pool.extend((q, s.message) for q in range(params.n))

    for p, m in enumerate(ms):
        post(m.start(v if p % 2 == 0 else BOT))
    while pool:
        i = rnd.randrange(len(pool))
        pool[i], pool[-1] = pool[-1], pool[i]
        q, msg = pool.pop()
        post(ms[q].handle(msg))
    results = [m.result for m in ms if m.result is not None]
    assert all(r <= {v, BOT} and 1 <= len(r) <= 2 for r in results)
    singles = {r for r in results if len(r) == 1}
    assert len(singles) <= 1


def test_canonical_order():
    assert canonical({BOT, 1, 0}) == (0, 1, BOT)
