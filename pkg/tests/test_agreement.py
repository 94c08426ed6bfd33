import pytest

from asyncba.agreement import Agreement, ba_decision, ba_round, ba_start
from asyncba.approver import Approver
from asyncba.messages import BOT, InstanceId
from asyncba.params import derive_params
from asyncba.shared_coin import ProtocolError

from conftest import fifo_drive, make_contexts


def machines(n=4, epsilon=1 / 3, seed=0, full=True):
    params = derive_params(n, epsilon, 0.05, full_participation=full)
    _, ctxs = make_contexts(params, seed)
    return [Agreement(c) for c in ctxs]


def test_start_invokes_first_approver_with_input():
    m = machines()[0]
    assert ba_decision(m) is None
    out = ba_start(m, 0)
    inst = InstanceId(0, 0, "A1")
    assert isinstance(m.instances[inst], Approver)
    assert m.approver_inputs[inst] == 0
    assert out and out[0].message.value == 0
    assert ba_round(m) == 0
    with pytest.raises(ProtocolError):
        ba_start(m, 1)
    with pytest.raises(ValueError):
        ba_start(machines()[1], BOT)


@pytest.mark.parametrize("vals, propose", [({1}, 1), ({0}, 0), ({0, 1}, BOT), ({1, BOT}, BOT)])
def test_first_approve_rule(vals, propose):
    m = machines()[0]
    m.r = 0
    m.on_first_approve(frozenset(vals))
    assert m.propose == propose


def test_first_approve_bot_singleton_is_a_fault():
    m = machines()[0]
    m.r = 4
    m.on_first_approve(frozenset({BOT}))
    assert m.faults == ["r4: first approve returned {bot}"]
    with pytest.raises(ProtocolError):
        m.on_first_approve(frozenset())


@pytest.mark.parametrize("props, coin, est, decision", [
    ({1}, 0, 1, 1),
    ({BOT}, 0, 0, None),
    ({BOT}, 1, 1, None),
    ({0, BOT}, 1, 0, None),
])
def test_second_approve_rule(props, coin, est, decision):
    m = machines()[0]
    m.r = 0
    m.est = 1 - est
    m.on_coin(coin)
    m.on_second_approve(frozenset(props))
    assert m.est == est and m.decision == decision


def test_conflicting_second_approve_is_recorded_not_raised():
    m = machines()[0]
    m.r = 2
    m.on_coin(1)
    m.on_second_approve(frozenset({0, 1}))
    assert m.violations == ["r2: second approve returned [0, 1]"]


def test_decision_is_stable():
    m = machines()[0]
    m.r = 0
    m.on_coin(0)
    m.on_second_approve(frozenset({1}))
    m.r = 1
    m.on_coin(0)
    m.on_second_approve(frozenset({0}))
    assert m.decision == 1 and m.decision_round == 0 and m.est == 0


@pytest.mark.parametrize("v", [0, 1])
def test_unanimous_decides_in_round_zero(v):
    ms = machines()
    fifo_drive(ms, [(p, ba_start(m, v)) for p, m in enumerate(ms)])
    assert [m.decision for m in ms] == [v] * 4
    assert [m.decision_round for m in ms] == [0] * 4
    # one extra round after deciding, then halt
    assert all(m.halted and m.r == 1 for m in ms)


@pytest.mark.parametrize("seed", range(6))
def test_mixed_inputs_agree(seed):
    ms = machines(n=7, epsilon=0.2, seed=seed)
    fifo_drive(ms, [(p, ba_start(m, p % 2)) for p, m in enumerate(ms)])
    assert len({m.decision for m in ms}) == 1
    assert ms[0].decision in (0, 1)
    assert not any(m.violations for m in ms)


def test_coin_invoked_once_per_round():
    ms = machines(n=7, epsilon=0.2, seed=3)
    fifo_drive(ms, [(p, ba_start(m, p % 2)) for p, m in enumerate(ms)])
    for m in ms:
        coin_rounds = [i.round for i in m.instances if i.stage == "COIN"]
        assert sorted(coin_rounds) == list(range(m.r + 1))


def test_foreign_instance_rejected():
    m = machines()[0]
    ba_start(m, 1)
    from asyncba.messages import Init

    other = m.instances[InstanceId(0, 0, "A1")]
    msg = Init(InstanceId(9, 0, "A1"), 1, 1, other.init_proof)
    assert m.handle(msg) == []
    assert m.ctx.audit["ba.foreign_instance"] == 1
