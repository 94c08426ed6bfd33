import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from asyncba.crypto_sim import (
    KeyHandle,
    Registry,
    SampleProof,
    VrfOutput,
    encode_string,
    sample_threshold,
    setup_registry,
)


def test_registry_deterministic_in_seed():
    a, b, c = setup_registry(4, 7), setup_registry(4, 7), setup_registry(4, 8)
    assert [a.keypair(i) for i in range(4)] == [b.keypair(i) for i in range(4)]
    assert [a.keypair(i).secret_seed for i in range(4)] != [c.keypair(i).secret_seed for i in range(4)]


def test_registry_needs_a_process():
    with pytest.raises(ValueError):
        setup_registry(0, 1)


def test_vrf_roundtrip_and_binding():
    reg = Registry(4, 7)
    x = b"coin-input"
    out = reg.vrf_eval(1, x)
    assert out == reg.vrf_eval(1, x)
    assert reg.public.vrf_verify(1, x, out)
    assert not reg.public.vrf_verify(1, x, VrfOutput(out.value + 1, out.proof))
    assert not reg.public.vrf_verify(1, x, VrfOutput(out.value, out.proof ^ 1))
    # the output of process 1 does not verify as process 2's
    assert not reg.public.vrf_verify(2, x, out)
    with pytest.raises(KeyError):
        reg.vrf_eval(4, x)


def test_vectorised_values_match_scalar_path():
    reg = Registry(50, 3)
    x = encode_string("COIN", 0, 5)
    assert [int(v) for v in reg.vrf_values_all(x)] == [reg.vrf_eval(i, x).value for i in range(50)]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 63), st.integers(0, 15), st.binary(max_size=40), st.integers(0, 2 ** 64 - 1))
def test_uniqueness_only_one_value_accepted(seed, i, x, other):
    reg = Registry(16, seed)
    out = reg.vrf_eval(i, x)
    if other != out.value:
        assert not reg.vrf_verify(i, x, VrfOutput(other, out.proof))


def test_full_lambda_samples_everyone():
    reg = Registry(10, 1)
    assert all(reg.sample(i, b"s", 10).member for i in range(10))
    assert reg.sample_all(b"s", 10).all()
    with pytest.raises(ValueError):
        reg.sample(0, b"s", 11)
    with pytest.raises(ValueError):
        reg.sample(0, b"s", 0)


def test_committee_size_matches_binomial():
    n = 10_000
    lam = 8 * math.log(n)
    reg = Registry(n, 11)
    sizes = np.array([reg.sample_all(encode_string("C", k), lam).sum() for k in range(100)])
    sigma = math.sqrt(lam * (1 - lam / n))
    # the mean of 100 committees lies within 3 standard errors of lambda
    assert abs(sizes.mean() - lam) <= 3 * sigma / math.sqrt(100)


def test_committee_val_agrees_with_sample_and_rejects_tampering():
    n, lam = 200, 20.0
    reg = Registry(n, 5)
    s = encode_string("OK", 0, 3)
    for i in range(n):
        proof = reg.sample(i, s, lam)
        assert reg.public.committee_val(s, lam, i, proof) == proof.member
        forged = SampleProof(True, VrfOutput(0, proof.proof.proof))
        assert not reg.public.committee_val(s, lam, i, forged)
    assert int(reg.sample_all(s, lam).sum()) == sum(reg.sample(i, s, lam).member for i in range(n))


def test_sampling_independent_across_strings():
    n, lam = 10_000, 500.0
    reg = Registry(n, 9)
    a = reg.sample_all(b"one", lam).astype(float)
    b = reg.sample_all(b"two", lam).astype(float)
    r = np.corrcoef(a, b)[0, 1]
    # under independence r * sqrt(n) is approximately standard normal
    assert abs(r) * math.sqrt(n) < 4


def test_public_ids_do_not_predict_membership():
    n, lam = 10_000, 1000.0
    reg = Registry(n, 21)
    members = reg.sample_all(b"target", lam)
    # a scheduler only sees public ids; guess "member" by the id's low bits
    ids = np.array([int.from_bytes(reg.public.public_id(i), "big") for i in range(n)], dtype=np.uint64)
    guess = (ids % np.uint64(10)) == 0
    table = [[int((guess & members).sum()), int((guess & ~members).sum())],
             [int((~guess & members).sum()), int((~guess & ~members).sum())]]
    _, pvalue, _, _ = stats.chi2_contingency(table)
    assert pvalue > 1e-3


def test_signatures_bind_signer_and_payload():
    reg = Registry(4, 2)
    sig = reg.sign(1, b"payload")
    assert reg.public.verify_sig(sig, b"payload")
    assert not reg.public.verify_sig(sig, b"payloae")
    forged = type(sig)(2, sig.payload_digest)
    assert not reg.public.verify_sig(forged, b"payload")


def test_handle_exposes_no_secret():
    reg = Registry(4, 2)
    h = reg.handle(3)
    assert isinstance(h, KeyHandle)
    assert not any("secret" in name for name in dir(h))
    assert not any("secret" in name for name in dir(reg.public))
    assert h.vrf_eval(b"x") == reg.vrf_eval(3, b"x")


def test_encode_string_layout():
    raw = encode_string("A1.ECHO", 7, 3, 2)
    assert raw == bytes([7]) + b"A1.ECHO" + struct.pack(">QQ", 7, 3) + b"\x02"
    assert encode_string("X") == b"\x01X" + bytes(16)
    with pytest.raises(ValueError):
        encode_string("x" * 256)


def test_sample_threshold_probability():
    assert sample_threshold(5.0, 5) == 2 ** 64
    assert sample_threshold(1.0, 4) == 2 ** 62
