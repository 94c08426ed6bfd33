"""Acceptance criteria C1..C10 at their stated sizes and tolerances.

Each test records a one-line PASS/FAIL outcome that is echoed in the pytest
terminal summary, then asserts it.  Run just these with ``pytest -m acceptance``.
"""

import math

import pytest

from asyncba.harness.campaign import run_campaign
from asyncba.harness.config import ExperimentConfig
from asyncba.harness.fit import fit_complexity, mean_words_by_n
from asyncba.harness.sampling import verify_sampling_properties
from asyncba.params import coin_success_bound, derive_params, whp_coin_success_bound
from asyncba.simnet import run_trial
from asyncba.simnet.adversaries import ADVERSARIES
from asyncba.simnet.trace import TraceWriter, replay

from conftest import record

pytestmark = pytest.mark.acceptance

C2_ADVERSARIES = ("uniform_random", "crash_f", "min_value_suppressor")
SEED_STRIDE = 1_000_000


def campaign(**kw):
    return run_campaign(ExperimentConfig(**kw))


def split_trials(total, k):
    return [total // k + (i < total % k) for i in range(k)]


def test_c1_fair_coin_exact():
    agree = zeros = trials = 0
    for k, (adv, t) in enumerate(zip(ADVERSARIES, split_trials(10_000, len(ADVERSARIES)))):
        rep = campaign(protocol="shared_coin", n=64, epsilon=1 / 3, full_participation=True, adversary=adv,
                       trials=t, base_seed=k * SEED_STRIDE)
        assert rep.params["f"] == 0
        agree += sum(r["coin_unanimous"] != "" for r in rep.rows)
        zeros += rep.aggregates["unanimous_0"]["count"]
        trials += t
    p0 = zeros / trials
    ok = agree == trials and 0.485 <= p0 <= 0.515
    record("C1", ok, f"{agree}/{trials} unanimous, P(0)={p0:.4f} (target [0.485, 0.515])")
    assert ok


@pytest.fixture(scope="module")
def c2_runs():
    return {adv: campaign(protocol="shared_coin", n=120, epsilon=0.2, full_participation=True, adversary=adv,
                          trials=20_000, base_seed=k * SEED_STRIDE)
            for k, adv in enumerate(C2_ADVERSARIES)}


def test_c2_shared_coin_bound(c2_runs):
    bound = coin_success_bound(0.2)
    parts, ok = [], True
    for adv, rep in c2_runs.items():
        assert rep.params["f"] == 16
        for b in (0, 1):
            chk = rep.aggregates[f"unanimous_{b}_bound"]
            ok &= bool(chk["ok"])
            parts.append(f"{adv}/{b}={chk['rate']:.4f}")
    sigma = math.sqrt(bound * (1 - bound) / 20_000)
    record("C2", ok, f"threshold {bound - 3 * sigma:.4f}; " + ", ".join(parts))
    assert ok


def test_c3_common_core_count(c2_runs):
    failures = sum(rep.aggregates["common_count_failures"] for rep in c2_runs.values())
    checked = sum(rep.aggregates["common_count_checked"] for rep in c2_runs.values())
    ok = failures == 0 and checked == 3 * 20_000
    record("C3", ok, f"{failures} count failures in {checked} checked trials")
    assert ok


def test_c4_sampling_tails():
    p = derive_params(10_000, 0.2, 0.05)
    ok, parts = True, []
    for randomized in (False, True):
        res = verify_sampling_properties(p, 2000, seed=4, randomized_corruption=randomized)
        props = res["properties"]
        ok &= all(props[s]["ok"] for s in ("S1", "S2", "S3", "S4", "S5", "S6"))
        parts.append(res["corruption"] + ": " + ", ".join(
            f"{s} {props[s]['rate']:.4f}<={props[s]['analytic_bound']:.4f}" for s in ("S1", "S2", "S3", "S4"))
            + f", S5/S6 subset failures {props['S5']['failures']}/{props['S6']['failures']}"
            + f" over {props['S5']['checked']}")
    record("C4", ok, "; ".join(parts))
    assert ok


def test_c5_approver_properties():
    ok, parts = True, []
    for k, adv in enumerate(("uniform_random", "crash_f", "equivocator")):
        for j, pattern in enumerate(("all-1", "split")):
            rep = campaign(protocol="approver", n=2000, epsilon=0.2, d=0.05, adversary=adv, inputs=pattern,
                           trials=1000, base_seed=(2 * k + j) * SEED_STRIDE)
            a = rep.aggregates
            term = a["termination"]
            good = a["validity_violations"] == 0 and a["graded_violations"] == 0 and term["count"] == term["trials"]
            ok &= good
            parts.append(f"{adv}/{pattern}: viol {a['validity_violations']}+{a['graded_violations']}, "
                         f"term {term['count']}/{term['trials']}")
    record("C5", ok, "; ".join(parts))
    assert ok


def test_c6_whp_coin_bound():
    rep = campaign(protocol="whp_coin", n=2000, epsilon=0.2, d=0.05, trials=20_000)
    a = rep.aggregates
    bound = whp_coin_success_bound(0.05)
    ret = a["all_returned"]["rate"]
    ok = a["unanimous_0_bound"]["ok"] and a["unanimous_1_bound"]["ok"] and ret >= 0.995
    record("C6", ok, f"bound {bound:.4f}; unanimous-0 {a['unanimous_0']['rate']:.4f}, "
                     f"unanimous-1 {a['unanimous_1']['rate']:.4f}, all-return {ret:.4f} (target 0.995)")
    assert ok


def test_c7_ba_end_to_end():
    agreement = validity = within = trials = r0 = r0_trials = raw0 = raw_trials = 0
    for k, (adv, t) in enumerate(zip(ADVERSARIES, split_trials(1000, len(ADVERSARIES)))):
        rep = campaign(protocol="agreement", n=1000, epsilon=0.2, d=0.05, adversary=adv, inputs="adversarial",
                       trials=t, base_seed=k * SEED_STRIDE)
        a = rep.aggregates
        agreement += a["agreement_violations"]
        validity += a["validity_violations"]
        within += a["decided_within_40_rounds"]["count"]
        trials += t
        for b, pattern in enumerate(("all-0", "all-1")):
            rep = campaign(protocol="agreement", n=1000, epsilon=0.2, d=0.05, adversary=adv, inputs=pattern,
                           trials=50, base_seed=k * SEED_STRIDE + (b + 1) * 10_000)
            r0 += rep.aggregates["unanimous_round0"]["count"]
            r0_trials += rep.aggregates["unanimous_round0"]["trials"]
            raw0 += sum(r["decided"] is True and r["max_round"] == 0 for r in rep.rows)
            raw_trials += rep.trials
            agreement += rep.aggregates["agreement_violations"]
            validity += rep.aggregates["validity_violations"]
    ok = agreement == 0 and validity == 0 and within >= 0.99 * trials and r0 == r0_trials
    record("C7", ok, f"agreement/validity violations {agreement}/{validity}; decided within 40 rounds "
                     f"{within}/{trials} (target 99%); unanimous round 0 {r0}/{r0_trials} clean trials "
                     f"({raw0}/{raw_trials} including S-failure trials)")
    assert ok


def test_c8_complexity_scaling():
    rows = []
    for n in (250, 500, 1000, 2000):
        rows += campaign(protocol="agreement", n=n, epsilon=0.2, d=0.05, inputs="adversarial", trials=200).rows
    res = fit_complexity(*mean_words_by_n(rows))
    ok = res.preferred == "n_log2n" and all(r < 2.6 for r in res.growth_ratios)
    rss = {k: f"{v['rss']:.3g}" for k, v in res.fits.items()}
    record("C8", ok, f"preferred {res.preferred} (rss {rss}); ratios "
                     + ", ".join(f"{r:.3f}" for r in res.growth_ratios))
    assert ok


def test_c9_degenerate_whp_coin_matches_shared_coin():
    p = derive_params(16, 0.2, full_participation=True)
    mismatches = 0
    for seed in range(1000):
        adv = ADVERSARIES[seed % len(ADVERSARIES)]
        a = run_trial("shared_coin", p, adv, seed, engine="event")
        b = run_trial("whp_coin", p, adv, seed, engine="event")
        mismatches += a.outputs != b.outputs or a.correct != b.correct
    ok = mismatches == 0
    record("C9", ok, f"{mismatches} output mismatches over 1000 seeds")
    assert ok


def test_c10_replay_determinism(tmp_path):
    cases = [("shared_coin", derive_params(16, 0.2, full_participation=True), None),
             ("whp_coin", derive_params(100, 0.2, 0.05), None),
             ("approver", derive_params(100, 0.2, 0.05), [1] * 100),
             ("agreement", derive_params(16, 0.2, full_participation=True), [i % 2 for i in range(16)])]
    checked = bad = 0
    for protocol, params, inputs in cases:
        for k, adv in enumerate(ADVERSARIES):
            path = tmp_path / f"{protocol}-{adv}.jsonl"
            rep = run_trial(protocol, params, adv, 100 + k, inputs, engine="event", trace=TraceWriter(path))
            again, recorded = replay(path)
            bad += not (again.digest == recorded == rep.digest)
            checked += 1
    ok = bad == 0
    record("C10", ok, f"{checked - bad}/{checked} traces replay to their recorded digest")
    assert ok
