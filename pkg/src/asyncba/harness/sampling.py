"""Empirical check of the committee sampling properties.

Committees are drawn exactly as the protocols draw them (VRF threshold on a
committee string) against a corrupted set fixed before any string is
evaluated.  S1..S4 are evaluated exactly per committee; the intersection
properties S5/S6 are additionally brute-forced on concrete subsets.
"""

from __future__ import annotations

import math

import numpy as np

from ..crypto_sim import MASK64, Registry, encode_string
from ..params import Parameters, failure_bounds
from ..simnet.adversaries import seeded_subset
from ..simnet.report import s_flags
from .campaign import CampaignReport

SUBSET_PAIRS = 8
_PAIR_SALT = 0x5B5E7


def corrupted_set(params: Parameters, seed: int, randomized: bool = False) -> np.ndarray:
    """Boolean mask of the ``f`` corrupted processes: ``{0..f-1}`` or a seeded random set."""
    mask = np.zeros(params.n, dtype=bool)
    if randomized:
        mask[seeded_subset(seed, params.n, params.f)] = True
    else:
        mask[: params.f] = True
    return mask


def subset_intersections(members: np.ndarray, a: int, b: int, rng, pairs: int = SUBSET_PAIRS) -> int:
    """Smallest ``|P1 & P2|`` over sampled ``a``- and ``b``-subsets of ``members``.

    The first pair is the extreme one (``P1`` from the front, ``P2`` from
    the back), so the minimum is attained whenever it is reachable.
    """
    size = len(members)
    if a > size or b > size:
        return -1
    smallest = len(np.intersect1d(members[:a], members[size - b:]))
    for _ in range(pairs):
        p1 = rng.choice(members, size=a, replace=False)
        p2 = rng.choice(members, size=b, replace=False)
        smallest = min(smallest, len(np.intersect1d(p1, p2)))
    return smallest


def verify_sampling_properties(params: Parameters, committees: int, seed: int = 0,
                               randomized_corruption: bool = False, pairs: int = SUBSET_PAIRS) -> dict:
    """Sample ``committees`` committees and report S1..S6 per committee and in aggregate."""
    registry = Registry(params.n, seed)
    corrupt = corrupted_set(params, seed, randomized_corruption)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & MASK64, _PAIR_SALT])))
    W, B = params.W, params.B
    rows = []
    for k in range(committees):
        members = np.flatnonzero(registry.sample_all(encode_string("SAMPLE.CHECK", k), params.lam))
        size = len(members)
        byz = int(corrupt[members].sum())
        flags = s_flags(params, size, size - byz, byz)
        row = {"committee": k, "size": size, "correct": size - byz, "byzantine": byz, **flags}
        if flags["S1"]:
            i5 = subset_intersections(members, W, W, rng, pairs)
            i6 = subset_intersections(members, W, B + 1, rng, pairs)
            row["S5_subsets"] = i5 < 0 or i5 >= B + 1
            row["S6_subsets"] = i6 < 0 or i6 >= 1
        else:
            row["S5_subsets"] = row["S6_subsets"] = None
        rows.append(row)
    bounds = None if params.full_participation else failure_bounds(params)
    props = {}
    for name in ("S1", "S2", "S3", "S4"):
        fails = sum(not r[name] for r in rows)
        rate = fails / committees if committees else 0.0
        if bounds is None:
            props[name] = {"failures": fails, "rate": rate, "analytic_bound": 0.0, "sigma": 0.0, "ok": fails == 0}
            continue
        b = bounds[name]
        sigma = math.sqrt(b * (1 - b) / committees) if committees else 0.0
        props[name] = {"failures": fails, "rate": rate, "analytic_bound": b, "sigma": sigma,
                       "ok": rate <= b + 3 * sigma}
    for name in ("S5", "S6"):
        checked = [r[f"{name}_subsets"] for r in rows if r[f"{name}_subsets"] is not None]
        props[name] = {"checked": len(checked), "failures": sum(not c for c in checked),
                       "exact_failures": sum(not r[name] for r in rows), "ok": all(checked)}
    sizes = [r["size"] for r in rows]
    return {
        "committees": committees,
        "corruption": "randomized" if randomized_corruption else "fixed",
        "properties": props,
        "size_mean": float(np.mean(sizes)) if sizes else None,
        "size_min": min(sizes) if sizes else None,
        "size_max": max(sizes) if sizes else None,
        "rows": rows,
    }


def sampling_campaign(config, params: Parameters) -> CampaignReport:
    res = verify_sampling_properties(params, config.committees, config.base_seed, config.random_corruption)
    rows = res.pop("rows")
    report = CampaignReport(config.to_dict(), params.as_dict(), config.committees, res, [], rows)
    if config.out is not None:
        report.write(config.out)
    return report
