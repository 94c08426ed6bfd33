"""Word-complexity model comparison: ``a * n ln^2 n`` against ``b * n^2``."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

MIN_GRID = 4

MODELS = {
    "n_log2n": lambda n: n * np.log(n) ** 2,
    "n2": lambda n: n.astype(float) ** 2,
}


class FitError(ValueError):
    pass


@dataclass
class ModelFit:
    coefficient: float
    residuals: list
    rss: float


@dataclass
class FitResult:
    ns: list
    words: list
    fits: dict
    preferred: str
    loglog_slope: float
    growth_ratios: list

    def to_dict(self) -> dict:
        return asdict(self)


def _fit_one(x: np.ndarray, y: np.ndarray) -> ModelFit:
    # relative least squares through the origin, so the largest n does not dominate
    w = 1.0 / y
    a = float(np.sum(x * w * w * y) / np.sum((x * w) ** 2))
    rel = (a * x - y) / y
    return ModelFit(a, [float(r) for r in rel], float(np.sum(rel ** 2)))


def fit_complexity(ns, words) -> FitResult:
    """Fit mean words per ``n`` against both models and pick the smaller residual."""
    n = np.asarray(ns, dtype=np.int64)
    y = np.asarray(words, dtype=float)
    if n.shape != y.shape:
        raise FitError("ns and words differ in length")
    if len(np.unique(n)) < MIN_GRID:
        raise FitError(f"need at least {MIN_GRID} distinct n values, got {len(np.unique(n))}")
    if np.any(n < 2) or np.any(y <= 0):
        raise FitError("n must be at least 2 and words positive")
    order = np.argsort(n)
    n, y = n[order], y[order]
    fits = {name: _fit_one(model(n), y) for name, model in MODELS.items()}
    preferred = min(fits, key=lambda k: fits[k].rss)
    slope = float(np.polyfit(np.log(n), np.log(y), 1)[0])
    ratios = [float(y[i + 1] / y[i]) for i in range(len(y) - 1)]
    return FitResult([int(v) for v in n], [float(v) for v in y], {k: asdict(v) for k, v in fits.items()},
                     preferred, slope, ratios)


def mean_words_by_n(rows) -> tuple[list, list]:
    """Group per-trial rows (dicts with ``n`` and ``words``) into means per ``n``."""
    groups: dict = {}
    for r in rows:
        groups.setdefault(int(r["n"]), []).append(float(r["words"]))
    ns = sorted(groups)
    return ns, [float(np.mean(groups[k])) for k in ns]
