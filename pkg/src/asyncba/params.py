"""Protocol constants and closed-form bounds.

Everything numeric that the protocols or the harness rely on is derived
here: the Byzantine budget ``f``, the expected committee size ``lam``, the
committee wait threshold ``W`` and committee Byzantine bound ``B``, the
coin success rates and the Chernoff exponents of the sampling analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ParameterError",
    "Parameters",
    "derive_params",
    "epsilon_range",
    "d_range",
    "coin_success_bound",
    "whp_coin_success_bound",
    "common_value_lower_bound",
    "chernoff_exponents",
    "failure_bounds",
    "LAMBDA_CONST",
]

LAMBDA_CONST = 8.0
# Lower floors on epsilon and d below which the coin success rates are not positive.
EPSILON_FLOOR = 0.109
D_FLOOR = 0.0362
# Absorbs binary rounding in products like (1/3 - 0.2) * 120 = 15.999999999999998.
_FLOOR_SLACK = 1e-9


class ParameterError(ValueError):
    """A parameter violates one of the admissible ranges."""


@dataclass(frozen=True)
class Parameters:
    n: int
    epsilon: float
    f: int
    lam: float
    d: float
    W: int
    B: int
    full_participation: bool = False

    @property
    def sample_probability(self) -> float:
        return min(1.0, self.lam / self.n)

    @property
    def committee_cap(self) -> int:
        """Largest committee size allowed by S1, ``floor((1 + d) * lam)``."""
        if self.full_participation:
            return self.n
        return math.floor((1 + self.d) * self.lam + _FLOOR_SLACK)

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "f": self.f,
            "lam": self.lam,
            "d": self.d,
            "W": self.W,
            "B": self.B,
            "full_participation": self.full_participation,
        }


def byzantine_budget(n: int, epsilon: float) -> int:
    return math.floor((1.0 / 3.0 - epsilon) * n + _FLOOR_SLACK)


def epsilon_range(n: int) -> tuple[float, float]:
    """Open interval of admissible epsilon for ``n`` processes."""
    ln_n = math.log(n)
    low = max(3.0 / (8.0 * ln_n), EPSILON_FLOOR) + 1.0 / (8.0 * ln_n)
    return low, 1.0 / 3.0


def d_range(epsilon: float, lam: float) -> tuple[float, float]:
    """Open interval of admissible committee slack ``d``."""
    return max(1.0 / lam, D_FLOOR), epsilon / 3.0 - 1.0 / (3.0 * lam)


def derive_params(n: int, epsilon: float, d: float = 0.05, full_participation: bool = False) -> Parameters:
    """Validate ``(n, epsilon, d)`` and derive every protocol constant.

    In ``full_participation`` mode every process is in every committee
    (``lam = n``) and the thresholds fall back to ``W = n - f``, ``B = f``;
    the whp ranges on epsilon and d are not enforced there.
    """
    if isinstance(n, bool) or int(n) != n:
        raise ParameterError(f"n must be an integer, got {n!r}")
    n = int(n)
    if n < 4:
        raise ParameterError(f"n >= 4 required, got n={n}")
    if not math.isfinite(epsilon):
        raise ParameterError(f"epsilon must be finite, got {epsilon!r}")

    if full_participation:
        if not 0.0 <= epsilon <= 1.0 / 3.0:
            raise ParameterError(f"epsilon={epsilon} outside [0, 1/3]")
        f = byzantine_budget(n, epsilon)
        return Parameters(n=n, epsilon=float(epsilon), f=f, lam=float(n), d=float(d),
                          W=n - f, B=f, full_participation=True)

    if not math.isfinite(d):
        raise ParameterError(f"d must be finite, got {d!r}")
    eps_lo, eps_hi = epsilon_range(n)
    if eps_lo >= eps_hi:
        raise ParameterError(
            f"n={n} too small: max(3/(8 ln n), {EPSILON_FLOOR}) + 1/(8 ln n) = {eps_lo:.4f} >= 1/3, "
            "no admissible epsilon")
    if not eps_lo < epsilon < eps_hi:
        raise ParameterError(
            f"epsilon={epsilon} violates max(3/(8 ln n), {EPSILON_FLOOR}) + 1/(8 ln n) < epsilon < 1/3 "
            f"(interval ({eps_lo:.5f}, {eps_hi:.5f}))")

    lam = LAMBDA_CONST * math.log(n)
    d_lo, d_hi = d_range(epsilon, lam)
    if d_lo >= d_hi:
        raise ParameterError(
            f"no admissible d for n={n}, epsilon={epsilon}: max(1/lambda, {D_FLOOR}) = {d_lo:.5f} "
            f">= epsilon/3 - 1/(3 lambda) = {d_hi:.5f}")
    if not d_lo < d < d_hi:
        raise ParameterError(
            f"d={d} violates max(1/lambda, {D_FLOOR}) < d < epsilon/3 - 1/(3 lambda) "
            f"(interval ({d_lo:.5f}, {d_hi:.5f}))")

    f = byzantine_budget(n, epsilon)
    W = math.ceil((2.0 / 3.0 + 3.0 * d) * lam - _FLOOR_SLACK)
    B = math.floor((1.0 / 3.0 - d) * lam + _FLOOR_SLACK)
    # Both follow from the d range; a failure here means the range check is wrong.
    assert B < W and 2 * B < W + 1, (B, W)
    return Parameters(n=n, epsilon=float(epsilon), f=f, lam=lam, d=float(d), W=W, B=B)


def coin_success_bound(epsilon: float) -> float:
    """Success rate of the full-participation coin for resilience slack ``epsilon``."""
    if not 0.0 < epsilon <= 1.0 / 3.0 + 1e-12:
        raise ParameterError(f"epsilon={epsilon} outside (0, 1/3]")
    return (18 * epsilon ** 2 + 24 * epsilon - 1) / (6 * (1 + 6 * epsilon))


def whp_coin_success_bound(d: float) -> float:
    """Success rate of the committee coin for committee slack ``d``."""
    if not 0.0 < d < 1.0:
        raise ParameterError(f"d={d} outside (0, 1)")
    return (18 * d ** 2 + 27 * d - 1) / (3 * (5 + 6 * d) * (1 - d) * (1 + 9 * d))


def common_value_lower_bound(params: Parameters, committee_mode: bool = False) -> float:
    """Lower bound on the number of common values in one coin instance.

    ``committee_mode=False`` gives the full-participation bound (in units of
    processes), ``True`` the committee bound (in units of committee members).
    """
    if committee_mode:
        d = params.d
        return d * (11 - 3 * d) / (1 + 9 * d) * params.lam
    eps = params.epsilon
    return 9 * eps / (1 + 6 * eps) * params.n


def chernoff_exponents(params: Parameters) -> tuple[float, float, float, float]:
    """Exponents ``(c1, c2, c3, c4)``; S_i fails with probability at most ``n ** -c_i``."""
    if params.full_participation:
        raise ParameterError("Chernoff exponents are undefined in full-participation mode")
    eps, d, lam = params.epsilon, params.d, params.lam
    k = LAMBDA_CONST
    c1 = k * d ** 2 / (2 + d)
    c2 = k * d ** 2 / 2
    d_prime = 3 * d + 1 / lam
    shortfall = 1 - (2 / 3 + d_prime) / (2 / 3 + eps)
    c3 = k * shortfall ** 2 * (2 / 3 + eps) / 2
    excess = (eps - d) / (1 / 3 - eps)
    c4 = k * ((eps - d) ** 2 / (1 / 3 - eps)) / (2 + excess)
    for name, c in zip(("c1", "c2", "c3", "c4"), (c1, c2, c3, c4)):
        if not c > 0:
            raise ParameterError(f"{name}={c} is not positive for epsilon={eps}, d={d}")
    return c1, c2, c3, c4


def failure_bounds(params: Parameters) -> dict[str, float]:
    """Analytic per-committee failure probabilities ``n ** -c_i`` for S1..S4."""
    return {f"S{i + 1}": params.n ** -c for i, c in enumerate(chernoff_exponents(params))}
