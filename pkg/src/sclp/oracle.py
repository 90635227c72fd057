"""Analytic reference for the modified bounded follower benchmark.

The benchmark on [0,1] (drift u in [-1,1], constant sigma, running cost
x^2, reflection at 0, jump from 1 to 0 with cost c1) is solved by a
threshold control

    u_a(x) = -1 for x < a,  +1 for x >= a,

under which the stationary state density is

    p_a(x) = N(x) / int_0^1 N,
    N(x)   = int_x^1 exp( int_x^y -(2/sigma^2) u_a(z) dz ) dy.

The inner integral of u_a is piecewise linear and evaluated in closed
form; the outer integrals use adaptive Simpson quadrature split at the
kink a.  The singular weights follow from the stationarity of p_a
tested against f(x) = x and f(x) = x^2:

    w2 = 2 int x u_a p_a dx + sigma^2,      w1 = w2 - int u_a p_a dx.

``reference_table`` returns the canonical published configuration used
by the error tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "BoundedFollowerReference",
    "threshold_control",
    "stationary_density",
    "singular_rates",
    "average_cost",
    "reference_table",
    "adaptive_simpson",
]

_SIMPSON_TOL = 1e-10


def adaptive_simpson(f, a: float, b: float, tol: float = _SIMPSON_TOL) -> float:
    """Classic adaptive Simpson with Richardson acceptance test."""
    if a == b:
        return 0.0

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(lo, mid, flo, flm, fmid, left, 0.5 * eps, depth - 1) + recurse(
            mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth - 1
        )

    mid = 0.5 * (a + b)
    fa, fm, fb = f(a), f(mid), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 48)


def threshold_control(a: float, x: float) -> float:
    """-1 below the switching point, +1 at and above it."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    return -1.0 if x < a else 1.0


def _control_primitive(a: float, x: float, y: float) -> float:
    """int_x^y u_a(z) dz for x <= y (piecewise linear, exact)."""
    return (max(y, a) - max(x, a)) - (min(y, a) - min(x, a))


def _numerator(a: float, sigma: float, x: float) -> float:
    rate = 2.0 / (sigma * sigma)

    def integrand(y: float) -> float:
        return math.exp(-rate * _control_primitive(a, x, y))

    if x < a:
        return adaptive_simpson(integrand, x, a) + adaptive_simpson(integrand, a, 1.0)
    return adaptive_simpson(integrand, x, 1.0)


_norm_cache: dict[tuple[float, float], float] = {}


def _normalizer(a: float, sigma: float) -> float:
    key = (a, sigma)
    if key not in _norm_cache:
        f = lambda x: _numerator(a, sigma, x)
        _norm_cache[key] = adaptive_simpson(f, 0.0, a) + adaptive_simpson(f, a, 1.0)
    return _norm_cache[key]


def stationary_density(a: float, sigma: float, x: float) -> float:
    """Stationary state density under the threshold control u_a."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if not 0.0 < a < 1.0:
        raise ValueError("switching point must lie in (0, 1)")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    return _numerator(a, sigma, x) / _normalizer(a, sigma)


def _density_moment(a: float, sigma: float, g) -> float:
    f = lambda x: g(x) * stationary_density(a, sigma, x)
    return adaptive_simpson(f, 0.0, a) + adaptive_simpson(f, a, 1.0)


def singular_rates(a: float, sigma: float) -> tuple[float, float]:
    """(w1, w2): expected reflection local-time rate at 0 and jump rate
    at 1 under the threshold control, from the stationarity identities."""
    w2 = 2.0 * _density_moment(a, sigma, lambda x: x * threshold_control(a, x)) + sigma * sigma
    w1 = w2 - _density_moment(a, sigma, lambda x: threshold_control(a, x))
    return w1, w2


def average_cost(a: float, sigma: float, c1: float) -> float:
    """Long-term average cost of the threshold control:
    int x^2 p_a dx + c1 w2(a)."""
    _, w2 = singular_rates(a, sigma)
    return _density_moment(a, sigma, lambda x: x * x) + c1 * w2


@dataclass(frozen=True)
class BoundedFollowerReference:
    """Published benchmark configuration and its reference solution."""

    x0: float
    sigma: float
    c1: float
    switching_point: float
    w1: float
    w2: float
    cost: float

    def __post_init__(self) -> None:
        if not 0.0 < self.switching_point < 1.0:
            raise ValueError("switching point must lie in (0, 1)")
        if self.cost <= 0.0:
            raise ValueError("reference cost must be positive")

    def density(self, x: float) -> float:
        return stationary_density(self.switching_point, self.sigma, x)

    def control(self, x: float) -> float:
        return threshold_control(self.switching_point, x)


def reference_table() -> BoundedFollowerReference:
    """Canonical reference values for the bounded-follower error tables."""
    return BoundedFollowerReference(
        x0=0.1,
        sigma=math.sqrt(2.0),
        c1=0.01,
        switching_point=0.7512,
        w1=2.4659,
        w2=1.5555,
        cost=0.1540,
    )
