"""Cubic B-spline test functions on an extended knot grid.

The basis lives on knots t_{-3} < ... < t_0 = lo < ... < t_q = hi <
... < t_{q+3}: a dyadic partition of the state interval with three
phantom knots appended beyond each endpoint at the adjacent boundary
spacing.  Basis element k is the normalised cubic B-spline on the five
consecutive knots t_k..t_{k+4},

    f_k(x) = (t_{k+4} - t_k) * sum_{i=k}^{k+4} [(t_i - x)^3]_+ / Psi_k'(t_i),
    Psi_k(x) = prod_{i=k}^{k+4} (x - t_i),

which is nonnegative, supported on [t_k, t_{k+4}], C^2 across knots and
sums to one on [lo, hi].  Every spline whose support meets the open
state interval is kept; with three phantoms per side that is all of
them, q + 3 splines for 2^level interior intervals.

Internally each spline is expanded once into per-interval monomial
coefficients (pp-form), so evaluation is O(1) and first/second
derivatives are analytic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["KnotGrid", "BSplineBasis", "build_basis"]


@dataclass(frozen=True)
class KnotGrid:
    """Strictly increasing knots with three phantom knots per side."""

    knots: np.ndarray
    state_lo: float
    state_hi: float

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        if knots.ndim != 1 or knots.size < 8:
            raise ValueError("need at least 8 knots (one interior interval + phantoms)")
        if not np.all(np.diff(knots) > 0.0):
            raise ValueError("knots must be strictly increasing")
        if knots[3] != self.state_lo or knots[-4] != self.state_hi:
            raise ValueError("knots[3] and knots[-4] must be the state endpoints")

    @classmethod
    def dyadic(
        cls,
        state_lo: float,
        state_hi: float,
        level: int,
        extra_knots: tuple[float, ...] = (),
    ) -> "KnotGrid":
        """Uniform dyadic grid with 2**level interior intervals, plus
        optional refinement points strictly inside the interval."""
        if level < 1:
            raise ValueError("level must be >= 1")
        if not state_lo < state_hi:
            raise ValueError("state_lo must be < state_hi")
        interior = state_lo + (state_hi - state_lo) * np.arange(2**level + 1) / 2**level
        interior[0], interior[-1] = state_lo, state_hi
        if extra_knots:
            extra = np.asarray(sorted(set(extra_knots)), dtype=float)
            if np.any(extra <= state_lo) or np.any(extra >= state_hi):
                raise ValueError("extra knots must lie strictly inside the state interval")
            interior = np.unique(np.concatenate([interior, extra]))
        h_lo = interior[1] - interior[0]
        h_hi = interior[-1] - interior[-2]
        left = state_lo - h_lo * np.arange(3, 0, -1)
        right = state_hi + h_hi * np.arange(1, 4)
        return cls(np.concatenate([left, interior, right]), state_lo, state_hi)

    @property
    def interior_intervals(self) -> int:
        return len(self.knots) - 7


@dataclass(frozen=True)
class BSplineBasis:
    """All cubic B-splines on a grid whose support meets the state
    interval; ``coeffs[k, p, d]`` is the coefficient of (x - t_{k+p})^d
    on the p-th interval of spline k."""

    grid: KnotGrid
    coeffs: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return self.coeffs.shape[0]

    def support(self, k: int) -> tuple[float, float]:
        t = self.grid.knots
        return float(t[k]), float(t[k + 4])

    def overlapping(self, lo: float, hi: float) -> range:
        """Indices of splines whose support intersects the open (lo, hi)."""
        t = self.grid.knots
        n = self.count
        k_hi = int(np.searchsorted(t[:n], hi, side="left"))  # t_k < hi
        k_lo = int(np.searchsorted(t[4 : 4 + n], lo, side="right"))  # t_{k+4} > lo
        return range(k_lo, k_hi)

    def eval(self, k: int, x, derivative: int = 0):
        """Value or analytic derivative of spline k; 0 outside support.

        ``x`` may be a scalar or ndarray.  Evaluation uses the half-open
        pieces [t_p, t_{p+1}); at the right support edge the spline is
        zero, consistent with C^2 continuity.
        """
        if not 0 <= k < self.count:
            raise ValueError(f"spline index {k} out of range [0, {self.count})")
        if derivative not in (0, 1, 2):
            raise ValueError("derivative order must be 0, 1 or 2")
        window = self.grid.knots[k : k + 5]
        xs = np.asarray(x, dtype=float)
        scalar = xs.ndim == 0
        xs = np.atleast_1d(xs)
        piece = np.searchsorted(window, xs, side="right") - 1
        inside = (piece >= 0) & (piece <= 3)
        p = np.where(inside, piece, 0)
        s = xs - window[p]
        c = self.coeffs[k][p]  # (m, 4)
        if derivative == 0:
            out = c[:, 0] + s * (c[:, 1] + s * (c[:, 2] + s * c[:, 3]))
        elif derivative == 1:
            out = c[:, 1] + s * (2.0 * c[:, 2] + s * 3.0 * c[:, 3])
        else:
            out = 2.0 * c[:, 2] + s * 6.0 * c[:, 3]
        out = np.where(inside, out, 0.0)
        return float(out[0]) if scalar else out

    def function(self, k: int):
        """Spline k as a test function f(x, derivative=0)."""

        def f(x: float, derivative: int = 0) -> float:
            return self.eval(k, x, derivative)

        return f


def build_basis(grid: KnotGrid) -> BSplineBasis:
    """Expand the truncated-power definition of every spline into
    pp-form.  On piece p only the terms with t_i above the piece
    contribute, and each is an exact cubic in the local coordinate."""
    t = grid.knots
    n = len(t) - 4
    coeffs = np.zeros((n, 4, 4))
    for k in range(n):
        window = t[k : k + 5]
        span = window[4] - window[0]
        # Psi_k'(t_i) = prod_{j != i} (t_i - t_j)
        diffs = window[:, None] - window[None, :]
        np.fill_diagonal(diffs, 1.0)
        psi_prime = diffs.prod(axis=1)
        for p in range(4):
            left = window[p]
            for i in range(p + 1, 5):
                d = window[i] - left
                w = span / psi_prime[i]
                coeffs[k, p, 0] += w * d**3
                coeffs[k, p, 1] += w * (-3.0 * d**2)
                coeffs[k, p, 2] += w * (3.0 * d)
                coeffs[k, p, 3] += w * (-1.0)
    return BSplineBasis(grid=grid, coeffs=coeffs)
