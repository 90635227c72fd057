"""Monte-Carlo cross-check of extracted controls.

Simulates the controlled SDE under a piecewise-constant relaxed
feedback control (the shape the LP produces: per density cell, a
probability vector over the control grid, sampled afresh each step) and
estimates the long-term average cost together with the empirical
boundary activity.

Boundaries follow the projection (Skorokhod map) Euler scheme: when a
step leaves the state interval through a reflecting endpoint the state
is projected back and the projected distance is the local-time
increment charged against the singular cost; a jump endpoint teleports
the state to its target and charges the singular cost once per event.
The accumulated local time per unit time estimates the singular-measure
weight at that endpoint (w1 resp. w2), which is what the reported
boundary rates are compared against.

The step loop is compiled with numba when the problem's coefficient
callables can be jitted (all registry-built coefficients can); otherwise
a pure-Python fallback runs the identical code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import BoundaryKind, ControlProblem

__all__ = ["SimConfig", "CellControl", "SimResult", "simulate_lta"]

_CHUNK = 2_000_000


@dataclass(frozen=True)
class SimConfig:
    """Euler-Maruyama configuration; burn-in is discarded before any
    cost or boundary statistics accumulate."""

    dt: float
    horizon: float
    burn_in: float = 0.0
    paths: int = 8
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.burn_in < 0.0 or self.burn_in >= self.horizon:
            raise ValueError("need 0 <= burn_in < horizon")
        if self.paths < 1:
            raise ValueError("paths must be >= 1")


@dataclass(frozen=True)
class CellControl:
    """Piecewise-constant relaxed feedback control: on cell j of
    ``cell_edges`` the control point ``points[i]`` is used with
    probability ``weights[j, i]``."""

    cell_edges: np.ndarray
    points: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.cell_edges) - 1, len(self.points)):
            raise ValueError("weights must have shape (n_cells, n_points)")
        if np.any(w < -1e-12) or np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-8:
            raise ValueError("weights must be probabilities per cell")

    @classmethod
    def from_solution(cls, sol) -> "CellControl":
        return cls(sol.layout.cell_edges, sol.layout.controls, sol.control_weights)


@dataclass(frozen=True)
class SimResult:
    estimate: float
    stderr: float
    reflect_rate_left: float
    reflect_or_jump_rate_right: float


def _steps_chunk(
    x, lo, hi, bl_code, bl_target, br_code, br_target,
    edges, cdf, points, dt, sqdt, normals, uniforms,
    start_step, burn_steps,
    drift, sigma, c0, c1l, c1r,
):
    # One chunk of Euler steps for a single path.  Written to compile
    # under numba nopython mode with jitted coefficient callables, and to
    # run unchanged as plain Python.
    n_cells = len(edges) - 1
    n_u = len(points)
    cost = 0.0
    xi_l = 0.0
    xi_r = 0.0
    for t in range(len(normals)):
        live = (start_step + t) >= burn_steps
        j = np.searchsorted(edges, x, side="right") - 1
        if j < 0:
            j = 0
        elif j >= n_cells:
            j = n_cells - 1
        i = np.searchsorted(cdf[j], uniforms[t], side="left")
        if i >= n_u:
            i = n_u - 1
        u = points[i]
        if live:
            cost += c0(x, u) * dt
        x = x + drift(x, u) * dt + sigma(x, u) * sqdt * normals[t]
        if x < lo:
            if bl_code == 0:
                inc = lo - x
                x = lo
                if live:
                    cost += c1l(u) * inc
                    xi_l += inc
            else:
                tgt = bl_target if bl_code == 1 else lo + u
                if tgt < lo:
                    tgt = lo
                elif tgt > hi:
                    tgt = hi
                x = tgt
                if live:
                    cost += c1l(u)
                    xi_l += 1.0
        elif x > hi:
            if br_code == 0:
                inc = x - hi
                x = hi
                if live:
                    cost += c1r(u) * inc
                    xi_r += inc
            else:
                tgt = br_target if br_code == 1 else hi + u
                if tgt < lo:
                    tgt = lo
                elif tgt > hi:
                    tgt = hi
                x = tgt
                if live:
                    cost += c1r(u)
                    xi_r += 1.0
    return x, cost, xi_l, xi_r


_jit_kernel = None


def _get_jit_kernel():
    global _jit_kernel
    if _jit_kernel is None:
        import numba

        _jit_kernel = numba.njit(cache=False)(_steps_chunk)
    return _jit_kernel


def _try_jit(fn):
    try:
        import numba

        return numba.njit(cache=False)(fn)
    except Exception:
        return None


def _boundary_code(behavior) -> tuple[int, float]:
    if behavior.kind in (BoundaryKind.REFLECT_RIGHT, BoundaryKind.REFLECT_LEFT):
        return 0, 0.0
    if behavior.kind is BoundaryKind.JUMP_TO:
        return 1, float(behavior.target)
    return 2, 0.0


def simulate_lta(
    problem: ControlProblem, control: CellControl, config: SimConfig
) -> SimResult:
    """Estimate the long-term average cost under the given control.

    Returns the across-path mean with its standard error (0 for a single
    path) and the post-burn-in boundary activity rates.
    """
    if problem.discount != 0.0:
        raise ValueError("simulation supports the long-term average criterion only")
    lo, hi = problem.state_lo, problem.state_hi
    if config.dt >= hi - lo:
        raise ValueError("dt must be small against the state interval")

    edges = np.asarray(control.cell_edges, dtype=float)
    points = np.asarray(control.points, dtype=float)
    cdf = np.cumsum(np.asarray(control.weights, dtype=float), axis=1)
    cdf[:, -1] = 1.0
    bl_code, bl_target = _boundary_code(problem.boundary_left)
    br_code, br_target = _boundary_code(problem.boundary_right)

    total_steps = int(round(config.horizon / config.dt))
    burn_steps = min(int(round(config.burn_in / config.dt)), total_steps - 1)
    live_time = (total_steps - burn_steps) * config.dt
    x0 = 0.5 * (lo + hi) if problem.start_point is None else problem.start_point

    fns = (problem.drift, problem.diffusion, problem.running_cost,
           problem.singular_cost_left, problem.singular_cost_right)
    jitted = tuple(_try_jit(f) for f in fns)
    use_jit = all(j is not None for j in jitted)

    def run_all(kernel, coeff):
        seeds = np.random.SeedSequence(config.rng_seed).spawn(config.paths)
        costs = np.empty(config.paths)
        rate_l = np.empty(config.paths)
        rate_r = np.empty(config.paths)
        for p in range(config.paths):
            rng = np.random.Generator(np.random.PCG64(seeds[p]))
            x = float(x0)
            cost = xi_l = xi_r = 0.0
            done = 0
            while done < total_steps:
                k = min(_CHUNK, total_steps - done)
                normals = rng.standard_normal(k)
                uniforms = rng.random(k)
                x, dc, dl, dr = kernel(
                    x, lo, hi, bl_code, bl_target, br_code, br_target,
                    edges, cdf, points, config.dt, math.sqrt(config.dt),
                    normals, uniforms, done, burn_steps, *coeff,
                )
                cost += dc
                xi_l += dl
                xi_r += dr
                done += k
            costs[p] = cost / live_time
            rate_l[p] = xi_l / live_time
            rate_r[p] = xi_r / live_time
        return costs, rate_l, rate_r

    if use_jit:
        try:
            costs, rate_l, rate_r = run_all(_get_jit_kernel(), jitted)
        except Exception:
            costs, rate_l, rate_r = run_all(_steps_chunk, fns)
    else:
        costs, rate_l, rate_r = run_all(_steps_chunk, fns)

    stderr = float(np.std(costs, ddof=1) / math.sqrt(config.paths)) if config.paths > 1 else 0.0
    return SimResult(
        estimate=float(costs.mean()),
        stderr=stderr,
        reflect_rate_left=float(rate_l.mean()),
        reflect_or_jump_rate_right=float(rate_r.mean()),
    )
