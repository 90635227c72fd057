"""Discretization of the occupation-measure linear program.

The state interval is cut into dyadic cells E_j (optionally with the
cell containing the midpoint split once more), the control interval
into 2**control_level + 1 grid points u_i.  The continuous occupation
measure is parameterised by cell masses

    v_{j,i} = mass of mu_0 on E_j x {u_i}   (= gamma_j beta_{j,i} |E_j|),

the singular measure by point masses s_{L,i}, s_{R,i} at the two
endpoints.  Working in cell masses rather than (gamma, beta) products
keeps the program linear and makes the total-mass row all ones.

For every basis spline f_k one equality constraint is assembled,

    sum_{j,i} v_{j,i} avg_{E_j}( A f_k(. , u_i) )
        + sum_i s_{L,i} B f_k(left, u_i) + sum_i s_{R,i} B f_k(right, u_i)
    = R f_k,

where avg is the cell average computed by 5-point Gauss-Legendre
quadrature on each overlap of the cell with a spline knot interval
(exact: the integrands are piecewise polynomial for polynomial
coefficients).  A final equality row fixes total v-mass to one and a
single inequality bounds the total singular mass by ``mass_bound``.

The constraint matrix C and the constraint error d of the convergence
diagnostics are assembled from the same cell integrals, but against the
indicator basis p_j itself (no cell-mass normalisation).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import (
    BoundaryKind,
    ControlProblem,
    ModelError,
    apply_B,
    functional_R,
    scaled_costs,
)
from .splines import BSplineBasis

__all__ = [
    "DiscretizationConfig",
    "MeasureLayout",
    "DiscreteLP",
    "build_layout",
    "assemble_lp",
    "constraint_matrix",
    "constraint_error",
    "dump_lp",
]

# Columns above this threshold switch the equality matrix to sparse CSC
# storage; the basis factorisation downstream stays dense either way.
DENSE_COLUMN_LIMIT = 20_000

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class DiscretizationConfig:
    """Levels of the discretization: 2**density_level cells,
    2**control_level + 1 control points, 2**spline_level knot intervals."""

    density_level: int
    control_level: int
    spline_level: int
    mass_bound: float = 10.0
    midpoint_refine: bool = False

    def __post_init__(self) -> None:
        if self.density_level < 1:
            raise ValueError("density_level must be >= 1")
        if self.control_level < 0:
            raise ValueError("control_level must be >= 0")
        if self.spline_level < 1:
            raise ValueError("spline_level must be >= 1")
        if not self.mass_bound > 0.0:
            raise ValueError("mass_bound must be positive")


@dataclass(frozen=True)
class MeasureLayout:
    """Cells, control points and the variable indexing of the finite LP.

    Variable order: v_{j,i} at column j * n_controls + i, then the
    left-endpoint singular masses s_{L,i}, then the right ones.
    """

    cell_edges: np.ndarray
    controls: np.ndarray
    mass_bound: float

    @property
    def n_cells(self) -> int:
        return len(self.cell_edges) - 1

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    @property
    def cell_widths(self) -> np.ndarray:
        return np.diff(self.cell_edges)

    @property
    def n_vars(self) -> int:
        return (self.n_cells + 2) * self.n_controls

    def v_index(self, j: int, i: int) -> int:
        return j * self.n_controls + i

    @property
    def s_left_start(self) -> int:
        return self.n_cells * self.n_controls

    @property
    def s_right_start(self) -> int:
        return (self.n_cells + 1) * self.n_controls

    def cell_of(self, x) -> np.ndarray | int:
        """Index of the half-open cell containing x (last cell closed)."""
        j = np.searchsorted(self.cell_edges, x, side="right") - 1
        return np.clip(j, 0, self.n_cells - 1)


def build_layout(problem: ControlProblem, config: DiscretizationConfig) -> MeasureLayout:
    lo, hi = problem.state_lo, problem.state_hi
    m = config.density_level
    edges = lo + (hi - lo) * np.arange(2**m + 1) / 2**m
    edges[-1] = hi
    if config.midpoint_refine:
        mid = 0.5 * (lo + hi)
        j = int(np.searchsorted(edges, mid, side="right")) - 1
        edges = np.insert(edges, j + 1, 0.5 * (edges[j] + edges[j + 1]))
    k = config.control_level
    controls = problem.control_lo + (
        (problem.control_hi - problem.control_lo) * np.arange(2**k + 1) / 2**k
    )
    controls[-1] = problem.control_hi
    return MeasureLayout(cell_edges=edges, controls=controls, mass_bound=config.mass_bound)


@dataclass(frozen=True)
class DiscreteLP:
    """Finite LP over (v, s_L, s_R) >= 0: minimise objective . z subject
    to eq_matrix z = eq_rhs (n spline rows then the total-mass row) and
    total singular mass <= mass_bound."""

    objective: np.ndarray
    eq_matrix: np.ndarray | sp.csc_matrix
    eq_rhs: np.ndarray
    layout: MeasureLayout = field(repr=False)

    @property
    def n_cols(self) -> int:
        return self.eq_matrix.shape[1]

    @property
    def mass_bound(self) -> float:
        return self.layout.mass_bound

    def ineq_row(self) -> np.ndarray | sp.csc_matrix:
        """Single row bounding the total singular mass."""
        lay = self.layout
        n = self.n_cols
        if isinstance(self.eq_matrix, np.ndarray):
            row = np.zeros((1, n))
            row[0, lay.s_left_start :] = 1.0
            return row
        cols = np.arange(lay.s_left_start, n)
        return sp.csc_matrix(
            (np.ones(len(cols)), (np.zeros(len(cols), dtype=int), cols)), shape=(1, n)
        )


def _eval_grid(fn, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
    """fn on the xs x us grid, tolerating non-broadcasting callables."""
    try:
        out = np.asarray(fn(xs[:, None], us[None, :]), dtype=float)
        if out.shape == (len(xs), len(us)):
            return out
        out = np.broadcast_to(out, (len(xs), len(us))).copy()
        return out
    except Exception:
        out = np.empty((len(xs), len(us)))
        for a, x in enumerate(xs):
            for b, u in enumerate(us):
                out[a, b] = fn(float(x), float(u))
        return out


def _cell_quad_points(basis: BSplineBasis, lo: float, hi: float):
    """Gauss-Legendre nodes/weights on the cell, split at interior knots."""
    t = basis.grid.knots
    cuts = t[(t > lo) & (t < hi)]
    breaks = np.concatenate([[lo], cuts, [hi]])
    half = 0.5 * np.diff(breaks)
    mids = 0.5 * (breaks[:-1] + breaks[1:])
    xs = (mids[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    ws = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return xs, ws


def _cell_generator_integrals(
    problem: ControlProblem, basis: BSplineBasis, us: np.ndarray, lo: float, hi: float
):
    """(spline indices, integrals) with integrals[a, i] =
    int_{cell} A f_k(x, u_i) dx for k = ks[a]."""
    xs, ws = _cell_quad_points(basis, lo, hi)
    bvals = _eval_grid(problem.drift, xs, us)
    sig = _eval_grid(problem.diffusion, xs, us)
    if np.any(sig <= 0.0):
        raise ModelError("diffusion coefficient <= 0 at a quadrature node")
    svals = 0.5 * sig * sig
    alpha = problem.discount
    ks = basis.overlapping(lo, hi)
    out = np.empty((len(ks), len(us)))
    for a, k in enumerate(ks):
        f1 = basis.eval(k, xs, 1)
        f2 = basis.eval(k, xs, 2)
        integrand = bvals * f1[:, None] + svals * f2[:, None]
        if alpha != 0.0:
            integrand -= alpha * basis.eval(k, xs, 0)[:, None]
        out[a] = ws @ integrand
    return ks, out


def _boundary_values(problem: ControlProblem, basis: BSplineBasis, us: np.ndarray):
    """B f_k per control point at both endpoints, shape (n, len(us)) each."""
    n = basis.count
    left = np.zeros((n, len(us)))
    right = np.zeros((n, len(us)))
    for side, out, behavior in (
        ("left", left, problem.boundary_left),
        ("right", right, problem.boundary_right),
    ):
        endpoint = problem.state_lo if side == "left" else problem.state_hi
        for k in range(n):
            f = basis.function(k)
            if behavior.kind is BoundaryKind.JUMP_BY_CONTROL:
                for i, u in enumerate(us):
                    out[k, i] = apply_B(problem, f, side, float(u))
            else:
                out[k, :] = apply_B(problem, f, side, float(us[0]))
    return left, right


def assemble_lp(
    problem: ControlProblem, basis: BSplineBasis, layout: MeasureLayout
) -> DiscreteLP:
    """Assemble objective and constraints of the finite LP."""
    if basis.grid.state_lo != layout.cell_edges[0] or basis.grid.state_hi != layout.cell_edges[-1]:
        raise ValueError("basis and layout cover different state intervals")
    n = basis.count
    J = layout.n_cells
    us = layout.controls
    n_u = layout.n_controls
    ncols = layout.n_vars
    widths = layout.cell_widths
    costs = scaled_costs(problem)

    objective = np.zeros(ncols)
    rows_l: list[np.ndarray] = []
    cols_l: list[np.ndarray] = []
    vals_l: list[np.ndarray] = []
    i_range = np.arange(n_u)

    for j in range(J):
        lo, hi = layout.cell_edges[j], layout.cell_edges[j + 1]
        half = 0.5 * (hi - lo)
        xq = 0.5 * (lo + hi) + half * _GL_NODES
        wq = half * _GL_WEIGHTS
        objective[j * n_u : (j + 1) * n_u] = (wq @ _eval_grid(costs.c0, xq, us)) / widths[j]

        ks, integrals = _cell_generator_integrals(problem, basis, us, lo, hi)
        coef = integrals / widths[j]
        for a, k in enumerate(ks):
            nz = np.abs(coef[a]) > 0.0
            if not nz.any():
                continue
            rows_l.append(np.full(int(nz.sum()), k))
            cols_l.append(j * n_u + i_range[nz])
            vals_l.append(coef[a][nz])

    bleft, bright = _boundary_values(problem, basis, us)
    objective[layout.s_left_start : layout.s_right_start] = [costs.c1_left(float(u)) for u in us]
    objective[layout.s_right_start :] = [costs.c1_right(float(u)) for u in us]
    for k in range(n):
        for start, bv in ((layout.s_left_start, bleft[k]), (layout.s_right_start, bright[k])):
            nz = np.abs(bv) > 0.0
            if nz.any():
                rows_l.append(np.full(int(nz.sum()), k))
                cols_l.append(start + i_range[nz])
                vals_l.append(bv[nz])

    # total-mass row over the v block
    rows_l.append(np.full(J * n_u, n))
    cols_l.append(np.arange(J * n_u))
    vals_l.append(np.ones(J * n_u))

    rows = np.concatenate(rows_l)
    cols = np.concatenate(cols_l)
    vals = np.concatenate(vals_l)
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(n + 1, ncols))
    eq_matrix = coo.toarray() if ncols <= DENSE_COLUMN_LIMIT else coo.tocsc()

    eq_rhs = np.array([functional_R(problem, basis.function(k)) for k in range(n)] + [1.0])
    return DiscreteLP(objective=objective, eq_matrix=eq_matrix, eq_rhs=eq_rhs, layout=layout)


def _as_control_weights(layout: MeasureLayout, control) -> np.ndarray:
    """Per-cell probability weights over the control points.

    Accepts a (n_cells, n_controls) array, or a callable x -> weights
    which is frozen at the left endpoint of every cell.
    """
    if callable(control):
        beta = np.array([control(float(x)) for x in layout.cell_edges[:-1]], dtype=float)
    else:
        beta = np.asarray(control, dtype=float)
    if beta.shape != (layout.n_cells, layout.n_controls):
        raise ValueError(
            f"control weights must have shape {(layout.n_cells, layout.n_controls)}"
        )
    if np.any(beta < -1e-12) or np.max(np.abs(beta.sum(axis=1) - 1.0)) > 1e-6:
        raise ValueError("control weights must be probabilities summing to 1 per cell")
    return beta


def constraint_matrix(
    problem: ControlProblem,
    basis: BSplineBasis,
    layout: MeasureLayout,
    control,
) -> np.ndarray:
    """Matrix C with C[k, j] = int A f_k(x, u) eta(du, x_j) p_j(x) dx for
    the indicator p_j of cell j under the frozen relaxed control, and
    C[n, j] = |E_j|."""
    beta = _as_control_weights(layout, control)
    n = basis.count
    J = layout.n_cells
    C = np.zeros((n + 1, J))
    for j in range(J):
        lo, hi = layout.cell_edges[j], layout.cell_edges[j + 1]
        ks, integrals = _cell_generator_integrals(problem, basis, layout.controls, lo, hi)
        C[list(ks), j] = integrals @ beta[j]
    C[n, :] = layout.cell_widths
    return C


def constraint_error(
    problem: ControlProblem,
    basis: BSplineBasis,
    layout: MeasureLayout,
    density_weights,
    control,
    w_left: float,
    zeta_left,
    w_right: float,
    zeta_right,
) -> np.ndarray:
    """Residual d of the adjoint constraints for a candidate measure pair:
    d_k = R f_k - int A f_k d(mu_0 candidate) - int B f_k d(mu_1 candidate),
    d_{n+1} = 1 - int p~."""
    gamma = np.asarray(density_weights, dtype=float)
    if gamma.shape != (layout.n_cells,):
        raise ValueError(f"density weights must have shape ({layout.n_cells},)")
    zl = np.asarray(zeta_left, dtype=float)
    zr = np.asarray(zeta_right, dtype=float)
    if zl.shape != (layout.n_controls,) or zr.shape != (layout.n_controls,):
        raise ValueError("zeta vectors must have one entry per control point")
    n = basis.count
    C = constraint_matrix(problem, basis, layout, control)
    bleft, bright = _boundary_values(problem, basis, layout.controls)
    R = np.array([functional_R(problem, basis.function(k)) for k in range(n)])
    d = np.empty(n + 1)
    d[:n] = R - C[:n] @ gamma - w_left * (bleft @ zl) - w_right * (bright @ zr)
    d[n] = 1.0 - layout.cell_widths @ gamma
    return d


def dump_lp(lp: DiscreteLP, path) -> None:
    """Write the LP as plain text for external cross-checks.

    Line 1: ``n_rows n_cols`` where n_rows counts the equality rows plus
    the final mass-bound inequality row.  Then one line per row: the
    n_cols coefficients followed by the right-hand side (equality rows
    first, the inequality row last).  Final line: the objective.
    """
    if lp.n_cols > 100_000:
        raise ValueError("refusing to dump an LP this wide as dense text")
    eq = np.asarray(
        lp.eq_matrix.toarray() if sp.issparse(lp.eq_matrix) else lp.eq_matrix
    )
    ineq = np.asarray(
        lp.ineq_row().toarray() if sp.issparse(lp.ineq_row()) else lp.ineq_row()
    )
    with open(path, "w", encoding="utf-8") as out:
        out.write(f"{eq.shape[0] + 1} {lp.n_cols}\n")
        for r in range(eq.shape[0]):
            out.write(" ".join(repr(v) for v in eq[r]) + f" {lp.eq_rhs[r]!r}\n")
        out.write(" ".join(repr(v) for v in ineq[0]) + f" {lp.mass_bound!r}\n")
        out.write(" ".join(repr(v) for v in lp.objective) + "\n")
