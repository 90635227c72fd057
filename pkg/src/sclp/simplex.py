"""Self-contained dense LP solver.

Solves   min c.z   s.t.  A z = b,  G z <= h,  z >= 0

by a two-phase revised simplex with an explicitly maintained dense
basis inverse.  The constraint columns may be a numpy array or a scipy
sparse matrix (occupation-measure programs can be very wide); the basis
itself is always a small dense square matrix, refactorised periodically.

Pivoting: Dantzig pricing (block-wise partial pricing once the column
count is large), a lexicographic tie-break in the ratio test, and
Bland's rule engaged after a stall of degenerate steps to guarantee
termination.  Rows are equilibrated to unit max-norm internally;
results and duals are reported in the original scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

__all__ = ["Status", "StandardLP", "LPResult", "SolveOptions", "solve"]


class Status(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"


@dataclass(frozen=True)
class StandardLP:
    """min c.z s.t. A z = b, G z <= h, z >= 0 (G may be absent)."""

    c: np.ndarray
    A: np.ndarray | sp.spmatrix
    b: np.ndarray
    G: np.ndarray | sp.spmatrix | None = None
    h: np.ndarray | None = None

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)
        if self.A.shape != (len(b), len(c)):
            raise ValueError("A has inconsistent shape")
        if (self.G is None) != (self.h is None):
            raise ValueError("G and h must be given together")
        if self.h is not None:
            object.__setattr__(self, "h", np.asarray(self.h, dtype=float))
            if self.G.shape != (len(self.h), len(c)):
                raise ValueError("G has inconsistent shape")
        for arr in (c, b) + ((self.h,) if self.h is not None else ()):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP data must be finite")


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-8           # feasibility / optimality tolerance
    pivot_tol: float = 1e-9     # smallest acceptable pivot magnitude
    max_iters: int = 200_000
    refactor_every: int = 50
    bland_stall: int = 500      # degenerate steps before Bland's rule
    partial_threshold: int = 100_000   # columns above which pricing is blocked
    block_size: int = 65_536


@dataclass(frozen=True)
class LPResult:
    status: Status
    z: np.ndarray | None
    objective: float | None
    dual: np.ndarray | None
    iterations: int
    primal_residual: float = field(default=np.nan)

    def __post_init__(self) -> None:
        if self.status is Status.OPTIMAL and self.z is None:
            raise ValueError("optimal result requires a solution vector")


class _Columns:
    """Uniform access to the stacked constraint columns [A; G | slack]."""

    def __init__(self, A, G, m_eq: int, m_ineq: int):
        self.m = m_eq + m_ineq
        self.m_eq = m_eq
        self.n_struct = A.shape[1]
        self.n = self.n_struct + m_ineq
        self.sparse = sp.issparse(A) or (G is not None and sp.issparse(G))
        if m_ineq:
            if self.sparse:
                A = sp.csc_matrix(A)
                G = sp.csc_matrix(G)
                W = sp.bmat(
                    [[A, None], [G, sp.eye(m_ineq, format="csc")]], format="csc"
                )
            else:
                W = np.zeros((self.m, self.n))
                W[:m_eq, : self.n_struct] = A
                W[m_eq:, : self.n_struct] = G
                W[m_eq:, self.n_struct :] = np.eye(m_ineq)
        else:
            W = sp.csc_matrix(A) if self.sparse else np.asarray(A, dtype=float)
        self.W = W

    def scale_rows(self, s: np.ndarray) -> None:
        if self.sparse:
            self.W = sp.diags(s) @ self.W
            self.W = self.W.tocsc()
        else:
            self.W = s[:, None] * self.W

    def col(self, j: int) -> np.ndarray:
        if self.sparse:
            return self.W[:, [j]].toarray().ravel()
        return self.W[:, j]

    def col_sparse(self, j: int):
        """(indices, values) of column j."""
        if self.sparse:
            w = self.W
            a, b = w.indptr[j], w.indptr[j + 1]
            return w.indices[a:b], w.data[a:b]
        col = self.W[:, j]
        idx = np.nonzero(col)[0]
        return idx, col[idx]

    def reduced_costs(self, c: np.ndarray, y: np.ndarray, j0: int, j1: int) -> np.ndarray:
        block = self.W[:, j0:j1]
        return c[j0:j1] - block.T @ y

    def gather(self, cols: np.ndarray) -> np.ndarray:
        if self.sparse:
            return self.W[:, cols].toarray()
        return self.W[:, cols]


def solve(lp: StandardLP, options: SolveOptions | None = None) -> LPResult:
    """Two-phase revised simplex; see module docstring."""
    opt = options or SolveOptions()
    m_eq = len(lp.b)
    m_ineq = 0 if lp.h is None else len(lp.h)
    cols = _Columns(lp.A, lp.G, m_eq, m_ineq)
    m, n = cols.m, cols.n

    rhs = np.concatenate([lp.b, lp.h]) if m_ineq else lp.b.copy()
    # row equilibration (signed so that rhs >= 0)
    if cols.sparse:
        row_max = np.abs(cols.W).max(axis=1).toarray().ravel()
    else:
        row_max = np.abs(cols.W).max(axis=1)
    row_max[row_max == 0.0] = 1.0
    scale = np.where(rhs < 0.0, -1.0, 1.0) / row_max
    cols.scale_rows(scale)
    rhs = rhs * scale

    state = _SimplexState(cols, rhs, opt)

    c1 = np.zeros(n)
    status = state.run(c1, phase=1)
    if status is Status.ITERATION_LIMIT:
        return LPResult(status, None, None, None, state.iterations)
    if state.phase1_value() > opt.tol * (1.0 + abs(rhs).max(initial=0.0)):
        return LPResult(Status.INFEASIBLE, None, None, None, state.iterations)

    c2 = np.concatenate([lp.c, np.zeros(m_ineq)])
    status = state.run(c2, phase=2)
    if status is not Status.OPTIMAL:
        return LPResult(status, None, None, None, state.iterations)

    state.refactor()
    x_full = state.solution(n)
    z = x_full[: cols.n_struct]
    y = state.dual(c2) * scale  # undo row scaling
    resid = float(np.abs(lp.A @ z - lp.b).max(initial=0.0))
    return LPResult(
        status=Status.OPTIMAL,
        z=z,
        objective=float(lp.c @ z),
        dual=y,
        iterations=state.iterations,
        primal_residual=resid,
    )


class _SimplexState:
    """Basis, inverse and pivoting loop shared by both phases."""

    def __init__(self, cols: _Columns, rhs: np.ndarray, opt: SolveOptions):
        self.cols = cols
        self.rhs = rhs
        self.opt = opt
        m, n = cols.m, cols.n
        # artificial variables occupy indices n .. n+m-1 and start basic
        self.basis = np.arange(n, n + m)
        self.in_basis = np.zeros(n, dtype=bool)
        self.binv = np.eye(m)
        self.x_b = rhs.copy()
        self.iterations = 0
        self.pivots_since_refactor = 0
        self.use_blocks = n > opt.partial_threshold
        self.block_ptr = 0

    # -- basis linear algebra ------------------------------------------------

    def refactor(self) -> None:
        B = self._basis_matrix()
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            self._repair_basis(B)
        self.x_b = self.binv @ self.rhs
        self.pivots_since_refactor = 0

    def _basis_matrix(self) -> np.ndarray:
        m = self.cols.m
        B = np.empty((m, m))
        art = self.basis >= self.cols.n
        real = ~art
        if real.any():
            B[:, real] = self.cols.gather(self.basis[real])
        for r in np.nonzero(art)[0]:
            e = np.zeros(m)
            e[self.basis[r] - self.cols.n] = 1.0
            B[:, r] = e
        return B

    def _repair_basis(self, B: np.ndarray) -> None:
        # Numerically dependent basis columns (possible after a chain of
        # degenerate pivots): swap them for artificial unit columns along
        # the uncovered left null directions, then invert the repaired
        # basis.  Artificials at zero level keep the iterate feasible.
        import scipy.linalg

        m = self.cols.m
        q, r, piv = scipy.linalg.qr(B, pivoting=True)
        diag = np.abs(np.diag(r))
        rank = int(np.sum(diag > 1e-12 * max(diag[0], 1.0)))
        used_rows = set()
        for pos, nullvec in zip(piv[rank:], q[:, rank:].T):
            order = np.argsort(-np.abs(nullvec))
            row = next(int(i) for i in order if int(i) not in used_rows)
            used_rows.add(row)
            old = self.basis[pos]
            if old < self.cols.n:
                self.in_basis[old] = False
            self.basis[pos] = self.cols.n + row
        self.binv = np.linalg.inv(self._basis_matrix())

    def dual(self, cvec: np.ndarray) -> np.ndarray:
        cb = self._basis_costs(cvec)
        return cb @ self.binv

    def _basis_costs(self, cvec: np.ndarray) -> np.ndarray:
        cb = np.zeros(self.cols.m)
        real = self.basis < self.cols.n
        cb[real] = cvec[self.basis[real]]
        if self.phase == 1:
            cb[~real] = 1.0
        return cb

    def phase1_value(self) -> float:
        art = self.basis >= self.cols.n
        return float(self.x_b[art].sum()) if art.any() else 0.0

    def solution(self, n: int) -> np.ndarray:
        x = np.zeros(n)
        real = self.basis < n
        x[self.basis[real]] = np.maximum(self.x_b[real], 0.0)
        return x

    # -- pricing ---------------------------------------------------------

    def _price_block(self, cvec, y, j0, j1, bland):
        r = self.cols.reduced_costs(cvec, y, j0, j1)
        r[self.in_basis[j0:j1]] = 0.0
        if bland:
            eligible = np.nonzero(r < -self.opt.tol)[0]
            return (j0 + int(eligible[0]), r[eligible[0]]) if len(eligible) else None
        jrel = int(np.argmin(r))
        if r[jrel] < -self.opt.tol:
            return j0 + jrel, r[jrel]
        return None

    def _entering(self, cvec, y, bland):
        n = self.cols.n
        if not self.use_blocks:
            return self._price_block(cvec, y, 0, n, bland)
        bs = self.opt.block_size
        nblocks = -(-n // bs)
        start = 0 if bland else self.block_ptr
        for step in range(nblocks):
            blk = (start + step) % nblocks
            found = self._price_block(cvec, y, blk * bs, min((blk + 1) * bs, n), bland)
            if found is not None:
                self.block_ptr = blk
                return found
        return None

    # -- ratio test --------------------------------------------------------

    def _leaving(self, w: np.ndarray, bland: bool) -> int | None:
        opt = self.opt
        cand = np.nonzero(w > opt.pivot_tol)[0]
        if len(cand) == 0:
            return None
        ratios = np.maximum(self.x_b[cand], 0.0) / w[cand]
        theta = ratios.min()
        tied = cand[ratios <= theta + opt.tol * (1.0 + theta)]
        if len(tied) == 1:
            return int(tied[0])
        if bland:
            return int(tied[np.argmin(self.basis[tied])])
        # keep only comfortably sized pivots among the tied rows, then
        # break ties lexicographically on (binv row / pivot)
        big = tied[w[tied] >= 0.05 * w[tied].max()]
        rows = big if len(big) else tied
        for col in range(self.cols.m):
            vals = self.binv[rows, col] / w[rows]
            best = vals.min()
            rows = rows[vals <= best + 1e-12 * (1.0 + abs(best))]
            if len(rows) == 1:
                break
        return int(rows[0])

    # -- main loop --------------------------------------------------------

    def run(self, cvec: np.ndarray, phase: int) -> Status:
        self.phase = phase
        opt = self.opt
        degenerate_run = 0
        bland = False
        while True:
            if self.iterations >= opt.max_iters:
                return Status.ITERATION_LIMIT
            y = self.dual(cvec)
            found = self._entering(cvec, y, bland)
            if found is None:
                return Status.OPTIMAL
            j, _ = found
            idx, vals = self.cols.col_sparse(j)
            w = self.binv[:, idx] @ vals
            r = self._leaving(w, bland)
            if r is None or w[r] < 1e-6:
                # confirm suspicious ratio tests against a fresh
                # factorization before acting on them
                if self.pivots_since_refactor > 0:
                    self.refactor()
                    continue
                if r is None:
                    if phase == 1:
                        return Status.INFEASIBLE  # numerically impossible descent
                    return Status.UNBOUNDED
            theta = max(self.x_b[r], 0.0) / w[r]

            leaving = self.basis[r]
            if leaving < self.cols.n:
                self.in_basis[leaving] = False
            self.basis[r] = j
            self.in_basis[j] = True
            self.x_b -= theta * w
            self.x_b[r] = theta
            pivot_row = self.binv[r] / w[r]
            self.binv -= np.outer(w, pivot_row)
            self.binv[r] = pivot_row

            self.iterations += 1
            self.pivots_since_refactor += 1
            if self.pivots_since_refactor >= opt.refactor_every:
                self.refactor()
            if theta <= opt.pivot_tol:
                degenerate_run += 1
                if degenerate_run >= opt.bland_stall:
                    bland = True
            else:
                degenerate_run = 0
                bland = False
