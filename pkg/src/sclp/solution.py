"""Measure reconstruction from LP solutions, error metrics and outputs.

The LP works in cell masses v_{j,i} and singular point masses s.  This
module inverts that change of variables back to the measure data: a
piecewise-constant state density (gamma_j on cell j), per-cell
probability vectors over the control points (the relaxed control), and
the two singular weights with their control distributions.  Cells that
carry no mass get the uniform control distribution; any convention is
immaterial there since the density vanishes.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .assembly import MeasureLayout, _GL_NODES, _GL_WEIGHTS
from .simplex import LPResult, Status

__all__ = [
    "MeasureSolution",
    "ErrorReport",
    "extract",
    "average_control",
    "l1_density_error",
    "cost_error",
    "write_density_csv",
    "write_control_csv",
    "write_summary_json",
]

_ZERO_MASS = 1e-14


@dataclass(frozen=True)
class MeasureSolution:
    """Optimal measures of the finite LP.

    density[j] is the state-space density value on cell j (so that
    sum_j density[j] |E_j| = 1), control_weights[j] the probability over
    the control points when the state is in cell j, and (w_left,
    zeta_left) / (w_right, zeta_right) the singular masses at the
    endpoints with their control distributions.
    """

    layout: MeasureLayout = field(repr=False)
    density: np.ndarray
    control_weights: np.ndarray = field(repr=False)
    w_left: float
    w_right: float
    zeta_left: np.ndarray
    zeta_right: np.ndarray
    cost: float

    @property
    def cell_masses(self) -> np.ndarray:
        return self.density * self.layout.cell_widths


def extract(result: LPResult, layout: MeasureLayout) -> MeasureSolution:
    """Invert the v/s change of variables of an optimal LP result."""
    if result.status is not Status.OPTIMAL:
        raise ValueError(f"cannot extract measures from a {result.status.value} result")
    n_u = layout.n_controls
    J = layout.n_cells
    v = np.maximum(result.z[: J * n_u].reshape(J, n_u), 0.0)
    s_left = np.maximum(result.z[layout.s_left_start : layout.s_right_start], 0.0)
    s_right = np.maximum(result.z[layout.s_right_start :], 0.0)

    masses = v.sum(axis=1)
    density = masses / layout.cell_widths
    beta = np.full((J, n_u), 1.0 / n_u)
    carried = masses > _ZERO_MASS
    beta[carried] = v[carried] / masses[carried, None]

    w_left = float(s_left.sum())
    w_right = float(s_right.sum())
    zeta_left = s_left / w_left if w_left > _ZERO_MASS else np.full(n_u, 1.0 / n_u)
    zeta_right = s_right / w_right if w_right > _ZERO_MASS else np.full(n_u, 1.0 / n_u)

    return MeasureSolution(
        layout=layout,
        density=density,
        control_weights=beta,
        w_left=w_left,
        w_right=w_right,
        zeta_left=zeta_left,
        zeta_right=zeta_right,
        cost=float(result.objective),
    )


def average_control(sol: MeasureSolution, x: float) -> float:
    """Mean control value at state x: int u eta(du, x)."""
    lay = sol.layout
    if not lay.cell_edges[0] <= x <= lay.cell_edges[-1]:
        raise ValueError(f"x={x} outside the state interval")
    j = int(lay.cell_of(x))
    return float(sol.control_weights[j] @ lay.controls)


def average_control_values(sol: MeasureSolution) -> np.ndarray:
    """Per-cell mean control values."""
    return sol.control_weights @ sol.layout.controls


def l1_density_error(sol: MeasureSolution, reference) -> float:
    """L1 distance between the piecewise-constant density and a smooth
    reference, integrated by 5-point Gauss-Legendre per cell."""
    lay = sol.layout
    total = 0.0
    for j in range(lay.n_cells):
        lo, hi = lay.cell_edges[j], lay.cell_edges[j + 1]
        half = 0.5 * (hi - lo)
        xs = 0.5 * (lo + hi) + half * _GL_NODES
        vals = np.array([abs(sol.density[j] - reference(float(x))) for x in xs])
        total += half * float(_GL_WEIGHTS @ vals)
    return total


def cost_error(sol: MeasureSolution, reference_cost: float) -> tuple[float, float]:
    """Absolute and relative error of the computed cost against a
    reference value.  Relative error is NaN when the reference vanishes
    but the absolute error does not."""
    e_a = abs(sol.cost - reference_cost)
    if reference_cost == 0.0:
        return e_a, 0.0 if e_a == 0.0 else math.nan
    return e_a, e_a / abs(reference_cost)


@dataclass(frozen=True)
class ErrorReport:
    """Error metrics of one run against a reference solution."""

    e_abs: float
    e_rel: float
    e_l1: float
    w_left_error: float
    w_right_error: float
    runtime_s: float


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as out:
        out.write(text)
    os.replace(tmp, path)


def write_density_csv(sol: MeasureSolution, path) -> None:
    lay = sol.layout
    lines = ["x_left,x_right,gamma"]
    for j in range(lay.n_cells):
        lines.append(f"{lay.cell_edges[j]!r},{lay.cell_edges[j+1]!r},{sol.density[j]!r}")
    _atomic_write(path, "\n".join(lines) + "\n")


def write_control_csv(sol: MeasureSolution, path) -> None:
    lay = sol.layout
    n_u = lay.n_controls
    head = ["x_left", "x_right"]
    head += [f"u_{i}" for i in range(n_u)]
    head += [f"beta_{i}" for i in range(n_u)]
    lines = [",".join(head)]
    u_part = ",".join(repr(float(u)) for u in lay.controls)
    for j in range(lay.n_cells):
        b_part = ",".join(repr(float(b)) for b in sol.control_weights[j])
        lines.append(f"{lay.cell_edges[j]!r},{lay.cell_edges[j+1]!r},{u_part},{b_part}")
    _atomic_write(path, "\n".join(lines) + "\n")


def write_summary_json(
    path,
    *,
    n_level: int,
    m: int,
    k_m: int,
    sol: MeasureSolution | None,
    solver_status: str,
    runtime_s: float,
    repetitions: int,
    errors: ErrorReport | None = None,
    mc: dict | None = None,
) -> None:
    """Fixed-schema run summary.  ``n`` is the spline level as reported
    in sweep tables; ``n_nominal`` the 2**n + 2 basis count bookkeeping."""
    summary = {
        "n": n_level,
        "m": m,
        "k_m": k_m,
        "J": None if sol is None else sol.cost,
        "w1": None if sol is None else sol.w_left,
        "w2": None if sol is None else sol.w_right,
        "e_a": None if errors is None else errors.e_abs,
        "e_r": None if errors is None else errors.e_rel,
        "e_L1": None if errors is None else errors.e_l1,
        "runtime_s": runtime_s,
        "solver_status": solver_status,
        "n_nominal": 2**n_level + 2,
        "repetitions": repetitions,
    }
    if mc is not None:
        summary["mc"] = mc
    _atomic_write(path, json.dumps(summary, indent=2) + "\n")
