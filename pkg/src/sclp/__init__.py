"""Singular stochastic control in one dimension: discretize the
occupation-measure linear program with cubic B-spline constraints and
piecewise-constant/point-mass measures, solve it with a built-in
simplex, and reconstruct optimal densities and relaxed controls."""

from .model import (
    BoundaryBehavior,
    BoundaryKind,
    ControlProblem,
    ModelError,
    apply_A,
    apply_B,
    bounded_follower,
    functional_R,
    make_coefficient,
    simple_particle,
)
from .splines import BSplineBasis, KnotGrid, build_basis
from .assembly import (
    DiscreteLP,
    DiscretizationConfig,
    MeasureLayout,
    assemble_lp,
    build_layout,
    constraint_error,
    constraint_matrix,
)
from .simplex import LPResult, StandardLP, Status, SolveOptions, solve
from .solution import (
    MeasureSolution,
    average_control,
    cost_error,
    extract,
    l1_density_error,
)
from .oracle import reference_table, stationary_density, threshold_control
from .simulate import CellControl, SimConfig, simulate_lta

__version__ = "0.1.0"
