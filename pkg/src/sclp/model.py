"""Problem definition for one-dimensional singular stochastic control.

A controlled diffusion dX = b(X,u) dt + sigma(X,u) dW + dxi lives on a
compact state interval E = [state_lo, state_hi] with controls in
U = [control_lo, control_hi].  The singular process xi acts only at the
two endpoints, either as a reflection or as a jump.  Running cost accrues
at rate c0(X,u) dt and singular cost against dxi.

Two differential operators drive everything downstream:

    continuous part  A f(x,u) = b(x,u) f'(x) + (1/2) sigma^2(x,u) f''(x)
                                - alpha f(x)
    boundary part    B f      = +f'(lo) | -f'(hi) | f(target) - f(endpoint)

together with the linear functional R f = -alpha f(x0) (zero for the
long-term average criterion, alpha = 0).

Note on the 1/2: the diffusion term carries the Ito factor 1/2 on
sigma^2 f''.  This is the convention under which the known stationary
density of the bounded-follower benchmark (exp of -2 b / sigma^2
integrals) is reproduced, and the regression suite pins it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Literal, Protocol

__all__ = [
    "BoundaryKind",
    "BoundaryBehavior",
    "ControlProblem",
    "ScaledCosts",
    "ModelError",
    "TestFunction",
    "apply_A",
    "apply_B",
    "functional_R",
    "scaled_costs",
    "make_coefficient",
    "make_boundary_cost",
    "bounded_follower",
    "simple_particle",
    "COEFFICIENT_NAMES",
]

Side = Literal["left", "right"]


class ModelError(ValueError):
    """Problem data violates a model requirement (e.g. sigma <= 0)."""


class TestFunction(Protocol):
    """Twice-differentiable scalar function; call as f(x, derivative)."""

    def __call__(self, x: float, derivative: int = 0) -> float: ...


class BoundaryKind(Enum):
    REFLECT_RIGHT = "reflect-right"
    REFLECT_LEFT = "reflect-left"
    JUMP_TO = "jump-to"
    JUMP_BY_CONTROL = "jump-by-control"


@dataclass(frozen=True)
class BoundaryBehavior:
    """Endpoint behaviour of the singular process xi."""

    kind: BoundaryKind
    target: float | None = None

    def __post_init__(self) -> None:
        if self.kind is BoundaryKind.JUMP_TO and self.target is None:
            raise ValueError("jump-to boundary requires a target")
        if self.kind is not BoundaryKind.JUMP_TO and self.target is not None:
            raise ValueError(f"{self.kind.value} boundary takes no target")


def reflect_right() -> BoundaryBehavior:
    return BoundaryBehavior(BoundaryKind.REFLECT_RIGHT)


def reflect_left() -> BoundaryBehavior:
    return BoundaryBehavior(BoundaryKind.REFLECT_LEFT)


def jump_to(target: float) -> BoundaryBehavior:
    return BoundaryBehavior(BoundaryKind.JUMP_TO, target)


Coefficient = Callable[[float, float], float]
BoundaryCost = Callable[[float], float]


@dataclass(frozen=True)
class ControlProblem:
    """Immutable bundle of spaces, coefficients, costs and boundary rules.

    Coefficients are callables (x, u) -> value and must accept numpy
    arrays with broadcasting (all registry-built coefficients do).
    ``start_point`` only enters the problem through R f = -alpha f(x0),
    so it may be omitted when ``discount`` is zero.
    """

    state_lo: float
    state_hi: float
    control_lo: float
    control_hi: float
    drift: Coefficient
    diffusion: Coefficient
    running_cost: Coefficient
    singular_cost_left: BoundaryCost
    singular_cost_right: BoundaryCost
    boundary_left: BoundaryBehavior
    boundary_right: BoundaryBehavior
    discount: float = 0.0
    start_point: float | None = None

    def __post_init__(self) -> None:
        if not self.state_lo < self.state_hi:
            raise ValueError("state interval must satisfy state_lo < state_hi")
        if not self.control_lo < self.control_hi:
            raise ValueError("control interval must satisfy control_lo < control_hi")
        if self.discount < 0.0:
            raise ValueError("discount must be >= 0")
        if self.discount > 0.0:
            if self.start_point is None:
                raise ValueError("discounted problems need a start_point")
            if not self.state_lo <= self.start_point <= self.state_hi:
                raise ValueError("start_point outside the state interval")
        self._check_boundary(self.boundary_left, "left")
        self._check_boundary(self.boundary_right, "right")
        self._sample_check()

    def _check_boundary(self, behavior: BoundaryBehavior, side: Side) -> None:
        kind = behavior.kind
        if side == "left" and kind is BoundaryKind.REFLECT_LEFT:
            raise ValueError("reflect-left is only legal at the right endpoint")
        if side == "right" and kind is BoundaryKind.REFLECT_RIGHT:
            raise ValueError("reflect-right is only legal at the left endpoint")
        if kind is BoundaryKind.JUMP_TO:
            endpoint = self.state_lo if side == "left" else self.state_hi
            opposite = self.state_hi if side == "left" else self.state_lo
            t = behavior.target
            inside = self.state_lo < t < self.state_hi
            if not (inside or t == opposite):
                raise ValueError(
                    f"jump target {t} must lie strictly inside the state interval "
                    f"or at the opposite endpoint"
                )
            if t == endpoint:
                raise ValueError("jump target coincides with its own endpoint")

    def _sample_check(self, points: int = 9) -> None:
        # Coarse screen at construction; assembly re-checks at every
        # quadrature node it actually uses.
        for ix in range(points):
            x = self.state_lo + (self.state_hi - self.state_lo) * ix / (points - 1)
            for iu in range(points):
                u = self.control_lo + (self.control_hi - self.control_lo) * iu / (points - 1)
                if not float(self.diffusion(x, u)) > 0.0:
                    raise ModelError(f"diffusion must be positive, got sigma({x},{u}) <= 0")
                if float(self.running_cost(x, u)) < 0.0:
                    raise ModelError(f"running cost must be nonnegative at ({x},{u})")
        for iu in range(points):
            u = self.control_lo + (self.control_hi - self.control_lo) * iu / (points - 1)
            if float(self.singular_cost_left(u)) < 0.0 or float(self.singular_cost_right(u)) < 0.0:
                raise ModelError("singular costs must be nonnegative")

    def check_domain(self, x: float, u: float) -> None:
        if not self.state_lo <= x <= self.state_hi:
            raise ValueError(f"x={x} outside state interval [{self.state_lo}, {self.state_hi}]")
        if not self.control_lo <= u <= self.control_hi:
            raise ValueError(f"u={u} outside control interval [{self.control_lo}, {self.control_hi}]")


@dataclass(frozen=True)
class ScaledCosts:
    """Costs entering the linear program: raw when alpha = 0, divided by
    alpha when alpha > 0 (the discounted criterion normalises the
    occupation measures to unit mass)."""

    c0: Coefficient
    c1_left: BoundaryCost
    c1_right: BoundaryCost


def scaled_costs(problem: ControlProblem) -> ScaledCosts:
    alpha = problem.discount
    if alpha == 0.0:
        return ScaledCosts(
            problem.running_cost, problem.singular_cost_left, problem.singular_cost_right
        )
    c0, cl, cr = problem.running_cost, problem.singular_cost_left, problem.singular_cost_right
    return ScaledCosts(
        lambda x, u: c0(x, u) / alpha,
        lambda u: cl(u) / alpha,
        lambda u: cr(u) / alpha,
    )


def apply_A(problem: ControlProblem, f: TestFunction, x: float, u: float) -> float:
    """Continuous generator with discount shift:
    b f' + (1/2) sigma^2 f'' - alpha f."""
    problem.check_domain(x, u)
    sig = problem.diffusion(x, u)
    value = problem.drift(x, u) * f(x, 1) + 0.5 * sig * sig * f(x, 2)
    if problem.discount != 0.0:
        value -= problem.discount * f(x, 0)
    return value


def apply_B(problem: ControlProblem, f: TestFunction, side: Side, u: float) -> float:
    """Singular generator at one endpoint: +-f' for reflections,
    f(target) - f(endpoint) for jumps."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if not problem.control_lo <= u <= problem.control_hi:
        raise ValueError(f"u={u} outside control interval")
    endpoint = problem.state_lo if side == "left" else problem.state_hi
    behavior = problem.boundary_left if side == "left" else problem.boundary_right
    kind = behavior.kind
    if kind is BoundaryKind.REFLECT_RIGHT:
        return f(endpoint, 1)
    if kind is BoundaryKind.REFLECT_LEFT:
        return -f(endpoint, 1)
    if kind is BoundaryKind.JUMP_TO:
        return f(behavior.target, 0) - f(endpoint, 0)
    target = endpoint + u
    if not problem.state_lo <= target <= problem.state_hi:
        raise ValueError(f"control jump to {target} leaves the state interval")
    return f(target, 0) - f(endpoint, 0)


def functional_R(problem: ControlProblem, f: TestFunction) -> float:
    """Right-hand-side functional R f = -alpha f(x0)."""
    if problem.discount == 0.0:
        return 0.0
    return -problem.discount * f(problem.start_point, 0)


# ---------------------------------------------------------------------------
# Coefficient registry.  Config files refer to coefficients by these names;
# arbitrary user code is deliberately not accepted there.  The closures are
# written so that scalar and ndarray inputs both work, and so that numba can
# compile them for the Monte-Carlo validator.

def _constant(value: float) -> Coefficient:
    def coeff(x, u):
        return value + 0.0 * x + 0.0 * u

    return coeff


def _identity_in_u() -> Coefficient:
    def coeff(x, u):
        return u + 0.0 * x

    return coeff


def _x_squared() -> Coefficient:
    def coeff(x, u):
        return x * x + 0.0 * u

    return coeff


def _x2_plus_u2() -> Coefficient:
    def coeff(x, u):
        return x * x + u * u

    return coeff


_REGISTRY: dict[str, Callable[..., Coefficient]] = {
    "constant": _constant,
    "identity-in-u": _identity_in_u,
    "x-squared": _x_squared,
    "x2-plus-u2": _x2_plus_u2,
}

COEFFICIENT_NAMES = tuple(sorted(_REGISTRY))


def make_coefficient(name: str, value: float | None = None) -> Coefficient:
    """Builtin coefficient by registry name; 'constant' takes a value."""
    if name not in _REGISTRY:
        raise ValueError(f"unknown coefficient {name!r}; known: {', '.join(COEFFICIENT_NAMES)}")
    if name == "constant":
        if value is None:
            raise ValueError("coefficient 'constant' needs a value")
        return _REGISTRY[name](value)
    if value is not None:
        raise ValueError(f"coefficient {name!r} takes no value")
    return _REGISTRY[name]()


def make_boundary_cost(value: float) -> BoundaryCost:
    def cost(u):
        return value + 0.0 * u

    return cost


# ---------------------------------------------------------------------------
# Benchmark presets.

def bounded_follower(
    sigma: float = 2.0 ** 0.5,
    c1: float = 0.01,
    x0: float = 0.1,
    alpha: float = 0.0,
) -> ControlProblem:
    """Modified bounded follower on [0,1]: drift u, constant sigma,
    running cost x^2, reflection to the right at 0, jump from 1 to 0
    with cost c1 per jump."""
    return ControlProblem(
        state_lo=0.0,
        state_hi=1.0,
        control_lo=-1.0,
        control_hi=1.0,
        drift=make_coefficient("identity-in-u"),
        diffusion=make_coefficient("constant", sigma),
        running_cost=make_coefficient("x-squared"),
        singular_cost_left=make_boundary_cost(0.0),
        singular_cost_right=make_boundary_cost(c1),
        boundary_left=reflect_right(),
        boundary_right=jump_to(0.0),
        discount=alpha,
        start_point=x0,
    )


def simple_particle(sigma: float = 2.0 ** 0.5 / 2.0, c1: float = 1.0) -> ControlProblem:
    """Particle confined to [-1,1]: drift u, constant sigma, running cost
    x^2 + u^2, reflecting at both walls with cost c1 per unit of
    boundary local time."""
    return ControlProblem(
        state_lo=-1.0,
        state_hi=1.0,
        control_lo=-1.0,
        control_hi=1.0,
        drift=make_coefficient("identity-in-u"),
        diffusion=make_coefficient("constant", sigma),
        running_cost=make_coefficient("x2-plus-u2"),
        singular_cost_left=make_boundary_cost(c1),
        singular_cost_right=make_boundary_cost(c1),
        boundary_left=reflect_right(),
        boundary_right=reflect_left(),
    )
