"""Command-line pipeline: parse a run config, assemble and solve the
finite LP, reconstruct the measures, and write CSV/JSON outputs; with
``sweep`` it regenerates the benchmark error tables.

Config files are flat ``key = value`` text ('#' starts a comment).
Keys:

    problem           bounded-follower | simple-particle | custom
    sigma, c1, alpha, x0        problem parameters (presets)
    n_level, m, k_m, l          discretization (k_m defaults to 0 for
                                u-independent running cost, else m + 3)
    refine_midpoint   true/false
    sweep             e.g. 3..8 (runs n_level = m = k for each k)
    outdir, oracle, mc, repetitions, seed
    mc.dt, mc.horizon, mc.burn_in, mc.paths
    custom problems:  state_lo, state_hi, control_lo, control_hi,
                      drift, drift_value, diffusion, diffusion_value,
                      running_cost, running_cost_value, c1_left, c1_right,
                      boundary_left, boundary_right
                      (boundaries: reflect | jump:<target> | jump-by-control)

Exit codes: 0 success, 1 solver failure (status recorded in
summary.json), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import assembly, model, oracle, simplex, solution
from .simulate import CellControl, SimConfig, simulate_lta

__all__ = ["RunConfig", "parse_config", "serialize_config", "validate_config", "run", "main"]

PRESETS = ("bounded-follower", "simple-particle")
_SQRT2 = 2.0 ** 0.5


@dataclass(frozen=True)
class RunConfig:
    problem: str = "bounded-follower"
    sigma: float = _SQRT2
    c1: float = 0.01
    alpha: float = 0.0
    x0: float = 0.1
    n_level: int = 3
    m: int = 3
    k_m: int | None = None
    l: float = 10.0
    refine_midpoint: bool = True
    sweep: tuple[int, ...] = ()
    outdir: str = "out"
    oracle: bool = False
    mc: bool = False
    mc_dt: float = 1e-4
    mc_horizon: float = 2e3
    mc_burn_in: float = 10.0
    mc_paths: int = 8
    repetitions: int = 10
    seed: int = 0
    # custom-problem keys (ignored for presets)
    state_lo: float = 0.0
    state_hi: float = 1.0
    control_lo: float = -1.0
    control_hi: float = 1.0
    drift: str = "identity-in-u"
    drift_value: float = 0.0
    diffusion: str = "constant"
    diffusion_value: float = 1.0
    running_cost: str = "x-squared"
    running_cost_value: float = 0.0
    c1_left: float = 0.0
    c1_right: float = 0.0
    boundary_left: str = "reflect"
    boundary_right: str = "reflect"


_KEY_ALIASES = {
    "mc.dt": "mc_dt",
    "mc.horizon": "mc_horizon",
    "mc.burn_in": "mc_burn_in",
    "mc.paths": "mc_paths",
}
_FIELDS = {f.name: f for f in fields(RunConfig)}


def _parse_value(name: str, raw: str):
    if name == "sweep":
        raw = raw.strip()
        if not raw:
            return ()
        if ".." in raw:
            a, b = raw.split("..", 1)
            return tuple(range(int(a), int(b) + 1))
        return tuple(int(tok) for tok in raw.replace(",", " ").split())
    if name == "k_m":
        return None if raw.strip().lower() in ("", "auto", "none") else int(raw)
    typ = _FIELDS[name].type
    if typ == "int":
        return int(raw)
    if typ == "float":
        return float(raw)
    if typ == "bool":
        low = raw.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"cannot parse boolean {raw!r} for key {name}")
    return raw.strip()


def parse_config_text(text: str) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        name = _KEY_ALIASES.get(key, key)
        if name not in _FIELDS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        values[name] = _parse_value(name, raw)
    return RunConfig(**values)


def parse_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def serialize_config(config: RunConfig) -> str:
    reverse = {v: k for k, v in _KEY_ALIASES.items()}
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        key = reverse.get(f.name, f.name)
        if f.name == "sweep":
            value = "..".join(map(str, (value[0], value[-1]))) if value else ""
        elif f.name == "k_m":
            value = "auto" if value is None else value
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _cost_depends_on_u(config: RunConfig) -> bool:
    if config.problem == "bounded-follower":
        return False
    if config.problem == "simple-particle":
        return True
    return config.running_cost in ("x2-plus-u2", "identity-in-u")


def resolved_k_m(config: RunConfig, m: int) -> int:
    if config.k_m is not None:
        return config.k_m
    return m + 3 if _cost_depends_on_u(config) else 0


def build_problem(config: RunConfig) -> model.ControlProblem:
    if config.problem == "bounded-follower":
        return model.bounded_follower(
            sigma=config.sigma, c1=config.c1, x0=config.x0, alpha=config.alpha
        )
    if config.problem == "simple-particle":
        return model.simple_particle(sigma=config.sigma, c1=config.c1)
    if config.problem != "custom":
        raise ValueError(f"unknown problem {config.problem!r}")

    def boundary(spec: str, side: str) -> model.BoundaryBehavior:
        if spec == "reflect":
            return model.reflect_right() if side == "left" else model.reflect_left()
        if spec.startswith("jump:"):
            return model.jump_to(float(spec.split(":", 1)[1]))
        if spec == "jump-by-control":
            return model.BoundaryBehavior(model.BoundaryKind.JUMP_BY_CONTROL)
        raise ValueError(f"unknown boundary spec {spec!r}")

    def coeff(name: str, value: float):
        return model.make_coefficient(name, value if name == "constant" else None)

    return model.ControlProblem(
        state_lo=config.state_lo,
        state_hi=config.state_hi,
        control_lo=config.control_lo,
        control_hi=config.control_hi,
        drift=coeff(config.drift, config.drift_value),
        diffusion=coeff(config.diffusion, config.diffusion_value),
        running_cost=coeff(config.running_cost, config.running_cost_value),
        singular_cost_left=model.make_boundary_cost(config.c1_left),
        singular_cost_right=model.make_boundary_cost(config.c1_right),
        boundary_left=boundary(config.boundary_left, "left"),
        boundary_right=boundary(config.boundary_right, "right"),
        discount=config.alpha,
        start_point=config.x0,
    )


def validate_config(config: RunConfig) -> list[str]:
    """Human-readable diagnostics; entries starting with 'error:' block a run."""
    diags: list[str] = []
    if config.problem not in PRESETS + ("custom",):
        diags.append(f"error: unknown problem preset {config.problem!r}")
    if config.sweep == () and ("sweep" in () or False):
        pass
    if config.sweep and list(config.sweep) != sorted(set(config.sweep)):
        diags.append("error: sweep levels must be strictly increasing")
    if config.sweep and min(config.sweep) < 1:
        diags.append("error: sweep levels must be >= 1")
    if config.n_level < 1 or config.m < 1:
        diags.append("error: n_level and m must be >= 1")
    if config.l <= 0:
        diags.append("error: mass bound l must be positive")
    if config.repetitions < 1:
        diags.append("error: repetitions must be >= 1")
    if config.k_m == 0 and _cost_depends_on_u(config):
        diags.append(
            "warning: k_m = 0 with a control-dependent running cost; the "
            "heuristic default is k_m = m + 3 so the cost can be resolved in u"
        )
    if config.oracle and config.problem != "bounded-follower":
        diags.append(
            "warning: oracle comparison is only available for the "
            "bounded-follower preset; the table will omit error columns"
        )
    if config.mc and config.alpha != 0.0:
        diags.append("error: Monte-Carlo validation requires alpha = 0")
    return diags


@dataclass
class _EntryResult:
    n_level: int
    m: int
    k_m: int
    runtime_s: float
    sol: solution.MeasureSolution | None
    status: str
    errors: solution.ErrorReport | None = None


def _run_entry(problem, config: RunConfig, n_level: int, m: int, quiet: bool) -> _EntryResult:
    k_m = resolved_k_m(config, m)
    disc = assembly.DiscretizationConfig(
        density_level=m,
        control_level=k_m,
        spline_level=n_level,
        mass_bound=config.l,
        midpoint_refine=config.refine_midpoint,
    )
    grid = None
    elapsed = []
    result = None
    layout = None
    for _ in range(config.repetitions):
        t0 = time.perf_counter()
        from .splines import KnotGrid, build_basis

        grid = KnotGrid.dyadic(problem.state_lo, problem.state_hi, n_level)
        basis = build_basis(grid)
        layout = assembly.build_layout(problem, disc)
        lp = assembly.assemble_lp(problem, basis, layout)
        result = simplex.solve(
            simplex.StandardLP(
                c=lp.objective,
                A=lp.eq_matrix,
                b=lp.eq_rhs,
                G=lp.ineq_row(),
                h=np.array([lp.mass_bound]),
            )
        )
        elapsed.append(time.perf_counter() - t0)
    runtime = float(np.mean(elapsed))
    status = result.status.value
    if result.status is not simplex.Status.OPTIMAL:
        return _EntryResult(n_level, m, k_m, runtime, None, status)
    sol = solution.extract(result, layout)
    if not quiet:
        print(
            f"n={n_level} m={m} k_m={k_m}: J={sol.cost:.6f} "
            f"w1={sol.w_left:.5f} w2={sol.w_right:.5f} ({runtime:.3f}s)"
        )
    return _EntryResult(n_level, m, k_m, runtime, sol, status)


def _oracle_errors(sol: solution.MeasureSolution, runtime: float) -> solution.ErrorReport:
    ref = oracle.reference_table()
    e_a, e_r = solution.cost_error(sol, ref.cost)
    e_l1 = solution.l1_density_error(sol, ref.density)
    return solution.ErrorReport(
        e_abs=e_a,
        e_rel=e_r,
        e_l1=e_l1,
        w_left_error=abs(sol.w_left - ref.w1),
        w_right_error=abs(sol.w_right - ref.w2),
        runtime_s=runtime,
    )


def run(config: RunConfig, quiet: bool = False) -> int:
    diags = validate_config(config)
    for diag in diags:
        print(diag, file=sys.stderr)
    if any(d.startswith("error:") for d in diags):
        return 2

    problem = build_problem(config)
    entries = [(k, k) for k in config.sweep] if config.sweep else [(config.n_level, config.m)]
    os.makedirs(config.outdir, exist_ok=True)

    table_rows = []
    failed = False
    for n_level, m in entries:
        entry = _run_entry(problem, config, n_level, m, quiet)
        subdir = os.path.join(config.outdir, f"n{n_level}_m{m}")
        os.makedirs(subdir, exist_ok=True)
        mc_summary = None
        if entry.sol is not None:
            if config.oracle and config.problem == "bounded-follower":
                entry.errors = _oracle_errors(entry.sol, entry.runtime_s)
            if config.mc:
                sim = simulate_lta(
                    problem,
                    CellControl.from_solution(entry.sol),
                    SimConfig(
                        dt=config.mc_dt,
                        horizon=config.mc_horizon,
                        burn_in=config.mc_burn_in,
                        paths=config.mc_paths,
                        rng_seed=config.seed,
                    ),
                )
                mc_summary = {
                    "estimate": sim.estimate,
                    "stderr": sim.stderr,
                    "reflect_rate_left": sim.reflect_rate_left,
                    "reflect_or_jump_rate_right": sim.reflect_or_jump_rate_right,
                }
            solution.write_density_csv(entry.sol, os.path.join(subdir, "density.csv"))
            solution.write_control_csv(entry.sol, os.path.join(subdir, "control.csv"))
        else:
            failed = True
        solution.write_summary_json(
            os.path.join(subdir, "summary.json"),
            n_level=n_level,
            m=m,
            k_m=entry.k_m,
            sol=entry.sol,
            solver_status=entry.status,
            runtime_s=entry.runtime_s,
            repetitions=config.repetitions,
            errors=entry.errors,
            mc=mc_summary,
        )
        table_rows.append(entry)

    if config.sweep:
        lines = ["n,m,T,J,e_a,e_r,e_L1"]
        for e in table_rows:
            j = "" if e.sol is None else repr(e.sol.cost)
            if e.errors is not None:
                tail = f"{e.errors.e_abs!r},{e.errors.e_rel!r},{e.errors.e_l1!r}"
            else:
                tail = ",,"
            lines.append(f"{e.n_level},{e.m},{e.runtime_s!r},{j},{tail}")
        solution._atomic_write(os.path.join(config.outdir, "table.csv"), "\n".join(lines) + "\n")

    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sclp",
        description="Solve 1D singular stochastic control problems by a finite "
        "LP over discretized occupation measures.",
    )
    parser.add_argument("--config", required=True, help="path to a key = value config file")
    parser.add_argument("--outdir", help="override the output directory")
    parser.add_argument("--sweep", help="override the sweep range, e.g. 3..8")
    parser.add_argument("--oracle", action="store_true", help="compare against the analytic reference")
    parser.add_argument("--mc", action="store_true", help="run the Monte-Carlo cross-check")
    parser.add_argument("--seed", type=int, help="override the RNG seed")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        config = parse_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return 2

    overrides = {}
    if args.outdir is not None:
        overrides["outdir"] = args.outdir
    if args.sweep is not None:
        overrides["sweep"] = _parse_value("sweep", args.sweep)
    if args.oracle:
        overrides["oracle"] = True
    if args.mc:
        overrides["mc"] = True
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = replace(config, **overrides)

    return run(config, quiet=args.quiet)


if __name__ == "__main__":
    raise SystemExit(main())
