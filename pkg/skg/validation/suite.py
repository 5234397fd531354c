"""
Validation Suite
Cross-module oracles run as one report: kernel ODE identities, tree and
recursion equivalence, series remainder scaling and simulator consistency.

The fast level uses 8- and 16-site lattices. The full level adds the decay
envelope on 256 sites and the 128-site symmetry-breaking simulation.
The report carries no timestamps, so equal seeds give identical JSON.
"""

import argparse
import logging
import math
from typing import Callable, List, Literal

import numpy as np
from pydantic import BaseModel

from skg.config import RunConfig
from skg.diagrams.trees import enumerate_trees, tree_sum, weight_series
from skg.output import RunRecorder
from skg.simulation.simulator import (
    NoiseRealization,
    SimConfig,
    State,
    em_step,
    histogram_modes,
    make_rng,
    run,
    splitmix64,
    trajectory,
    variance_slope,
)
from skg.solvers.duhamel import TimeGrid, picard_solve
from skg.solvers.perturbation import compute_orders, remainder_scaling
from skg.spectral.kernels import (
    ModelParams,
    abel_defect,
    build_dispersion,
    decay_profile,
    kernel_derivative,
    kernel_series,
    mass_gap,
    ode_residual,
)
from skg.spectral.lattice import Field, LatticeSpec

logger = logging.getLogger(__name__)

Level = Literal["fast", "full"]

GAMMAS = (0.0, 1.0, 2.0)
OMEGA2S = (0.5, 1.0, 4.0)
# max/min of e^{gamma t/2} sup_x|S(t,x)| on [1, 8]; the exact kernel gives 3.34
SPREAD_TOLERANCE = 3.5


# ==================== Report Models ====================

class CheckResult(BaseModel):
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


class ValidationReport(BaseModel):
    level: str
    seed: int
    passed: bool
    checks: List[CheckResult]


def _check(name: str, value: float, tolerance: float, detail: str = "") -> CheckResult:
    passed = math.isfinite(value) and value <= tolerance
    return CheckResult(name=name, passed=passed, value=float(value), tolerance=tolerance, detail=detail)


def _single_mode(gamma: float, omega2: float):
    """Eight-site table whose zero mode has omega^2 = mu^2; other modes add Omega"""
    spec = LatticeSpec(dim=1, sites_per_axis=8, spacing=1.0)
    return build_dispersion(spec, ModelParams(gamma=gamma, mu2=omega2, lam=0.0, sigma=0.0))


# ==================== Kernel Checks ====================

def _one_sided(u: np.ndarray, h: float) -> np.ndarray:
    """Second-order forward difference at the first row"""
    return (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)


def check_kernel_ode() -> List[CheckResult]:
    times = np.linspace(0.01, 5.0, 50)
    worst_ode = 0.0
    worst_abel = 0.0
    worst_initial = 0.0
    h = 1e-4
    for gamma in GAMMAS:
        for omega2 in OMEGA2S:
            table = _single_mode(gamma, omega2)
            for t in times:
                worst_ode = max(worst_ode, ode_residual(table, t, "C"), ode_residual(table, t, "S"))
                worst_abel = max(worst_abel, abel_defect(table, float(t)))
            c_vals, s_vals = kernel_series(table, np.array([0.0, h, 2 * h]))
            worst_initial = max(
                worst_initial,
                float(np.max(np.abs(c_vals[0] - 1.0))),
                float(np.max(np.abs(s_vals[0]))),
                float(np.max(np.abs(_one_sided(c_vals, h)))),
                float(np.max(np.abs(_one_sided(s_vals, h) - 1.0))),
            )
    return [
        _check("kernel_ode_residual", worst_ode, 1e-5),
        _check("kernel_initial_conditions", worst_initial, 1e-4),
        _check("kernel_abel_identity", worst_abel, 1e-8),
    ]


def check_undamped() -> CheckResult:
    times = np.linspace(0.0, 10.0, 201)
    worst = 0.0
    for omega2 in OMEGA2S:
        table = _single_mode(0.0, omega2)
        omega = np.sqrt(table.omega2)
        c_vals, s_vals = kernel_series(table, times)
        phase = np.outer(times, omega)
        worst = max(worst,
                    float(np.max(np.abs(c_vals - np.cos(phase)))),
                    float(np.max(np.abs(s_vals - np.sin(phase) / omega))))
    return _check("undamped_reduction", worst, 1e-10)


def check_right_derivative() -> CheckResult:
    table = _single_mode(1.0, 1.0)
    value = float(np.max(np.abs(kernel_derivative(table, 0.0, "S") - 1.0)))
    return _check("kernel_S_right_derivative", value, 1e-12)


def check_decay_envelope() -> List[CheckResult]:
    spec = LatticeSpec(dim=1, sites_per_axis=256, spacing=1.0)
    params = ModelParams(gamma=1.0, mu2=1.0, lam=0.0, sigma=0.0)
    table = build_dispersion(spec, params)
    times = np.linspace(1.0, 8.0, 29)
    scaled = decay_profile(table, times) * np.exp(params.gamma * times / 2.0)
    bound = 1.0 / mass_gap(params)
    return [
        _check("decay_envelope_bound", float(np.max(scaled)), bound,
               "sup_x|S(t,x)| e^{gamma t/2} against 1/m"),
        _check("decay_envelope_spread", float(np.max(scaled) / np.min(scaled)), SPREAD_TOLERANCE,
               "max/min of the rescaled envelope on [1, 8]"),
    ]


# ==================== Solver Checks ====================

def _random_data(spec: LatticeSpec, seed: int, amplitude: float):
    rng = make_rng(seed)
    f = Field(spec=spec, values=amplitude * rng.standard_normal(spec.size))
    g = Field(spec=spec, values=amplitude * rng.standard_normal(spec.size))
    return f, g, rng


def check_tree_recursion(seed: int) -> List[CheckResult]:
    spec = LatticeSpec(dim=1, sites_per_axis=8, spacing=1.0)
    grid = TimeGrid.from_horizon(1.0, 0.05)
    params = ModelParams(gamma=1.0, mu2=1.0, lam=1.0, power=3, sigma=0.1)
    table = build_dispersion(spec, params)
    f, g, rng = _random_data(spec, splitmix64(seed, 1), 0.5)
    noise = NoiseRealization(spec=spec, dt=grid.dt, sigma=params.sigma,
                             eta=rng.standard_normal((grid.steps, spec.size)))
    xi = noise.as_forcing(grid)
    orders = compute_orders(3, f, g, xi, params, table, grid)
    worst = max(
        tree_sum(3, order.order, f, g, xi, table, grid).sup_distance(order.field)
        for order in orders
    )
    first = sum(wt.weight for wt in enumerate_trees(3, 1))
    series = weight_series(3, 3)
    sums = [sum(wt.weight for wt in enumerate_trees(3, j)) for j in range(4)]
    return [
        _check("tree_recursion_equivalence", worst, 1e-9),
        _check("tree_weight_sum_order1", float(abs(first - 27)), 0.0, f"sum={first}"),
        _check("tree_weight_series", float(sum(abs(a - b) for a, b in zip(sums, series))), 0.0,
               f"sums={sums} series={series}"),
    ]


def check_picard_vs_em(seed: int) -> List[CheckResult]:
    spec = LatticeSpec(dim=1, sites_per_axis=16, spacing=1.0)
    grid = TimeGrid.from_horizon(2.0, 1e-3)
    params = ModelParams(gamma=1.0, mu2=1.0, lam=0.01, power=3, sigma=0.01)
    table = build_dispersion(spec, params)
    f, _, rng = _random_data(spec, splitmix64(seed, 2), 0.05)
    g = Field.zeros(spec)
    noise = NoiseRealization(spec=spec, dt=grid.dt, sigma=params.sigma,
                             eta=rng.standard_normal((grid.steps, spec.size)))
    result = picard_solve(f, g, noise.as_forcing(grid), params, table, grid, tol=1e-12)
    reference = trajectory(State(phi=f, vel=g), params, grid, noise)
    return [
        _check("picard_residual", result.residual, 1e-8, f"{result.iterations} iterations"),
        _check("picard_vs_euler_maruyama", result.solution.sup_distance(reference), 2e-3),
    ]


def check_remainder_scaling(seed: int) -> CheckResult:
    spec = LatticeSpec(dim=1, sites_per_axis=8, spacing=1.0)
    grid = TimeGrid.from_horizon(2.0, 0.02)
    params = ModelParams(gamma=1.0, mu2=1.0, lam=0.02, power=3, sigma=0.0)
    table = build_dispersion(spec, params)
    f, _, _ = _random_data(spec, splitmix64(seed, 3), 0.5)
    g = Field.zeros(spec)
    orders = compute_orders(2, f, g, None, params, table, grid)
    solutions = {}
    for lam in (0.02, 0.01):
        scaled = params.model_copy(update={"lam": lam})
        solutions[lam] = picard_solve(f, g, None, scaled, table, grid, tol=1e-13).solution
    rows = remainder_scaling(orders, solutions)
    ratio = rows[1].gap / rows[0].gap
    passed = 8 * 0.75 <= ratio <= 8 * 1.25
    return CheckResult(name="series_remainder_scaling", passed=passed, value=ratio,
                       tolerance=8 * 0.25, detail="gap(lambda)/gap(lambda/2) against 2^3")


# ==================== Simulator Checks ====================

def check_fixed_point() -> CheckResult:
    spec = LatticeSpec(dim=1, sites_per_axis=16, spacing=1.0)
    params = ModelParams(gamma=1.0, mu2=-1.0, lam=1.0, power=3, sigma=0.0)
    cfg = SimConfig(spec=spec, params=params, dt=0.01, horizon=0.01)
    state = State.at_rest(Field.constant(spec, 1.0))
    stepped = em_step(state, cfg, Field.zeros(spec))
    change = max(float(np.max(np.abs(stepped.phi.values - 1.0))), stepped.vel.sup_norm())
    return _check("well_bottom_fixed_point", change, 1e-14)


def check_equivariance(seed: int) -> CheckResult:
    spec = LatticeSpec(dim=1, sites_per_axis=16, spacing=1.0)
    params = ModelParams(gamma=1.0, mu2=-1.0, lam=1.0, power=3, sigma=0.2)
    grid = TimeGrid.from_horizon(2.0, 0.01)
    f, g, _ = _random_data(spec, splitmix64(seed, 4), 0.1)
    noise = NoiseRealization.sample(spec, grid.steps, grid.dt, params.sigma, splitmix64(seed, 5))
    state = State(phi=f, vel=g)
    forward = trajectory(state, params, grid, noise)
    mirrored = trajectory(state.negated(), params, grid, noise.negated())
    return _check("odd_equivariance", float(np.max(np.abs(forward.values + mirrored.values))), 0.0)


def check_symmetry_breaking(seed: int) -> List[CheckResult]:
    spec = LatticeSpec(dim=1, sites_per_axis=128, spacing=1.0)
    params = ModelParams(gamma=1.0, mu2=-1.0, lam=1.0, power=3, sigma=0.2)
    cfg = SimConfig(spec=spec, params=params, dt=0.01, horizon=60.0, seed=seed, snapshot_times=[60.0])
    trace = run(cfg)
    peak = max(trace.variance)
    slope = abs(variance_slope(trace, 48.0, 60.0))
    lo, hi = histogram_modes(trace.snapshots[-1][1])
    distance = max(abs(lo + 1.0) if lo is not None else math.inf,
                   abs(hi - 1.0) if hi is not None else math.inf)
    return [
        _check("variance_saturation", slope / peak, 0.02, "slope over [48, 60] / peak variance"),
        _check("bimodal_histogram", distance, 0.3, f"peaks at {lo} and {hi}"),
    ]


# ==================== Suite ====================

def _fast_checks(seed: int) -> List[Callable[[], object]]:
    return [
        check_kernel_ode,
        check_undamped,
        check_right_derivative,
        lambda: check_tree_recursion(seed),
        lambda: check_picard_vs_em(seed),
        lambda: check_remainder_scaling(seed),
        check_fixed_point,
        lambda: check_equivariance(seed),
    ]


def _full_checks(seed: int) -> List[Callable[[], object]]:
    return [check_decay_envelope, lambda: check_symmetry_breaking(seed)]


def validate_suite(level: Level = "fast", seed: int = 0) -> ValidationReport:
    """
    Run the cross-module oracles

    Args:
        level: "fast" (small lattices) or "full" (adds the large-lattice checks)
        seed: master seed of every random input

    Returns:
        ValidationReport with one CheckResult per check, in a fixed order
    """
    jobs = _fast_checks(seed) + (_full_checks(seed) if level == "full" else [])
    checks: List[CheckResult] = []
    for job in jobs:
        outcome = job()
        checks.extend(outcome if isinstance(outcome, list) else [outcome])
    for check in checks:
        logger.info("%s %s: %.3e (tolerance %.1e)", "✓" if check.passed else "✗",
                    check.name, check.value, check.tolerance)
    return ValidationReport(level=level, seed=seed, passed=all(c.passed for c in checks), checks=checks)


# ==================== CLI ====================

def run_validate(cfg: RunConfig, args: argparse.Namespace) -> int:
    report = validate_suite(cfg.level, cfg.seed)
    recorder = RunRecorder(args.out, "validate", cfg)
    recorder.model("report.json", report)
    recorder.finish()
    failed = [c.name for c in report.checks if not c.passed]
    if failed:
        print(f"✗ {len(failed)} of {len(report.checks)} checks failed: {', '.join(failed)}")
        return 2
    print(f"✓ all {len(report.checks)} {cfg.level} checks passed")
    return 0


def register(subparsers, parents: List[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("validate", parents=parents, help="cross-solver validation suite")
    parser.add_argument("--level", choices=["fast", "full"], default=None, help="check level")
    parser.set_defaults(handler=run_validate)
