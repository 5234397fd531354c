"""
Simulator Module
Euler-Maruyama integration of the first-order system
    d phi = v dt
    d v   = (Delta phi - gamma v - mu^2 phi - lambda phi^p) dt + sigma dW
with the semi-implicit ordering: v is updated first, then phi uses the new v.
Observables: order parameter m(t), spatial variance, snapshots.

Random numbers come from numpy's counter-based Philox generator. Ensemble
member i uses seed splitmix64(seed, i); run(cfg) is member 0.
"""

from __future__ import annotations

import logging
import math
import os
from typing import List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field as ParamField, field_validator, model_validator

from skg.errors import BlowUpError, SpecMismatchError
from skg.solvers.duhamel import SpaceTimeField, TimeGrid, field_power
from skg.spectral.kernels import ModelParams
from skg.spectral.lattice import Field, LatticeSpec, gradient_energy, laplacian_values

logger = logging.getLogger(__name__)

BLOW_UP_THRESHOLD = 1e6
MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


# ==================== Domain Types ====================

class SimConfig(BaseModel):
    """Parameters of one (or an ensemble of) Euler-Maruyama runs"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    spec: LatticeSpec
    params: ModelParams
    dt: float = ParamField(gt=0.0)
    horizon: float = ParamField(gt=0.0)
    seed: int = ParamField(0, ge=0, le=MASK64)
    record_every: int = ParamField(1, ge=1)
    snapshot_times: List[float] = []
    ensemble: int = ParamField(1, ge=1)
    initial_amplitude: float = ParamField(0.01, ge=0.0)

    @model_validator(mode="after")
    def _check_steps(self) -> "SimConfig":
        steps = round(self.horizon / self.dt)
        if steps < 1 or not math.isclose(steps * self.dt, self.horizon, rel_tol=1e-9):
            raise ValueError(f"horizon {self.horizon} is not an integral multiple of dt {self.dt}")
        limit = min(0.1, self.spec.spacing / 2.0)
        if self.dt > limit:
            logger.warning("⚠ dt=%g exceeds the stability heuristic %g", self.dt, limit)
        return self

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


class State(BaseModel):
    """Field and velocity at one time"""
    model_config = ConfigDict(frozen=True)

    phi: Field
    vel: Field

    @model_validator(mode="after")
    def _same_lattice(self) -> "State":
        if self.phi.spec != self.vel.spec:
            raise ValueError("phi and vel live on different lattices")
        return self

    @classmethod
    def at_rest(cls, phi: Field) -> "State":
        return cls(phi=phi, vel=Field.zeros(phi.spec))

    def negated(self) -> "State":
        return State(phi=Field(spec=self.phi.spec, values=-self.phi.values),
                     vel=Field(spec=self.vel.spec, values=-self.vel.values))


class Trace(BaseModel):
    """Recorded observables of one trajectory"""
    model_config = ConfigDict(frozen=True)

    times: List[float]
    order_param: List[float]
    variance: List[float]
    snapshots: List[Tuple[float, Field]] = []


class NoiseRealization(BaseModel):
    """Frozen standard-normal increments eta[n, site] for steps n = 0..steps-1"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: LatticeSpec
    dt: float
    sigma: float
    eta: np.ndarray

    @field_validator("eta", mode="before")
    @classmethod
    def _as_array(cls, value) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        array.setflags(write=False)
        return array

    @classmethod
    def sample(cls, spec: LatticeSpec, steps: int, dt: float, sigma: float, seed: int) -> "NoiseRealization":
        rng = make_rng(seed)
        return cls(spec=spec, dt=dt, sigma=sigma, eta=rng.standard_normal((steps, spec.size)))

    @property
    def steps(self) -> int:
        return self.eta.shape[0]

    def as_forcing(self, grid: TimeGrid) -> SpaceTimeField:
        """
        Piecewise-constant forcing xi = sigma eta^n / sqrt(dt) on [t_n, t_{n+1})

        Node n carries the value of step n; the final node repeats the last step.
        """
        if grid.steps != self.steps or not math.isclose(grid.dt, self.dt):
            raise SpecMismatchError("noise realization does not match the time grid")
        slices = self.sigma * self.eta / math.sqrt(self.dt)
        values = np.vstack([slices, slices[-1:]])
        return SpaceTimeField(spec=self.spec, grid=grid, values=values)

    def negated(self) -> "NoiseRealization":
        return self.model_copy(update={"eta": -self.eta})


# ==================== Random Streams ====================

def splitmix64(seed: int, index: int) -> int:
    """Seed of ensemble member `index` derived from the master seed"""
    z = (seed + (index + 1) * GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def worker_count() -> int:
    """Worker cap from SKG_THREADS (default 1)"""
    try:
        return max(1, int(os.environ.get("SKG_THREADS", "1")))
    except ValueError:
        logger.warning("⚠ ignoring non-integer SKG_THREADS=%r", os.environ.get("SKG_THREADS"))
        return 1


# ==================== Time Stepping ====================

def _em_update(phi: np.ndarray, vel: np.ndarray, eta: np.ndarray, spec: LatticeSpec,
               params: ModelParams, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    drift = (laplacian_values(phi, spec) - params.gamma * vel - params.mu2 * phi
             - params.lam * field_power(phi, params.power))
    new_vel = vel + drift * dt + params.sigma * math.sqrt(dt) * eta
    new_phi = phi + new_vel * dt
    return new_phi, new_vel


def _check_blow_up(phi: np.ndarray, step: int, dt: float) -> None:
    sup = float(np.max(np.abs(phi)))
    if not math.isfinite(sup) or sup > BLOW_UP_THRESHOLD:
        raise BlowUpError(step, step * dt, sup)


def em_step(state: State, cfg: SimConfig, noise_slice: Field, step: int = 1) -> State:
    """
    One Euler-Maruyama step

    Args:
        state: (phi^n, v^n)
        cfg: simulation config (dt and model parameters)
        noise_slice: i.i.d. standard normals eta^n
        step: index n+1 of the step being taken, reported on blow-up

    Returns:
        (phi^{n+1}, v^{n+1})

    Raises:
        BlowUpError: if sup|phi^{n+1}| exceeds 1e6
    """
    spec = state.phi.spec
    if noise_slice.spec != spec or cfg.spec != spec:
        raise SpecMismatchError("state, noise and config live on different lattices")
    phi, vel = _em_update(state.phi.values, state.vel.values, noise_slice.values, spec, cfg.params, cfg.dt)
    _check_blow_up(phi, step, cfg.dt)
    return State(phi=Field(spec=spec, values=phi), vel=Field(spec=spec, values=vel))


def observables(state: State) -> Tuple[float, float]:
    """(m, Var_x) as exact site averages"""
    return _moments(state.phi.values)


def _moments(values: np.ndarray) -> Tuple[float, float]:
    mean = float(np.mean(values))
    return mean, float(np.mean((values - mean) ** 2))


def lattice_energy(state: State, params: ModelParams) -> float:
    """sum [v^2/2 + |grad phi|^2/2 + mu^2 phi^2/2 + lambda phi^{p+1}/(p+1)] delta^d"""
    spec = state.phi.spec
    phi = state.phi.values
    local = (0.5 * state.vel.values**2 + 0.5 * params.mu2 * phi**2
             + params.lam * field_power(phi, params.power + 1) / (params.power + 1))
    return float(np.sum(local)) * spec.cell_volume + gradient_energy(state.phi)


def _initial_state(cfg: SimConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    phi = cfg.initial_amplitude * rng.standard_normal(cfg.spec.size)
    return phi, np.zeros(cfg.spec.size)


def frozen_path(cfg: SimConfig) -> Tuple[State, NoiseRealization]:
    """
    Initial state and every noise increment of ensemble member 0

    Draws from the same stream in the same order as run(cfg), so
    trajectory(*frozen_path(cfg)...) reproduces the run site by site.
    """
    rng = make_rng(splitmix64(cfg.seed, 0))
    phi, vel = _initial_state(cfg, rng)
    eta = rng.standard_normal((cfg.steps, cfg.spec.size))
    state = State(phi=Field(spec=cfg.spec, values=phi), vel=Field(spec=cfg.spec, values=vel))
    noise = NoiseRealization(spec=cfg.spec, dt=cfg.dt, sigma=cfg.params.sigma, eta=eta)
    return state, noise


def _snapshot_steps(cfg: SimConfig) -> dict:
    steps = {}
    for t in cfg.snapshot_times:
        n = int(round(t / cfg.dt))
        if 0 <= n <= cfg.steps:
            steps[n] = float(t)
        else:
            logger.warning("⚠ snapshot time %g outside [0, %g] ignored", t, cfg.horizon)
    return steps


def _run_member(cfg: SimConfig, seed: int, initial: Optional[State] = None) -> Trace:
    rng = make_rng(seed)
    if initial is None:
        phi, vel = _initial_state(cfg, rng)
    else:
        phi, vel = initial.phi.values.copy(), initial.vel.values.copy()
    snapshot_steps = _snapshot_steps(cfg)
    times: List[float] = []
    order_param: List[float] = []
    variance: List[float] = []
    snapshots: List[Tuple[float, Field]] = []

    for n in range(cfg.steps + 1):
        if n % cfg.record_every == 0:
            m, var = _moments(phi)
            times.append(n * cfg.dt)
            order_param.append(m)
            variance.append(var)
        if n in snapshot_steps:
            snapshots.append((snapshot_steps[n], Field(spec=cfg.spec, values=phi)))
        if n == cfg.steps:
            break
        eta = rng.standard_normal(cfg.spec.size)
        phi, vel = _em_update(phi, vel, eta, cfg.spec, cfg.params, cfg.dt)
        _check_blow_up(phi, n + 1, cfg.dt)

    return Trace(times=times, order_param=order_param, variance=variance, snapshots=snapshots)


def run(cfg: SimConfig, initial: Optional[State] = None) -> Trace:
    """
    Integrate one trajectory from phi(0) = eps, v(0) = 0

    eps is i.i.d. Normal(0, initial_amplitude^2) per site, drawn from the
    member-0 stream before the noise. An explicit initial state skips that draw.
    """
    return _run_member(cfg, splitmix64(cfg.seed, 0), initial)


def ensemble_run(cfg: SimConfig) -> List[Trace]:
    """Independent trajectories, merged by member index"""
    seeds = [splitmix64(cfg.seed, i) for i in range(cfg.ensemble)]
    jobs = min(worker_count(), cfg.ensemble)
    traces = Parallel(n_jobs=jobs, prefer="threads")(delayed(_run_member)(cfg, s) for s in seeds)
    logger.info("✓ ensemble of %d trajectories complete", len(traces))
    return list(traces)


def trajectory(initial: State, params: ModelParams, grid: TimeGrid,
               noise: NoiseRealization) -> SpaceTimeField:
    """
    phi on every grid node under a frozen noise path

    Uses the same update as em_step, so this is the Euler-Maruyama reference
    for the Duhamel and series solvers fed with noise.as_forcing(grid).
    """
    spec = initial.phi.spec
    if noise.spec != spec or noise.steps != grid.steps:
        raise SpecMismatchError("noise realization does not match state or grid")
    phi, vel = initial.phi.values.copy(), initial.vel.values.copy()
    out = np.empty((grid.nodes, spec.size))
    out[0] = phi
    for n in range(grid.steps):
        phi, vel = _em_update(phi, vel, noise.eta[n], spec, params, grid.dt)
        _check_blow_up(phi, n + 1, grid.dt)
        out[n + 1] = phi
    return SpaceTimeField(spec=spec, grid=grid, values=out)


# ==================== Diagnostics ====================

def variance_slope(trace: Trace, t0: float, t1: float) -> float:
    """Least-squares slope of Var_x over [t0, t1]"""
    times = np.asarray(trace.times)
    window = (times >= t0 - 1e-12) & (times <= t1 + 1e-12)
    if np.sum(window) < 2:
        raise ValueError(f"fewer than two recorded points in [{t0}, {t1}]")
    slope, _ = np.polyfit(times[window], np.asarray(trace.variance)[window], 1)
    return float(slope)


def histogram_modes(field: Field, bins: int = 40, value_range: Tuple[float, float] = (-2.0, 2.0)
                    ) -> Tuple[Optional[float], Optional[float]]:
    """
    Peak location of the site histogram on each side of zero

    Returns:
        (negative peak, positive peak); a side with no sites gives None
    """
    counts, edges = np.histogram(field.values, bins=bins, range=value_range)
    centers = 0.5 * (edges[:-1] + edges[1:])
    peaks = []
    for side in (centers < 0, centers > 0):
        side_counts = np.where(side, counts, -1)
        best = int(np.argmax(side_counts))
        peaks.append(float(centers[best]) if side_counts[best] > 0 else None)
    return peaks[0], peaks[1]


def vacuum(params: ModelParams) -> Optional[float]:
    """v = sqrt(-mu^2/lambda) in the symmetry-broken regime"""
    if params.mu2 < 0 and params.lam > 0:
        return math.sqrt(-params.mu2 / params.lam)
    return None
