"""
Test Simulator Module
Euler-Maruyama update, observables, reproducibility and the
symmetry-breaking run
"""

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import random_field
from skg.errors import BlowUpError, SpecMismatchError
from skg.simulation.simulator import (
    NoiseRealization,
    SimConfig,
    State,
    Trace,
    em_step,
    ensemble_run,
    frozen_path,
    histogram_modes,
    lattice_energy,
    observables,
    run,
    splitmix64,
    trajectory,
    vacuum,
    variance_slope,
)
from skg.solvers.duhamel import TimeGrid
from skg.spectral.kernels import ModelParams, build_dispersion, kernel_C
from skg.spectral.lattice import Field, LatticeSpec

BROKEN = ModelParams(gamma=1.0, mu2=-1.0, lam=1.0, power=3, sigma=0.2)


def small_config(spec, **overrides) -> SimConfig:
    values = {"spec": spec, "params": BROKEN, "dt": 0.01, "horizon": 1.0, "seed": 11}
    values.update(overrides)
    return SimConfig(**values)


# ==================== Config ====================

def test_horizon_must_be_multiple_of_dt(line8):
    with pytest.raises(ValidationError):
        small_config(line8, horizon=1.005)


def test_large_dt_warns(line8, caplog):
    small_config(line8, dt=0.2, horizon=1.0)
    assert "stability" in caplog.text


def test_steps(line8):
    assert small_config(line8).steps == 100


# ==================== Single Step ====================

def test_well_bottom_is_fixed_point(line16):
    cfg = small_config(line16, params=BROKEN.model_copy(update={"sigma": 0.0}))
    state = State.at_rest(Field.constant(line16, 1.0))
    for _ in range(10):
        state = em_step(state, cfg, Field.zeros(line16))
    assert np.max(np.abs(state.phi.values - 1.0)) <= 1e-14
    assert state.vel.sup_norm() <= 1e-14


def test_em_step_formula(line8, rng):
    cfg = small_config(line8)
    phi = random_field(line8, rng, 0.3)
    vel = random_field(line8, rng, 0.3)
    eta = random_field(line8, rng)
    out = em_step(State(phi=phi, vel=vel), cfg, eta)
    p, v = phi.values, vel.values
    lap = np.roll(p, 1) + np.roll(p, -1) - 2 * p
    new_v = v + (lap - v + p - p ** 3) * 0.01 + 0.2 * np.sqrt(0.01) * eta.values
    np.testing.assert_allclose(out.vel.values, new_v, atol=1e-15)
    np.testing.assert_allclose(out.phi.values, p + new_v * 0.01, atol=1e-15)


def test_em_step_blow_up(line8):
    cfg = small_config(line8, dt=0.1, horizon=1.0)
    state = State.at_rest(Field.constant(line8, 1e5))
    with pytest.raises(BlowUpError) as info:
        em_step(state, cfg, Field.zeros(line8))
    assert info.value.sup_norm > 1e6


def test_em_step_blow_up_reports_step(line8):
    cfg = small_config(line8, dt=0.1, horizon=1.0)
    state = State.at_rest(Field.constant(line8, 1e5))
    with pytest.raises(BlowUpError) as info:
        em_step(state, cfg, Field.zeros(line8), step=7)
    assert info.value.step == 7
    assert info.value.time == pytest.approx(0.7)


def test_em_step_lattice_mismatch(line8, line16):
    with pytest.raises(SpecMismatchError):
        em_step(State.at_rest(Field.zeros(line8)), small_config(line8), Field.zeros(line16))


def test_energy_does_not_increase(line16, rng):
    params = ModelParams(gamma=1.0, mu2=1.0, lam=1.0, power=3, sigma=0.0)
    cfg = small_config(line16, params=params, horizon=10.0)
    state = State.at_rest(random_field(line16, rng, 0.5))
    energy = lattice_energy(state, params)
    zero = Field.zeros(line16)
    for _ in range(1000):
        state = em_step(state, cfg, zero)
        new_energy = lattice_energy(state, params)
        assert new_energy <= energy + 1e-12
        energy = new_energy


def test_zero_mode_matches_kernel_to_first_order(line8):
    params = ModelParams(gamma=0.1, mu2=1.0, lam=0.0, power=3, sigma=0.0)
    table = build_dispersion(line8, params)
    errors = []
    for dt in (0.01, 0.005):
        grid = TimeGrid.from_horizon(5.0, dt)
        noise = NoiseRealization(spec=line8, dt=dt, sigma=0.0, eta=np.zeros((grid.steps, 8)))
        path = trajectory(State.at_rest(Field.constant(line8, 1.0)), params, grid, noise)
        exact = np.array([kernel_C(table, t)[0] for t in grid.times])
        errors.append(np.max(np.abs(path.values[:, 0] - exact)))
    assert errors[0] <= 1.0 * 0.01
    assert 2.0 / 1.3 <= errors[0] / errors[1] <= 2.0 * 1.3


def test_odd_equivariance_is_exact(line16, rng):
    grid = TimeGrid.from_horizon(2.0, 0.01)
    noise = NoiseRealization.sample(line16, grid.steps, grid.dt, 0.2, seed=3)
    state = State(phi=random_field(line16, rng, 0.1), vel=random_field(line16, rng, 0.1))
    forward = trajectory(state, BROKEN, grid, noise)
    mirrored = trajectory(state.negated(), BROKEN, grid, noise.negated())
    assert np.array_equal(forward.values, -mirrored.values)


# ==================== Observables ====================

def test_observables_uniform(line8):
    m, var = observables(State.at_rest(Field.constant(line8, 0.7)))
    assert m == pytest.approx(0.7)
    assert var == pytest.approx(0.0, abs=1e-15)


def test_observables_split(line8):
    values = np.array([1.0, -1.0] * 4)
    assert observables(State.at_rest(Field(spec=line8, values=values))) == (0.0, 1.0)


def test_observables_match_numpy(line16, rng):
    field = random_field(line16, rng, 3.0)
    m, var = observables(State.at_rest(field))
    assert m == pytest.approx(np.mean(field.values), abs=1e-12)
    assert var == pytest.approx(np.mean((field.values - np.mean(field.values)) ** 2), abs=1e-12)


def test_observables_offset_field(line16, rng):
    spread = 1e-3 * rng.standard_normal(line16.size)
    field = Field(spec=line16, values=1e4 + spread)
    m, var = observables(State.at_rest(field))
    reference = np.mean((field.values - np.mean(field.values)) ** 2)
    assert m == pytest.approx(1e4, abs=1e-2)
    assert var == pytest.approx(reference, abs=1e-12)
    assert var == pytest.approx(np.var(spread), rel=1e-3)


def test_histogram_modes(line8):
    field = Field(spec=line8, values=[1.0, 1.0, 1.0, -1.0, -1.0, 0.98, -0.99, 1.01])
    lo, hi = histogram_modes(field)
    assert abs(lo + 1.0) <= 0.1
    assert abs(hi - 1.0) <= 0.1
    assert histogram_modes(Field.constant(line8, 1.0))[0] is None


def test_variance_slope():
    times = list(np.linspace(0.0, 10.0, 101))
    trace = Trace(times=times, order_param=[0.0] * 101, variance=[2.0 * t + 1.0 for t in times])
    assert variance_slope(trace, 2.0, 8.0) == pytest.approx(2.0)


def test_vacuum():
    assert vacuum(BROKEN) == pytest.approx(1.0)
    assert vacuum(ModelParams(mu2=1.0)) is None


# ==================== Runs ====================

def test_splitmix64_reference_value():
    assert splitmix64(0, 0) == 0xE220A8397B1DCDAF
    assert splitmix64(0, 1) != splitmix64(0, 0)
    assert 0 <= splitmix64(2**64 - 1, 7) < 2**64


def test_quiet_start_stays_at_zero(line8):
    cfg = small_config(line8, params=BROKEN.model_copy(update={"sigma": 0.0}), initial_amplitude=0.0)
    trace = run(cfg)
    assert all(m == 0.0 for m in trace.order_param)
    assert all(v == 0.0 for v in trace.variance)


def test_run_is_reproducible(line16):
    cfg = small_config(line16, snapshot_times=[0.5, 1.0])
    first, second = run(cfg), run(cfg)
    assert first.order_param == second.order_param
    assert first.variance == second.variance
    assert [t for t, _ in first.snapshots] == [0.5, 1.0]


def test_record_every(line8):
    trace = run(small_config(line8, record_every=10))
    assert len(trace.times) == 11
    assert trace.times[-1] == pytest.approx(1.0)


def test_frozen_path_reproduces_run(line16):
    cfg = small_config(line16)
    trace = run(cfg)
    state, noise = frozen_path(cfg)
    path = trajectory(state, cfg.params, TimeGrid.from_horizon(cfg.horizon, cfg.dt), noise)
    assert [float(np.mean(row)) for row in path.values] == trace.order_param


def test_single_member_ensemble_is_run(line8):
    cfg = small_config(line8)
    (member,) = ensemble_run(cfg)
    assert member == run(cfg)


def test_ensemble_independent_of_threads(line8, monkeypatch):
    cfg = small_config(line8, ensemble=4)
    monkeypatch.setenv("SKG_THREADS", "1")
    serial = ensemble_run(cfg)
    monkeypatch.setenv("SKG_THREADS", "4")
    threaded = ensemble_run(cfg)
    assert serial == threaded
    assert serial[0].order_param != serial[1].order_param


# ==================== Symmetry Breaking ====================

@pytest.fixture(scope="module")
def broken_trace():
    spec = LatticeSpec(dim=1, sites_per_axis=128, spacing=1.0)
    cfg = SimConfig(spec=spec, params=BROKEN, dt=0.01, horizon=60.0, seed=0, snapshot_times=[60.0])
    return run(cfg)


@pytest.mark.slow
def test_variance_saturates(broken_trace):
    peak = max(broken_trace.variance)
    assert abs(variance_slope(broken_trace, 48.0, 60.0)) < 0.02 * peak


@pytest.mark.slow
def test_final_histogram_is_bimodal(broken_trace):
    lo, hi = histogram_modes(broken_trace.snapshots[-1][1])
    assert lo is not None and hi is not None
    assert abs(lo + 1.0) <= 0.3
    assert abs(hi - 1.0) <= 0.3


@pytest.mark.slow
def test_ensemble_reaches_both_wells():
    spec = LatticeSpec(dim=1, sites_per_axis=128, spacing=1.0)
    cfg = SimConfig(spec=spec, params=BROKEN, dt=0.01, horizon=60.0, seed=0, ensemble=8)
    signs = {np.sign(trace.order_param[-1]) for trace in ensemble_run(cfg)}
    assert signs == {-1.0, 1.0}
