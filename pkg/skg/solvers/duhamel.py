"""
Duhamel Module
Homogeneous propagation of initial data and the nonlinear Duhamel integral
equation
    phi = -lambda S*(phi^p) + S*xi + C f + S g
solved by Picard iteration. The time integral uses the trapezoid rule on a
uniform grid, evaluated modewise in spectral space.
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from skg.errors import NonConvergenceError, SpecMismatchError
from skg.spectral.kernels import DispersionTable, ModelParams, kernel_series
from skg.spectral.lattice import Field, LatticeSpec, forward_slices, inverse_slices

logger = logging.getLogger(__name__)

STALL_LIMIT = 3


# ==================== Domain Types ====================

class TimeGrid(BaseModel):
    """Uniform time nodes t_n = n dt, n = 0..steps"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float
    steps: int

    @field_validator("dt")
    @classmethod
    def _check_dt(cls, value: float) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError("dt must be a positive real")
        return value

    @field_validator("steps")
    @classmethod
    def _check_steps(cls, value: int) -> int:
        if value < 2:
            raise ValueError("a time grid needs at least 2 steps")
        return value

    @classmethod
    def from_horizon(cls, horizon: float, dt: float) -> "TimeGrid":
        steps = int(round(horizon / dt))
        if not math.isclose(steps * dt, horizon, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(f"horizon {horizon} is not an integral multiple of dt {dt}")
        return cls(dt=dt, steps=steps)

    @property
    def horizon(self) -> float:
        return self.dt * self.steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    @property
    def nodes(self) -> int:
        return self.steps + 1


class SpaceTimeField(BaseModel):
    """A field on every node of a time grid, stored as a (nodes, N^d) array"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: LatticeSpec
    grid: TimeGrid
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_array(cls, value) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_shape(self) -> "SpaceTimeField":
        expected = (self.grid.nodes, self.spec.size)
        if self.values.shape != expected:
            raise ValueError(f"SpaceTimeField shape {self.values.shape}, expected {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("SpaceTimeField contains non-finite values")
        return self

    @classmethod
    def zeros(cls, spec: LatticeSpec, grid: TimeGrid) -> "SpaceTimeField":
        return cls(spec=spec, grid=grid, values=np.zeros((grid.nodes, spec.size)))

    @classmethod
    def from_slices(cls, spec: LatticeSpec, grid: TimeGrid, slices: List[Field]) -> "SpaceTimeField":
        return cls(spec=spec, grid=grid, values=np.stack([s.values for s in slices]))

    def slice(self, n: int) -> Field:
        return Field(spec=self.spec, values=self.values[n])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def sup_distance(self, other: "SpaceTimeField") -> float:
        _check_compatible(self, other)
        return float(np.max(np.abs(self.values - other.values)))

    def with_values(self, values: np.ndarray) -> "SpaceTimeField":
        return SpaceTimeField(spec=self.spec, grid=self.grid, values=values)


class PicardResult(BaseModel):
    """Accepted fixed point with its residual certificate"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    solution: SpaceTimeField
    iterations: int
    residual: float
    residual_history: List[float]


# ==================== Helpers ====================

def _check_compatible(a: SpaceTimeField, b: SpaceTimeField) -> None:
    if a.spec != b.spec or a.grid != b.grid:
        raise SpecMismatchError("space-time fields live on different lattices or grids")


def _check_table(spec: LatticeSpec, table: DispersionTable) -> None:
    if spec != table.spec:
        raise SpecMismatchError("field and dispersion table live on different lattices")


def field_power(values: np.ndarray, power: int) -> np.ndarray:
    """phi^p by repeated multiplication, exactly odd for odd p"""
    out = values.copy()
    for _ in range(power - 1):
        out = out * values
    return out


# ==================== Operations ====================

def homogeneous_solution(f: Field, g: Field, table: DispersionTable, grid: TimeGrid) -> SpaceTimeField:
    """
    Solve L phi = 0 with phi(0) = f, d_t phi(0) = g

    Args:
        f: initial field
        g: initial velocity
        table: dispersion table on the same lattice
        grid: time grid

    Returns:
        C(t) * f + S(t) * g on every grid node
    """
    _check_table(f.spec, table)
    _check_table(g.spec, table)
    c_lag, s_lag = kernel_series(table, grid.times)
    data = forward_slices(np.stack([f.values, g.values]), f.spec)
    modes = c_lag * data[0] + s_lag * data[1]
    return SpaceTimeField(spec=f.spec, grid=grid, values=inverse_slices(modes, f.spec))


def source_convolve(h: SpaceTimeField, table: DispersionTable) -> SpaceTimeField:
    """
    psi(t_n) = int_0^{t_n} S(t_n - s) * h(s) ds by the trapezoid rule

    Evaluated per mode in spectral space. S(0) = 0 removes the upper
    endpoint, the lower endpoint carries weight 1/2.
    """
    _check_table(h.spec, table)
    grid = h.grid
    _, s_lag = kernel_series(table, grid.times)
    h_hat = forward_slices(h.values, h.spec)
    psi_hat = np.zeros_like(h_hat)
    for lag in range(1, grid.nodes):
        psi_hat[lag:] += s_lag[lag] * h_hat[: grid.nodes - lag]
    psi_hat[1:] -= 0.5 * s_lag[1:] * h_hat[0]
    psi_hat *= grid.dt
    return h.with_values(inverse_slices(psi_hat, h.spec))


def zeroth_order(
    f: Field,
    g: Field,
    xi: Optional[SpaceTimeField],
    table: DispersionTable,
    grid: TimeGrid,
) -> SpaceTimeField:
    """phi_0 = S*xi + C f + S g"""
    phi0 = homogeneous_solution(f, g, table, grid)
    if xi is None:
        return phi0
    _check_compatible(phi0, xi)
    return phi0.with_values(phi0.values + source_convolve(xi, table).values)


def duhamel_rhs(
    phi: SpaceTimeField,
    base: SpaceTimeField,
    params: ModelParams,
    table: DispersionTable,
) -> SpaceTimeField:
    """Right side of the Duhamel equation given the zeroth-order field"""
    if params.lam == 0:
        return base
    nonlinear = source_convolve(phi.with_values(field_power(phi.values, params.power)), table)
    return base.with_values(base.values - params.lam * nonlinear.values)


def duhamel_residual(
    phi: SpaceTimeField,
    f: Field,
    g: Field,
    xi: Optional[SpaceTimeField],
    params: ModelParams,
    table: DispersionTable,
) -> float:
    """sup over sites and nodes of |phi - RHS(phi)|"""
    base = zeroth_order(f, g, xi, table, phi.grid)
    return phi.sup_distance(duhamel_rhs(phi, base, params, table))


def picard_solve(
    f: Field,
    g: Field,
    xi: Optional[SpaceTimeField],
    params: ModelParams,
    table: DispersionTable,
    grid: TimeGrid,
    max_iter: int = 50,
    tol: float = 1e-10,
) -> PicardResult:
    """
    Fixed-point iteration on the Duhamel equation

    Starts from phi_0 and accepts the first iterate whose residual
    ||phi - RHS(phi)||_inf is below tol.

    Raises:
        NonConvergenceError: if the residual fails to decrease for 3
            consecutive iterations or max_iter is exhausted
    """
    base = zeroth_order(f, g, xi, table, grid)
    phi = base
    history: List[float] = []
    stalled = 0
    for iteration in range(1, max_iter + 1):
        try:
            rhs = duhamel_rhs(phi, base, params, table)
        except ValueError as exc:
            # non-finite iterate
            raise NonConvergenceError(f"Picard iterate diverged: {exc}", iteration, history) from exc
        residual = phi.sup_distance(rhs)
        logger.debug("Picard iteration %d: residual %.3e", iteration, residual)
        if history and residual >= history[-1]:
            stalled += 1
        else:
            stalled = 0
        history.append(residual)
        if residual < tol:
            logger.info("✓ Picard converged in %d iterations (residual %.3e)", iteration, residual)
            return PicardResult(solution=phi, iterations=iteration, residual=residual, residual_history=history)
        if stalled >= STALL_LIMIT:
            raise NonConvergenceError(
                f"Picard residual did not decrease for {STALL_LIMIT} consecutive iterations",
                iteration, history,
            )
        phi = rhs
    raise NonConvergenceError(f"Picard residual still {history[-1]:.3e} > {tol:.1e}", max_iter, history)
