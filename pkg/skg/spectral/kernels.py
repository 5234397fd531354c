"""
Kernels Module
Characteristic roots and the retarded kernel pair C(t,p), S(t,p) of the damped
lattice Klein-Gordon operator L = d_t^2 + gamma d_t - Delta_delta + mu^2.

Per mode, r_pm = (-gamma +- sqrt(gamma^2 - 4 omega^2)) / 2 with
omega^2 = Omega_delta(p) + mu^2, and
    S(t) = (e^{r+ t} - e^{r- t}) / (r+ - r-)
    C(t) = (r+ e^{r- t} - r- e^{r+ t}) / (r+ - r-)
for t >= 0, both zero for t < 0. S is the retarded Green function in momentum
space. Kernels are evaluated from complex exponentials; modes inside the
critical window |r+ - r-| < 1e-8 max(1, gamma) use the double-root limits
S = t e^{-gamma t/2}, C = e^{-gamma t/2}(1 + gamma t/2).
"""

from __future__ import annotations

import logging
from typing import Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as ParamField

from skg.spectral.lattice import (
    Field,
    LatticeSpec,
    SpectralField,
    dft_inverse,
    site_distances,
    symbol_table,
)

logger = logging.getLogger(__name__)

CRITICAL_WINDOW = 1e-8

KernelKind = Literal["C", "S"]
TimeLike = Union[float, np.ndarray]


# ==================== Domain Types ====================

class ModelParams(BaseModel):
    """Physical parameters of the damped stochastic Klein-Gordon equation"""
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    gamma: float = ParamField(1.0, ge=0.0)
    mu2: float = -1.0
    lam: float = ParamField(1.0, alias="lambda")
    power: int = ParamField(3, ge=1)
    sigma: float = ParamField(0.2, ge=0.0)

    def has_mass_gap(self) -> bool:
        return self.mu2 > self.gamma**2 / 4.0


class DispersionTable(BaseModel):
    """omega^2 and the characteristic roots of every lattice mode"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: LatticeSpec
    params: ModelParams
    omega2: np.ndarray
    roots: np.ndarray  # shape (N^d, 2): columns r_plus, r_minus
    critical: np.ndarray  # modes inside the double-root window

    @property
    def r_plus(self) -> np.ndarray:
        return self.roots[:, 0]

    @property
    def r_minus(self) -> np.ndarray:
        return self.roots[:, 1]


class KernelSlice(BaseModel):
    """C(t,p) and S(t,p) for every mode at one time"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    time: float
    c_modes: np.ndarray
    s_modes: np.ndarray


# ==================== Dispersion ====================

def build_dispersion(spec: LatticeSpec, params: ModelParams) -> DispersionTable:
    """
    Build the per-mode dispersion table

    The complex square root takes the principal branch of a discriminant with
    +0 imaginary part, so underdamped modes get imag(r_plus) > 0.
    """
    omega2 = symbol_table(spec) + params.mu2
    gamma = params.gamma
    discriminant = (gamma**2 - 4.0 * omega2) + 0j
    root = np.sqrt(discriminant)
    r_plus = (-gamma + root) / 2.0
    r_minus = (-gamma - root) / 2.0
    critical = np.abs(root) < CRITICAL_WINDOW * max(1.0, gamma)
    if np.any(critical):
        logger.debug("%d modes inside the critical-damping window", int(np.sum(critical)))
    if np.any(omega2 < 0):
        logger.debug("%d unstable modes (omega^2 < 0)", int(np.sum(omega2 < 0)))
    roots = np.stack([r_plus, r_minus], axis=1)
    for array in (omega2, roots, critical):
        array.setflags(write=False)
    return DispersionTable(spec=spec, params=params, omega2=omega2, roots=roots, critical=critical)


def mass_gap(params: ModelParams) -> Optional[float]:
    """m = sqrt(mu^2 - gamma^2/4), or None when the mass-gap condition fails"""
    m2 = params.mu2 - params.gamma**2 / 4.0
    return float(np.sqrt(m2)) if m2 > 0 else None


# ==================== Time Domain ====================

def kernel_series(table: DispersionTable, times: TimeLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    C and S at many times at once

    Args:
        table: Dispersion table
        times: scalar or 1-D array of times

    Returns:
        (C, S), each of shape (len(times), N^d); rows for t < 0 are zero
    """
    t_in = np.atleast_1d(np.asarray(times, dtype=float))
    past = t_in < 0
    t = np.where(past, 0.0, t_in)
    r_plus = table.r_plus
    r_minus = table.r_minus
    critical = table.critical
    diff = np.where(critical, 1.0 + 0j, r_plus - r_minus)

    e_plus = np.exp(np.outer(t, r_plus))
    e_minus = np.exp(np.outer(t, r_minus))
    s_vals = ((e_plus - e_minus) / diff).real
    c_vals = ((r_plus * e_minus - r_minus * e_plus) / diff).real

    if np.any(critical):
        half_gamma = table.params.gamma / 2.0
        envelope = np.exp(-half_gamma * t)[:, None]
        s_crit = t[:, None] * envelope
        c_crit = envelope * (1.0 + half_gamma * t[:, None])
        s_vals = np.where(critical, s_crit, s_vals)
        c_vals = np.where(critical, c_crit, c_vals)

    s_vals[past] = 0.0
    c_vals[past] = 0.0
    return c_vals, s_vals


def kernel_S(table: DispersionTable, t: float) -> np.ndarray:
    """S(t,p) per mode; exactly zero for t < 0"""
    return kernel_series(table, t)[1][0]


def kernel_C(table: DispersionTable, t: float) -> np.ndarray:
    """C(t,p) per mode; exactly zero for t < 0"""
    return kernel_series(table, t)[0][0]


def kernel_slice(table: DispersionTable, t: float) -> KernelSlice:
    c_vals, s_vals = kernel_series(table, t)
    return KernelSlice(time=float(t), c_modes=c_vals[0], s_modes=s_vals[0])


def kernel_derivative(table: DispersionTable, t: TimeLike, which: KernelKind) -> np.ndarray:
    """
    Analytic time derivative of C or S (right derivative at t = 0)

    dS/dt = (r+ e^{r+ t} - r- e^{r- t}) / (r+ - r-),  dC/dt = -omega^2 S
    """
    t_in = np.atleast_1d(np.asarray(t, dtype=float))
    past = t_in < 0
    t_arr = np.where(past, 0.0, t_in)
    if which == "C":
        _, s_vals = kernel_series(table, t_in)
        out = -table.omega2 * s_vals
    else:
        r_plus = table.r_plus
        r_minus = table.r_minus
        critical = table.critical
        diff = np.where(critical, 1.0 + 0j, r_plus - r_minus)
        e_plus = np.exp(np.outer(t_arr, r_plus))
        e_minus = np.exp(np.outer(t_arr, r_minus))
        out = ((r_plus * e_plus - r_minus * e_minus) / diff).real
        if np.any(critical):
            half_gamma = table.params.gamma / 2.0
            crit = np.exp(-half_gamma * t_arr)[:, None] * (1.0 - half_gamma * t_arr[:, None])
            out = np.where(critical, crit, out)
        out[past] = 0.0
    return out[0] if np.ndim(t) == 0 else out


def abel_defect(table: DispersionTable, t: float) -> float:
    """Relative defect of C S' - C' S = e^{-gamma t} over all modes"""
    c_vals, s_vals = kernel_series(table, t)
    dc = kernel_derivative(table, t, "C")
    ds = kernel_derivative(table, t, "S")
    wronskian = c_vals[0] * ds - dc * s_vals[0]
    expected = np.exp(-table.params.gamma * t)
    return float(np.max(np.abs(wronskian - expected)) / expected)


def ode_residual(table: DispersionTable, t: float, which: KernelKind, h: float = 1e-4) -> float:
    """
    max over modes of |u'' + gamma u' + omega^2 u| for u = C or S

    u' is analytic; u'' is the central difference of u' with step h.
    """
    if t - h < 0:
        raise ValueError("ode_residual needs t >= h")
    c_vals, s_vals = kernel_series(table, t)
    u = c_vals[0] if which == "C" else s_vals[0]
    du = kernel_derivative(table, t, which)
    ddu = (kernel_derivative(table, t + h, which) - kernel_derivative(table, t - h, which)) / (2.0 * h)
    return float(np.max(np.abs(ddu + table.params.gamma * du + table.omega2 * u)))


def resolvent(table: DispersionTable, energy: complex) -> np.ndarray:
    """G(E,p) = 1 / (-E^2 + i gamma E + omega^2); diagnostic only"""
    return 1.0 / (-(energy**2) + 1j * table.params.gamma * energy + table.omega2)


# ==================== Position Space ====================

def kernel_position(table: DispersionTable, t: float, which: KernelKind) -> Field:
    """
    Inverse lattice Fourier transform of C(t,.) or S(t,.)

    At t = 0, C is the normalised delta (height 1/delta^d at the origin).
    """
    c_vals, s_vals = kernel_series(table, t)
    modes = c_vals[0] if which == "C" else s_vals[0]
    return dft_inverse(SpectralField(spec=table.spec, modes=modes))


def decay_profile(table: DispersionTable, times: np.ndarray) -> np.ndarray:
    """sup_x |S(t,x)| for each time"""
    if not table.params.has_mass_gap():
        logger.warning(
            "⚠ decay profile requested without mass gap (mu2=%g, gamma=%g)",
            table.params.mu2, table.params.gamma,
        )
    return np.array([kernel_position(table, float(t), "S").sup_norm() for t in times])


def radial_profile(table: DispersionTable, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    |S(t,x)| grouped by distance from the origin

    Returns:
        (distances, max |S| over the sites at each distance), sorted by distance
    """
    values = np.abs(kernel_position(table, t, "S").values)
    distances = np.round(site_distances(table.spec), 12)
    unique = np.unique(distances)
    peak = np.array([values[distances == r].max() for r in unique])
    return unique, peak
