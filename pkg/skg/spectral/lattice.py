"""
Lattice Module
Periodic cubic lattice geometry, the nearest-neighbour Laplacian, spatial
convolution and the discrete Fourier transform pair used by every solver.

Index contract: a Field stores its N^d site values as a flat row-major vector,
so site (z_1, ..., z_d) lives at index sum_j z_j * N^(d-j). Mode k of a
SpectralField uses the same layout with integer momenta k_j in 0..N-1 and
physical momentum p_j = 2*pi*k_j / (N*delta).

Normalisation: the forward transform carries delta^d,
    f_hat(k) = sum_x exp(-i p.x) f(x) delta^d,
and the inverse carries 1/(N*delta)^d.
"""

from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy import fft as sp_fft

from skg.errors import SpecMismatchError, SpectralSymmetryError

HERMITIAN_TOLERANCE = 1e-6
MAX_SITES = 2**31 - 1


# ==================== Domain Types ====================

class LatticeSpec(BaseModel):
    """Geometry of the periodic d-dimensional lattice"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    dim: int
    sites_per_axis: int
    spacing: float

    @field_validator("dim")
    @classmethod
    def _check_dim(cls, value: int) -> int:
        if value < 1:
            raise ValueError("dim must be a positive integer")
        return value

    @field_validator("sites_per_axis")
    @classmethod
    def _check_sites(cls, value: int) -> int:
        if value < 2:
            raise ValueError("sites_per_axis must be at least 2")
        return value

    @field_validator("spacing")
    @classmethod
    def _check_spacing(cls, value: float) -> float:
        if not np.isfinite(value) or value <= 0:
            raise ValueError("spacing must be a positive real")
        return value

    @model_validator(mode="after")
    def _check_size(self) -> "LatticeSpec":
        if self.sites_per_axis ** self.dim > MAX_SITES:
            raise ValueError("total site count N^d does not fit the index type")
        return self

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.sites_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.sites_per_axis ** self.dim

    @property
    def cell_volume(self) -> float:
        """delta^d, the measure of one lattice site"""
        return self.spacing ** self.dim

    @property
    def axes(self) -> Tuple[int, ...]:
        return tuple(range(self.dim))


class Field(BaseModel):
    """One real value per lattice site at a fixed time"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: LatticeSpec
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_array(cls, value) -> np.ndarray:
        array = np.array(value, dtype=np.float64).reshape(-1)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_values(self) -> "Field":
        if self.values.shape[0] != self.spec.size:
            raise ValueError(
                f"Field has {self.values.shape[0]} values, lattice has {self.spec.size} sites"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Field contains non-finite values")
        return self

    @classmethod
    def zeros(cls, spec: LatticeSpec) -> "Field":
        return cls(spec=spec, values=np.zeros(spec.size))

    @classmethod
    def constant(cls, spec: LatticeSpec, value: float) -> "Field":
        return cls(spec=spec, values=np.full(spec.size, float(value)))

    @classmethod
    def spike(cls, spec: LatticeSpec, site: int = 0, height: float = 1.0) -> "Field":
        values = np.zeros(spec.size)
        values[site] = height
        return cls(spec=spec, values=values)

    @classmethod
    def from_grid(cls, spec: LatticeSpec, grid: np.ndarray) -> "Field":
        return cls(spec=spec, values=np.asarray(grid).reshape(-1))

    @property
    def grid(self) -> np.ndarray:
        """Values reshaped to (N,)*d in row-major order"""
        return self.values.reshape(self.spec.shape)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


class SpectralField(BaseModel):
    """Fourier modes of a lattice field on the periodic dual grid"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: LatticeSpec
    modes: np.ndarray

    @field_validator("modes", mode="before")
    @classmethod
    def _as_array(cls, value) -> np.ndarray:
        array = np.array(value, dtype=np.complex128).reshape(-1)
        array.setflags(write=False)
        return array

    @model_validator(mode="after")
    def _check_modes(self) -> "SpectralField":
        if self.modes.shape[0] != self.spec.size:
            raise ValueError(
                f"SpectralField has {self.modes.shape[0]} modes, lattice has {self.spec.size}"
            )
        if not np.all(np.isfinite(self.modes)):
            raise ValueError("SpectralField contains non-finite modes")
        return self

    @property
    def grid(self) -> np.ndarray:
        return self.modes.reshape(self.spec.shape)


# ==================== Index Maps ====================

def mode_indices(spec: LatticeSpec) -> np.ndarray:
    """Integer momentum vectors k of every mode, shape (N^d, d), row-major"""
    axes = [np.arange(spec.sites_per_axis)] * spec.dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def momenta(spec: LatticeSpec) -> np.ndarray:
    """Physical momenta p = 2*pi*k/(N*delta) of every mode, shape (N^d, d)"""
    return 2.0 * np.pi * mode_indices(spec) / (spec.sites_per_axis * spec.spacing)


def site_distances(spec: LatticeSpec) -> np.ndarray:
    """Minimum-image Euclidean distance |x| of every site from the origin"""
    n = spec.sites_per_axis
    z = mode_indices(spec)
    wrapped = np.minimum(z, n - z)
    return spec.spacing * np.sqrt(np.sum(wrapped.astype(float) ** 2, axis=1))


def reflect_modes(grid: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Return the array indexed by -k (mod N) along the given axes"""
    flipped = np.flip(grid, axis=tuple(axes))
    return np.roll(flipped, shift=1, axis=tuple(axes))


def hermitian_defect(spectral: SpectralField) -> float:
    """max|m(-k) - conj(m(k))| relative to max(1, max|m|)"""
    grid = spectral.grid
    mirrored = reflect_modes(grid, spectral.spec.axes)
    scale = max(1.0, float(np.max(np.abs(grid))))
    return float(np.max(np.abs(mirrored - np.conj(grid)))) / scale


# ==================== Stencil ====================

def laplacian_apply(field: Field) -> Field:
    """
    Apply the nearest-neighbour discrete Laplacian with periodic wraparound

    Args:
        field: Lattice field phi

    Returns:
        Field with values (1/delta^2) sum_j (phi_{i+e_j} + phi_{i-e_j} - 2 phi_i)
    """
    return Field(spec=field.spec, values=laplacian_values(field.values, field.spec))


def laplacian_values(values: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Raw-array form of laplacian_apply, shared with the time stepper"""
    grid = values.reshape(spec.shape)
    out = np.zeros_like(grid)
    for axis in spec.axes:
        out += np.roll(grid, -1, axis=axis) + np.roll(grid, 1, axis=axis) - 2.0 * grid
    return (out / spec.spacing**2).reshape(-1)


def gradient_energy(field: Field) -> float:
    """Sum over sites of |grad_delta phi|^2 / 2 * delta^d using forward differences"""
    spec = field.spec
    grid = field.grid
    total = 0.0
    for axis in spec.axes:
        diff = (np.roll(grid, -1, axis=axis) - grid) / spec.spacing
        total += float(np.sum(diff**2))
    return 0.5 * total * spec.cell_volume


# ==================== Fourier Symbol ====================

def symbol_omega(spec: LatticeSpec, k: Sequence[int]) -> float:
    """
    Fourier multiplier of -Delta_delta at integer momentum k

    Omega(p) = (2/delta^2) sum_j (1 - cos(delta p_j)), p_j = 2 pi k_j / (N delta)
    """
    k = np.asarray(k, dtype=float).reshape(-1)
    if k.shape[0] != spec.dim:
        raise SpecMismatchError(f"momentum has {k.shape[0]} components, lattice has dim {spec.dim}")
    delta_p = 2.0 * np.pi * k / spec.sites_per_axis
    return float(2.0 / spec.spacing**2 * np.sum(1.0 - np.cos(delta_p)))


def symbol_table(spec: LatticeSpec) -> np.ndarray:
    """Omega for every mode in row-major order"""
    delta_p = 2.0 * np.pi * mode_indices(spec) / spec.sites_per_axis
    return 2.0 / spec.spacing**2 * np.sum(1.0 - np.cos(delta_p), axis=1)


# ==================== Transforms ====================

def dft_forward(field: Field) -> SpectralField:
    """Lattice Fourier transform carrying delta^d"""
    modes = sp_fft.fftn(field.grid, axes=field.spec.axes) * field.spec.cell_volume
    return SpectralField(spec=field.spec, modes=modes)


def dft_inverse(spectral: SpectralField) -> Field:
    """
    Inverse lattice Fourier transform carrying 1/(N delta)^d

    Raises:
        SpectralSymmetryError: if the modes are not Hermitian within 1e-6,
            i.e. they cannot have come from a real field
    """
    defect = hermitian_defect(spectral)
    if defect > HERMITIAN_TOLERANCE:
        raise SpectralSymmetryError(defect, HERMITIAN_TOLERANCE)
    spec = spectral.spec
    values = sp_fft.ifftn(spectral.grid, axes=spec.axes).real / spec.cell_volume
    return Field.from_grid(spec, values)


def forward_slices(values: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """
    Transform a stack of fields at once

    Args:
        values: array of shape (n_slices, N^d)

    Returns:
        complex array of shape (n_slices, N^d)
    """
    n_slices = values.shape[0]
    grid = values.reshape((n_slices,) + spec.shape)
    axes = tuple(a + 1 for a in spec.axes)
    return (sp_fft.fftn(grid, axes=axes) * spec.cell_volume).reshape(n_slices, spec.size)


def inverse_slices(modes: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Inverse of forward_slices, keeping the real part"""
    n_slices = modes.shape[0]
    grid = modes.reshape((n_slices,) + spec.shape)
    axes = tuple(a + 1 for a in spec.axes)
    values = sp_fft.ifftn(grid, axes=axes).real / spec.cell_volume
    return values.reshape(n_slices, spec.size)


def spatial_convolve(a: Field, b: Field) -> Field:
    """
    Lattice convolution (a * b)(x) = sum_y a(x - y) b(y) delta^d

    Evaluated as a pointwise product of spectral modes.
    """
    if a.spec != b.spec:
        raise SpecMismatchError("spatial_convolve operands live on different lattices")
    product = dft_forward(a).modes * dft_forward(b).modes
    return dft_inverse(SpectralField(spec=a.spec, modes=product))


# ==================== Norms ====================

def weighted_sup_norm(field: Field, power: float) -> float:
    """sup_x (1 + |x|)^power |u(x)| with minimum-image distances"""
    weight = (1.0 + site_distances(field.spec)) ** power
    return float(np.max(weight * np.abs(field.values)))


def parseval_norms(field: Field) -> Tuple[float, float]:
    """
    Both sides of Parseval's identity

    Returns:
        (sum_x |f|^2 delta^d, sum_k |f_hat|^2 / (N delta)^d)
    """
    spec = field.spec
    real_side = float(np.sum(field.values**2)) * spec.cell_volume
    modes = dft_forward(field).modes
    spectral_side = float(np.sum(np.abs(modes) ** 2)) / (spec.sites_per_axis * spec.spacing) ** spec.dim
    return real_side, spectral_side
