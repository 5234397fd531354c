"""
Shared fixtures for the toolkit tests
"""

import os
import sys

import hypothesis
import numpy as np
import pytest

# Add parent directory to path for imports
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from skg.simulation.simulator import make_rng
from skg.solvers.duhamel import TimeGrid
from skg.spectral.kernels import ModelParams, build_dispersion
from skg.spectral.lattice import Field, LatticeSpec

hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.load_profile("fast")


@pytest.fixture
def line8():
    return LatticeSpec(dim=1, sites_per_axis=8, spacing=1.0)


@pytest.fixture
def line16():
    return LatticeSpec(dim=1, sites_per_axis=16, spacing=1.0)


@pytest.fixture
def square4():
    return LatticeSpec(dim=2, sites_per_axis=4, spacing=0.5)


@pytest.fixture
def gapped():
    """Mass gap satisfied: mu^2 = 1 > gamma^2/4"""
    return ModelParams(gamma=1.0, mu2=1.0, lam=1.0, power=3, sigma=0.1)


@pytest.fixture
def gapped_table(line8, gapped):
    return build_dispersion(line8, gapped)


@pytest.fixture
def short_grid():
    return TimeGrid.from_horizon(1.0, 0.05)


@pytest.fixture
def rng():
    return make_rng(20251004)


def random_field(spec: LatticeSpec, rng, amplitude: float = 1.0) -> Field:
    return Field(spec=spec, values=amplitude * rng.standard_normal(spec.size))
