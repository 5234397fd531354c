"""
Error Types
Exception hierarchy shared by every area of the toolkit. The CLI maps these
onto process exit codes.
"""

from typing import List, Optional


class SKGError(Exception):
    """Base class for all toolkit errors"""


# ==================== Lattice / Spectral ====================

class LatticeError(SKGError):
    """Invalid lattice operation"""


class SpecMismatchError(LatticeError):
    """Operands live on different lattices or time grids"""


class SpectralSymmetryError(LatticeError):
    """A spectral field that should come from a real field is not Hermitian"""

    def __init__(self, defect: float, tolerance: float):
        self.defect = defect
        self.tolerance = tolerance
        super().__init__(
            f"Spectral field violates Hermitian symmetry: defect {defect:.3e} > {tolerance:.1e}"
        )


# ==================== Solvers ====================

class NonConvergenceError(SKGError):
    """Picard iteration left the perturbative regime"""

    def __init__(self, message: str, iterations: int, residuals: Optional[List[float]] = None):
        self.iterations = iterations
        self.residuals = list(residuals or [])
        super().__init__(f"{message} (after {iterations} iterations)")


class CoefficientOverflowError(SKGError):
    """Multinomial coefficient does not fit a signed 64-bit integer"""


class BlowUpError(SKGError):
    """Simulated field exceeded the blow-up threshold"""

    def __init__(self, step: int, time: float, sup_norm: float):
        self.step = step
        self.time = time
        self.sup_norm = sup_norm
        super().__init__(
            f"Numerical blow-up at step {step} (t={time:.4g}): sup|phi| = {sup_norm:.3e}"
        )


# ==================== Configuration ====================

class ConfigError(SKGError):
    """Configuration could not be resolved"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class UnknownKeyError(ConfigError):
    pass


class TypeMismatchError(ConfigError):
    pass


class MissingRequiredError(ConfigError):
    pass


class InvalidValueError(ConfigError):
    pass
