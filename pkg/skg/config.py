"""
Run Configuration
Resolves the parameters of one CLI invocation from defaults, an INI-style
config file and command-line flags (in increasing precedence), and builds
the typed models each area consumes.
"""

import configparser
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field as ParamField, ValidationError, field_validator, model_validator

from skg.errors import (
    ConfigError,
    InvalidValueError,
    MissingRequiredError,
    TypeMismatchError,
    UnknownKeyError,
)
from skg.simulation.simulator import SimConfig
from skg.solvers.duhamel import TimeGrid
from skg.spectral.kernels import ModelParams
from skg.spectral.lattice import LatticeSpec

logger = logging.getLogger(__name__)

DEFAULT_SECTION = "run"

TYPE_ERRORS = {
    "float_parsing", "float_type", "int_parsing", "int_type", "int_from_float",
    "bool_parsing", "bool_type", "list_type", "literal_error",
}


# ==================== Models ====================

class RunConfig(BaseModel):
    """
    Every parameter a subcommand may read

    Defaults reproduce the symmetry-breaking run: d=1, N=128, delta=1,
    dt=0.01, T=60, gamma=1, mu^2=-1, lambda=1, p=3, sigma=0.2.
    """
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    # lattice
    dim: int = ParamField(1, ge=1)
    n_sites: int = ParamField(128, ge=2)
    delta: float = ParamField(1.0, gt=0.0)

    # model
    gamma: float = ParamField(1.0, ge=0.0)
    mu2: float = -1.0
    lam: float = ParamField(1.0, alias="lambda")
    power: int = ParamField(3, ge=1)
    sigma: float = ParamField(0.2, ge=0.0)

    # numerics
    dt: float = ParamField(0.01, gt=0.0)
    horizon: float = ParamField(60.0, gt=0.0)
    order: int = ParamField(2, ge=0)
    tol: float = ParamField(1e-10, gt=0.0)
    max_iter: int = ParamField(50, ge=1)

    # simulation
    seed: int = ParamField(0, ge=0, le=2**64 - 1)
    record_every: int = ParamField(1, ge=1)
    ensemble: int = ParamField(1, ge=1)
    snapshot_times: List[float] = []
    initial_amplitude: float = ParamField(0.01, ge=0.0)

    # validation
    level: Literal["fast", "full"] = "fast"

    @field_validator("snapshot_times", mode="before")
    @classmethod
    def _split_times(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @model_validator(mode="after")
    def _check_horizon(self) -> "RunConfig":
        steps = round(self.horizon / self.dt)
        if steps < 1 or abs(steps * self.dt - self.horizon) > 1e-9 * self.horizon:
            raise ValueError(f"horizon {self.horizon} is not an integral multiple of dt {self.dt}")
        return self

    # -------------------------- Area models ----------------------------

    def lattice(self) -> LatticeSpec:
        return LatticeSpec(dim=self.dim, sites_per_axis=self.n_sites, spacing=self.delta)

    def model(self) -> ModelParams:
        return ModelParams(gamma=self.gamma, mu2=self.mu2, lam=self.lam, power=self.power, sigma=self.sigma)

    def time_grid(self) -> TimeGrid:
        return TimeGrid.from_horizon(self.horizon, self.dt)

    def sim_config(self) -> SimConfig:
        return SimConfig(
            spec=self.lattice(),
            params=self.model(),
            dt=self.dt,
            horizon=self.horizon,
            seed=self.seed,
            record_every=self.record_every,
            snapshot_times=self.snapshot_times,
            ensemble=self.ensemble,
            initial_amplitude=self.initial_amplitude,
        )

    def snapshot(self) -> Dict[str, Any]:
        """All parameters by their config-file names"""
        return self.model_dump(mode="json", by_alias=True)


# ==================== Parsing ====================

def read_config_file(path: str) -> Dict[str, str]:
    """
    Read key = value pairs from an INI-style file

    Section headers are optional and only group keys; the result is flat.
    A key that appears in two sections keeps its last value.
    """
    file_path = Path(path)
    if not file_path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    text = file_path.read_text(encoding="utf-8")

    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    try:
        parser.read_string(text, source=str(file_path))
    except configparser.MissingSectionHeaderError:
        parser.read_string(f"[{DEFAULT_SECTION}]\n{text}", source=str(file_path))
    except configparser.Error as exc:
        raise ConfigError("config", f"malformed file: {exc}") from exc

    values: Dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key in values:
                logger.warning("⚠ %s set in more than one section; [%s] wins", key, section)
            values[key] = value
    return values


def _translate(error: ValidationError) -> ConfigError:
    first = error.errors()[0]
    key = ".".join(str(part) for part in first["loc"]) or "config"
    message = first["msg"]
    kind = first["type"]
    if kind == "extra_forbidden":
        return UnknownKeyError(key, "unknown key")
    if kind == "missing":
        return MissingRequiredError(key, "required key is missing")
    if kind in TYPE_ERRORS:
        return TypeMismatchError(key, message)
    return InvalidValueError(key, message)


def parse_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Resolve a RunConfig

    Args:
        path: optional INI-style config file
        overrides: flag values by config key; None entries are ignored

    Returns:
        Validated configuration (defaults < file < overrides)

    Raises:
        UnknownKeyError, TypeMismatchError, MissingRequiredError,
        InvalidValueError: each naming the offending key
    """
    merged: Dict[str, Any] = {}
    if path:
        for key, value in read_config_file(path).items():
            if not value.strip():
                raise MissingRequiredError(key, "no value given")
            merged[key] = value.strip()
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as exc:
        raise _translate(exc) from exc
