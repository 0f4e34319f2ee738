"""Scenario documents: schema, validation and conversion to domain objects.

A scenario is one JSON document.  Complex numbers are ``[re, im]`` pairs and
matrices are row-major lists of rows.  Fallbacks for omitted grid and
tolerance fields are listed in :data:`GRID_DEFAULTS` and
:data:`TOLERANCE_DEFAULTS` (and in the README).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Literal, Union

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, Field

from .dissipator import SystemModel
from .errors import DecoError, SchemaError, ValidationError
from .ordering import Tolerances
from .spectral import (DiscreteBathSpec, ThermalReservoirSpec, composite_correlation,
                       discrete_bath_kernel, reservoir_kernel, white_noise_kernel)

GRID_DEFAULTS = {
    "omega_max": None,   # None: max(50 T, 20 cutoff) over thermal environments, else 10
    "n_omega": 801,
    "t_max": 1.0,
    "n_t": 11,
    "dt": 0.01,
    "n_tau": 257,
    "rate_steps": 8,
}

TOLERANCE_DEFAULTS = {
    "tol_rel": 1e-9,
    "tol_equivalent": 1e-12,
    "tol_strict": 1e-6,
    "step_tol": 1e-6,
}

HERMITIAN_TOL = 1e-12

Pair = tuple[float, float]
Matrix = list[list[Pair]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CouplingIn(_Strict):
    matrix: Matrix
    channel: int = Field(ge=0)


class SystemIn(_Strict):
    dim: int = Field(ge=2)
    hamiltonian: Matrix
    couplings: list[CouplingIn] = Field(min_length=1)


class ThermalIn(_Strict):
    type: Literal["thermal"]
    family: Literal["drude", "exponential"]
    gamma0: float = Field(gt=0)
    cutoff: float = Field(gt=0)
    temperature: float = Field(ge=0)
    channel: int = Field(0, ge=0)


class DiscreteIn(_Strict):
    type: Literal["discrete"]
    modes: list[Pair] = Field(min_length=1)
    temperature: float = Field(ge=0)
    fock_truncation: Union[int, list[int]] = 4
    channel: int = Field(0, ge=0)


class WhiteNoiseIn(_Strict):
    type: Literal["white_noise"]
    strength: float = Field(ge=0)
    channel: int = Field(0, ge=0)


Environment = Annotated[Union[ThermalIn, DiscreteIn, WhiteNoiseIn], Field(discriminator="type")]


class GridsIn(_Strict):
    omega_max: float | None = Field(GRID_DEFAULTS["omega_max"], gt=0)
    n_omega: int = Field(GRID_DEFAULTS["n_omega"], ge=2)
    t_max: float = Field(GRID_DEFAULTS["t_max"], gt=0)
    n_t: int = Field(GRID_DEFAULTS["n_t"], ge=2)
    dt: float = Field(GRID_DEFAULTS["dt"], gt=0)
    n_tau: int = Field(GRID_DEFAULTS["n_tau"], ge=2)
    rate_steps: int = Field(GRID_DEFAULTS["rate_steps"], ge=0)


class TolerancesIn(_Strict):
    tol_rel: float = Field(TOLERANCE_DEFAULTS["tol_rel"], gt=0)
    tol_equivalent: float = Field(TOLERANCE_DEFAULTS["tol_equivalent"], gt=0)
    tol_strict: float = Field(TOLERANCE_DEFAULTS["tol_strict"], gt=0)
    step_tol: float = Field(TOLERANCE_DEFAULTS["step_tol"], gt=0)


class LutzIn(_Strict):
    gamma0: float = Field(gt=0)
    lambda_high: float = Field(gt=0)
    lambda_low: float = Field(gt=0)
    t_hot: float = Field(ge=0)
    t_cold: float = Field(ge=0)
    family: Literal["drude", "exponential"] = "drude"


class ScenarioIn(_Strict):
    description: str = ""
    system: SystemIn
    environments: list[Environment] = Field(min_length=1)
    grids: GridsIn = GridsIn()
    tolerances: TolerancesIn = TolerancesIn()
    seed: int = 0
    rho0: Matrix | None = None
    lutz: LutzIn | None = None


@dataclass(frozen=True)
class WhiteNoiseSpec:
    strength: float
    channel: int = 0


@dataclass
class Scenario:
    system: SystemModel
    environments: list
    grids: GridsIn
    tolerances: Tolerances
    step_tol: float
    seed: int
    rho0: np.ndarray
    lutz: LutzIn | None
    document: dict
    description: str = ""

    def kernel(self):
        """Composite stationary kernel of all environments on the system's channels."""
        parts, cmap = [], []
        for env in self.environments:
            if isinstance(env, ThermalReservoirSpec):
                parts.append(reservoir_kernel(env))
            elif isinstance(env, DiscreteBathSpec):
                parts.append(discrete_bath_kernel(env))
            else:
                parts.append(white_noise_kernel(env.strength))
            cmap.append([env.channel])
        return composite_correlation(parts, cmap, self.system.n_channels)

    def thermal_environments(self) -> list[ThermalReservoirSpec]:
        return [e for e in self.environments if isinstance(e, ThermalReservoirSpec)]

    def omega_max(self) -> float:
        if self.grids.omega_max is not None:
            return self.grids.omega_max
        thermal = self.thermal_environments()
        if not thermal:
            return 10.0
        return max(max(50.0 * e.temperature, 20.0 * e.cutoff) for e in thermal)

    def digest(self) -> str:
        return document_digest(self.document)


def document_digest(doc: Any) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _path(loc) -> str:
    out = ""
    tags = {"thermal", "discrete", "white_noise"}
    prev_index = False
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
            prev_index = True
            continue
        if prev_index and part in tags:
            prev_index = False
            continue
        if part in ("function-after", "list[int]", "int"):
            continue
        out += ("." if out else "") + str(part)
        prev_index = False
    return out


_SCHEMA_ERRORS = {"extra_forbidden", "missing", "union_tag_invalid", "union_tag_not_found",
                  "model_type", "model_attributes_type"}


def _matrix(rows, dim: int, where: str) -> np.ndarray:
    m = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex) \
        if rows else np.zeros((0, 0))
    if m.shape != (dim, dim):
        raise ValidationError(f"{where}: expected a {dim}x{dim} matrix, got {m.shape}")
    return m


def _hermitian(m: np.ndarray, where: str) -> np.ndarray:
    if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL * max(1.0, np.max(np.abs(m))):
        raise ValidationError(f"{where}: matrix is not Hermitian")
    return m


def parse_scenario(source: str | Path | dict) -> Scenario:
    """Parse and validate a scenario from a path, JSON text or an already loaded mapping."""
    if isinstance(source, dict):
        doc = source
    else:
        text = str(source)
        path = Path(text)
        if not text.lstrip().startswith("{") and path.exists():
            text = path.read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"scenario is not valid JSON: {exc}") from exc
    try:
        raw = ScenarioIn.model_validate(doc)
    except pydantic.ValidationError as exc:
        err = exc.errors()[0]
        where = _path(err["loc"]) or "<root>"
        cls = SchemaError if err["type"] in _SCHEMA_ERRORS else ValidationError
        raise cls(f"{where}: {err['msg']}") from None

    d = raw.system.dim
    h = _hermitian(_matrix(raw.system.hamiltonian, d, "system.hamiltonian"), "system.hamiltonian")
    couplings = []
    for i, c in enumerate(raw.system.couplings):
        where = f"system.couplings[{i}].matrix"
        couplings.append((_hermitian(_matrix(c.matrix, d, where), where), c.channel))
    try:
        system = SystemModel(h, tuple(couplings))
    except ValidationError as exc:
        raise ValidationError(f"system.couplings: {exc}") from None

    envs = []
    for i, e in enumerate(raw.environments):
        where = f"environments[{i}]"
        if e.channel >= system.n_channels:
            raise ValidationError(f"{where}.channel: {e.channel} is not a system channel")
        try:
            if isinstance(e, ThermalIn):
                envs.append(ThermalReservoirSpec(e.family, e.gamma0, e.cutoff, e.temperature, e.channel))
            elif isinstance(e, DiscreteIn):
                ft = e.fock_truncation if isinstance(e.fock_truncation, int) else tuple(e.fock_truncation)
                envs.append(DiscreteBathSpec(tuple(e.modes), e.temperature, ft, e.channel))
            else:
                envs.append(WhiteNoiseSpec(e.strength, e.channel))
        except DecoError as exc:
            raise ValidationError(f"{where}: {exc}") from None

    if raw.rho0 is None:
        rho0 = np.zeros((d, d), dtype=complex)
        rho0[0, 0] = 1.0
    else:
        rho0 = _matrix(raw.rho0, d, "rho0")
        _check_density(rho0, "rho0")
    tol = raw.tolerances
    return Scenario(system, envs, raw.grids,
                    Tolerances(tol.tol_rel, tol.tol_equivalent, tol.tol_strict),
                    tol.step_tol, raw.seed, rho0, raw.lutz, doc, raw.description)


def _check_density(rho: np.ndarray, where: str) -> None:
    _hermitian(rho, where)
    if abs(np.trace(rho) - 1) > 1e-12:
        raise ValidationError(f"{where}: trace must be 1")
    if np.linalg.eigvalsh(rho)[0] < -1e-12:
        raise ValidationError(f"{where}: not positive semidefinite")


def parse_density(source: str | Path, dim: int) -> np.ndarray:
    """Read a density matrix given as a JSON matrix of ``[re, im]`` pairs."""
    try:
        rows = json.loads(Path(source).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"rho0: not valid JSON: {exc}") from exc
    try:
        rho = _matrix(rows, dim, "rho0")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise SchemaError(f"rho0: expected a matrix of [re, im] pairs ({exc})") from None
    _check_density(rho, "rho0")
    return rho
