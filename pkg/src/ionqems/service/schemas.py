"""Pydantic request/response models for the HTTP service.

Requests mirror the core dataclasses field-for-field; the ``to_core``
converters run the dataclass validators, so any physics-level constraint
violation surfaces as a 400 with a stable error code rather than a bare 500.
Unknown fields are rejected (extra="forbid") to keep client typos loud.
"""

from __future__ import annotations

from dataclasses import asdict
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..device import DeviceParams
from ..params import SystemParams


class SystemParamsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kappa: float = Field(ge=0.0)
    gamma_a: float = Field(default=0.0, ge=0.0)
    nbar_a0: float = Field(default=0.0, ge=0.0)
    delta: float = 0.0
    mu1: float = Field(default=0.0, ge=0.0)
    mu2: float = Field(default=0.0, ge=0.0)

    def to_core(self) -> SystemParams:
        return SystemParams(**self.model_dump())

    @classmethod
    def from_core(cls, params: SystemParams) -> "SystemParamsModel":
        return cls(**asdict(params))


class DeviceParamsModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ion_mass: float = Field(gt=0.0)
    cantilever_mass: float = Field(gt=0.0)
    nu: float = Field(gt=0.0)
    omega: float = Field(gt=0.0)
    v0: float = Field(ge=0.0)
    c0: float = Field(gt=0.0)
    d: float = Field(gt=0.0)
    q_factor: float = Field(gt=0.0)
    t_bath: float = Field(gt=0.0)
    laser_wavevector: float = Field(ge=0.0)
    rabi_frequency: float = Field(gt=0.0)
    trap_dimension_beta: float = Field(gt=0.0)
    heating_time_tau1: float = Field(gt=0.0)

    def to_core(self) -> DeviceParams:
        return DeviceParams(**self.model_dump())

    @classmethod
    def from_core(cls, dev: DeviceParams) -> "DeviceParamsModel":
        return cls(**asdict(dev))


class ParamsRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params: SystemParamsModel
    device: DeviceParamsModel
    nbar_b0: float = Field(default=0.0, ge=0.0)
    seed: int = 12345


class ExchangeRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params: SystemParamsModel
    nbar_b0: float = Field(default=0.0, ge=0.0)
    t_max: float = Field(gt=0.0)
    n_points: int = Field(default=2001, ge=2)
    with_undamped: bool = False


class EvolveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    params: SystemParamsModel
    nbar_b0: float = Field(default=0.0, ge=0.0)
    t_max: float = Field(gt=0.0)
    n_points: int = Field(default=201, ge=2)
    n_levels: Optional[int] = Field(default=None, ge=2)
    allow_large: bool = False


class ReadoutRequest(BaseModel):
    """Direct thermometry when ``nbar`` is given, else the two-stage protocol."""

    model_config = ConfigDict(extra="forbid")

    params: SystemParamsModel
    device: DeviceParamsModel
    nbar: Optional[float] = Field(default=None, ge=0.0)
    tau: Optional[float] = Field(default=None, gt=0.0)
    shots: int = Field(default=100_000, gt=0)
    drive_g: float = Field(gt=0.0)
    drive_duration: float = Field(gt=0.0)
    seed: int = 12345


class CoolRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    device: DeviceParamsModel
    scheme: str = "single_exchange"
    nbar_a0: Optional[float] = Field(default=None, ge=0.0)
    cycles: int = Field(default=10, ge=1)
    recool_time: float = Field(default=0.0, ge=0.0)
    ion_damping: float = Field(default=1e5, ge=0.0)


class ForceRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    device: DeviceParamsModel
    force: Optional[float] = Field(default=None, ge=0.0)


class SweepRequest(BaseModel):
    """Sweep the coupling and report the exchange point for each value."""

    model_config = ConfigDict(extra="forbid")

    vary: str = "kappa"
    start: float = Field(gt=0.0)
    stop: float = Field(gt=0.0)
    points: int = Field(default=10, ge=1)
    jobs: int = Field(default=1, ge=1)
    gamma_a: float = Field(default=0.0, ge=0.0)
    nbar_a0: float = Field(default=0.0, ge=0.0)
    nbar_b0: float = Field(default=0.0, ge=0.0)


class TableResponse(BaseModel):
    """Uniform tabular payload: column names, rows, and resolved metadata."""

    columns: list[str]
    rows: list[list[Any]]
    meta: dict[str, Any]


class HealthResponse(BaseModel):
    status: str
    version: str
