"""Trapped-ion / nanomechanical-oscillator transducer toolkit.

Simulates the coupled open-system dynamics of a charged cantilever-style
oscillator exchanging quanta with the secular motion of a trapped ion,
together with the measurement, cooling and force-sensing protocols built on
that exchange.

Layers, bottom up:

- ``hilbert``: truncated Fock-space operators and density-matrix utilities.
- ``dynamics_full``: sparse-generator master-equation evolution (small
  occupancies; the oracle).
- ``dynamics_moments``: the closed mean-occupation equations and their
  damped-exchange closed forms (any occupancy; the workhorse).
- ``readout``: red/blue sideband thermometry and shot-noise inference.
- ``device``: lab quantities (voltages, masses, Q, temperature) to model
  rates.
- ``protocols``: two-stage measurement, cooling schemes, force sensing.
- ``service`` / ``cli``: HTTP service and its thin command-line client.
"""

from ._version import __version__
from .device import DeviceParams, default_device
from .dynamics_moments import (
    MomentState,
    evolve_moments,
    exchange_time,
    moment_steady_state,
    nbar_a_analytic,
    nbar_b_analytic,
)
from .errors import (
    ConfigError,
    DomainError,
    GuardrailError,
    IllConditionedError,
    IntegrationError,
    OverdampedError,
    PositivityError,
    SaturationError,
)
from .params import SystemParams
from .readout import (
    MeasurementRecord,
    NbarEstimate,
    PhononDistribution,
    SidebandDrive,
    estimate_nbar,
    infer_nbar_a0,
    simulate_shots,
)
from .trajectory import Trajectory

__all__ = [
    "__version__",
    "ConfigError",
    "DeviceParams",
    "DomainError",
    "GuardrailError",
    "IllConditionedError",
    "IntegrationError",
    "MeasurementRecord",
    "MomentState",
    "NbarEstimate",
    "OverdampedError",
    "PhononDistribution",
    "PositivityError",
    "SaturationError",
    "SidebandDrive",
    "SystemParams",
    "Trajectory",
    "default_device",
    "estimate_nbar",
    "evolve_moments",
    "exchange_time",
    "infer_nbar_a0",
    "moment_steady_state",
    "nbar_a_analytic",
    "nbar_b_analytic",
    "simulate_shots",
]
