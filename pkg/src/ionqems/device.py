"""Lab-quantity calculators: voltages and geometry in, model rates out.

All frequencies are angular (rad/s) internally; boundary code that accepts
"kHz"/"MHz" multiplies by 2 pi on ingestion (see config). Physical constants
come from the CODATA-2018 table in ``constants``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

from .constants import ATOMIC_MASS, BOLTZMANN, COULOMB, ELEMENTARY_CHARGE, HBAR

__all__ = [
    "DeviceParams",
    "default_device",
    "zero_point_length",
    "coupling_kappa",
    "chi",
    "required_bias_product",
    "thermal_occupation",
    "lamb_dicke",
    "anharmonic_linewidth",
    "anharmonicity_negligible",
    "heating_rates",
    "gamma_a",
    "sql_displacement",
]

#: reference operating point: 19.7 MHz cantilever and ion secular frequency
DEFAULT_FREQUENCY = 2.0 * math.pi * 19.7e6
#: coupling realized by the default bias product below
DEFAULT_KAPPA = 2.0 * math.pi * 52.5e3


@dataclass(frozen=True)
class DeviceParams:
    """Physical description of the transducer.

    The cantilever mass is not a measured quantity here; the default value
    1e-16 kg is an assumption (typical for a sub-micron cantilever) that,
    together with the derived gate capacitance, reproduces the reference
    coupling of 2 pi x 52.5 kHz. ``heating_time_tau1`` is the characteristic
    time of the stochastic-field heating model (1/60 s corresponds to 0.06
    quanta per ms).

    ``v0`` may be zero (the coupling is switched on and off through the
    bias voltage), as may ``laser_wavevector`` (no readout laser); every
    other field must be strictly positive.
    """

    ion_mass: float  # kg
    cantilever_mass: float  # kg
    nu: float  # rad/s, ion secular frequency
    omega: float  # rad/s, cantilever frequency
    v0: float  # volts, bias on the coupling electrode
    c0: float  # farads, gate capacitance
    d: float  # meters, ion-cantilever separation
    q_factor: float  # dimensionless
    t_bath: float  # kelvin
    laser_wavevector: float  # rad/m
    rabi_frequency: float  # rad/s, carrier Rabi frequency
    trap_dimension_beta: float  # meters
    heating_time_tau1: float  # seconds

    def __post_init__(self) -> None:
        for name in (
            "ion_mass",
            "cantilever_mass",
            "nu",
            "omega",
            "c0",
            "d",
            "q_factor",
            "t_bath",
            "rabi_frequency",
            "trap_dimension_beta",
            "heating_time_tau1",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        # zero switches the coupling / readout laser off; negative is nonsense
        for name in ("v0", "laser_wavevector"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        for mass, freq, label in (
            (self.ion_mass, self.nu, "ion"),
            (self.cantilever_mass, self.omega, "cantilever"),
        ):
            xzp = zero_point_length(mass, freq)
            if xzp / self.d >= 1e-3:
                raise ValueError(
                    f"{label} zero-point length {xzp:.3e} m is not small against "
                    f"the separation d = {self.d:.3e} m"
                )


def zero_point_length(mass: float, angular_frequency: float) -> float:
    """Ground-state position spread sqrt(hbar / (2 m omega))."""
    if mass <= 0 or angular_frequency <= 0:
        raise ValueError("mass and angular frequency must be positive")
    return math.sqrt(HBAR / (2.0 * mass * angular_frequency))


def default_device() -> DeviceParams:
    """Reference device: 19.7 MHz cantilever, Cd+ ion at 50 um, 7.5 V bias.

    The gate capacitance is derived from the bias-product inversion so that
    ``coupling_kappa`` returns exactly 2 pi x 52.5 kHz.
    """
    dev = DeviceParams(
        ion_mass=112.0 * ATOMIC_MASS,
        cantilever_mass=1e-16,
        nu=DEFAULT_FREQUENCY,
        omega=DEFAULT_FREQUENCY,
        v0=7.5,
        c0=1e-12,  # placeholder, replaced below
        d=50e-6,
        q_factor=30000.0,
        t_bath=4.0,
        laser_wavevector=2.0 * math.pi / 214.5e-9,
        rabi_frequency=2.0 * math.pi * 250e3,
        trap_dimension_beta=50e-6,
        heating_time_tau1=1.0 / 60.0,
    )
    c0 = required_bias_product(DEFAULT_KAPPA, dev) / dev.v0
    return replace(dev, c0=c0)


def coupling_kappa(p: DeviceParams) -> float:
    """Exchange coupling kappa = (m M nu omega)^(-1/2) k e V0 C0 / d^3 in rad/s."""
    return (
        COULOMB
        * ELEMENTARY_CHARGE
        * p.v0
        * p.c0
        / (p.d**3 * math.sqrt(p.ion_mass * p.cantilever_mass * p.nu * p.omega))
    )


def chi(p: DeviceParams) -> float:
    """Dimensionful coupling chi = 2 k e V0 C0 / d^3 (N/m).

    Consistency: kappa = chi x_zp,a x_zp,b / hbar reproduces ``coupling_kappa``.
    """
    return 2.0 * COULOMB * ELEMENTARY_CHARGE * p.v0 * p.c0 / p.d**3


def required_bias_product(kappa_target: float, p: DeviceParams) -> float:
    """C0*V0 (coulombs) needed to realize ``kappa_target``; inverts the kappa formula.

    Only the masses, frequencies and separation of ``p`` are used; its own
    v0/c0 fields are ignored.
    """
    if kappa_target < 0:
        raise ValueError(f"kappa_target must be nonnegative, got {kappa_target}")
    return (
        kappa_target
        * p.d**3
        * math.sqrt(p.ion_mass * p.cantilever_mass * p.nu * p.omega)
        / (COULOMB * ELEMENTARY_CHARGE)
    )


def thermal_occupation(temperature: float, angular_frequency: float) -> float:
    """Bose-Einstein occupation 1/(e^{hbar omega / k_B T} - 1)."""
    if temperature < 0:
        raise ValueError(f"temperature must be nonnegative, got {temperature}")
    if angular_frequency <= 0:
        raise ValueError("angular frequency must be positive")
    if temperature == 0:
        return 0.0
    x = HBAR * angular_frequency / (BOLTZMANN * temperature)
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


class LambDickeCheck(NamedTuple):
    eta: float
    scaled: float  # sqrt(nbar_b + 1) * eta
    within_limit: bool  # scaled below the 0.3 warning threshold


def lamb_dicke(p: DeviceParams, nbar_b: float = 0.0) -> LambDickeCheck:
    """Lamb-Dicke parameter eta = k_l sqrt(hbar / (2 m nu)) plus the occupancy check.

    The sideband treatment assumes sqrt(nbar_b + 1) * eta << 1; the returned
    flag compares against a 0.3 warning threshold.
    """
    if nbar_b < 0:
        raise ValueError(f"nbar_b must be nonnegative, got {nbar_b}")
    eta = p.laser_wavevector * zero_point_length(p.ion_mass, p.nu)
    scaled = math.sqrt(nbar_b + 1.0) * eta
    return LambDickeCheck(eta, scaled, scaled < 0.3)


def anharmonic_linewidth(nu: float, nbar_b: float, ion_mass: float, beta: float) -> float:
    """Secular-frequency spread bound dnu = nu (z/beta)^2, z = sqrt(hbar nbar_b/(2 m nu)).

    Returns rad/s; linear in nbar_b.
    """
    if nu <= 0 or ion_mass <= 0 or beta <= 0:
        raise ValueError("nu, ion_mass and beta must be positive")
    if nbar_b < 0:
        raise ValueError(f"nbar_b must be nonnegative, got {nbar_b}")
    z_sq = HBAR * nbar_b / (2.0 * ion_mass * nu)
    return nu * z_sq / beta**2


def anharmonicity_negligible(delta_nu: float, kappa: float, factor: float = 0.01) -> bool:
    """True when the anharmonic spread is far below the coupling (dnu < factor*kappa)."""
    return delta_nu < factor * kappa


def heating_rates(
    model: str,
    *,
    gamma_b: float | None = None,
    nbar_b0: float | None = None,
    tau1: float | None = None,
) -> tuple[float, float]:
    """Ion heating rates (mu1, mu2) for the selected environment model.

    "thermal_bath": mu1 = gamma_b (nbar_b0 + 1), mu2 = gamma_b nbar_b0.
    "stochastic_field": mu1 = mu2 = 1/tau1; the default tau1 = 1/60 s is
    calibrated to a heating rate of 0.06 quanta per ms.
    """
    if model == "thermal_bath":
        if gamma_b is None or nbar_b0 is None:
            raise ValueError("thermal_bath model needs gamma_b and nbar_b0")
        if gamma_b < 0 or nbar_b0 < 0:
            raise ValueError("gamma_b and nbar_b0 must be nonnegative")
        return gamma_b * (nbar_b0 + 1.0), gamma_b * nbar_b0
    if model == "stochastic_field":
        if tau1 is None:
            tau1 = 1.0 / 60.0
        if tau1 <= 0:
            raise ValueError(f"tau1 must be positive, got {tau1}")
        rate = 1.0 / tau1
        return rate, rate
    raise ValueError(f"unknown heating model {model!r}")


def gamma_a(omega: float, q_factor: float) -> float:
    """Oscillator energy damping rate omega/Q."""
    if omega <= 0 or q_factor <= 0:
        raise ValueError("omega and Q must be positive")
    return omega / q_factor


def sql_displacement(mass: float, omega: float) -> float:
    """Standard-quantum-limit displacement sqrt(hbar / (2 mass omega)).

    The mass is passed explicitly (cantilever mass in the force-sensing
    context) rather than guessed from a device record.
    """
    return zero_point_length(mass, omega)
