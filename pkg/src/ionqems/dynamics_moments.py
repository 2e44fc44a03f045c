"""Closed second-moment dynamics of the coupled oscillator-ion system.

The master equation couples the quadratic moments n_a = <a+a>, n_b = <b+b>
and c = <a+b> into a closed linear set (no higher moments enter):

    dn_a/dt = -2 kappa Im c - gamma_a (n_a - nbar_a0)
    dn_b/dt = +2 kappa Im c - (mu1 - mu2) n_b + mu2
    dc/dt   = i delta c - i kappa (n_b - n_a) - (gamma_a + mu1 - mu2)/2 c

These are derived from the adjoint generator of the full master equation
(d<A>/dt = i<[H,A]>/hbar + sum of adjoint dissipators); the derivation is
cross-checked against the full density-matrix propagator in the test suite
before anything else relies on it. With delta = mu1 = mu2 = 0 the set has the
closed-form solution implemented in ``nbar_b_analytic``/``nbar_a_analytic``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IllConditionedError, IntegrationError, OverdampedError
from .params import SystemParams
from .trajectory import Trajectory

__all__ = [
    "MomentState",
    "moment_rhs",
    "evolve_moments",
    "moment_steady_state",
    "nbar_b_analytic",
    "nbar_a_analytic",
    "nbar_b_short_time",
    "nbar_b_quadratic",
    "exchange_time",
    "exchange_frequency",
]

#: default (absolute, relative) integrator tolerances, matching the full-ME path
DEFAULT_STEP_CONTROL = (1e-10, 1e-8)


@dataclass(frozen=True)
class MomentState:
    """Second moments (n_a, n_b, c = <a+b>) of the two-mode state."""

    n_a: float
    n_b: float
    c: complex = 0j

    def __post_init__(self) -> None:
        if self.n_a < 0 or self.n_b < 0:
            raise ValueError(f"occupations must be nonnegative, got {self.n_a}, {self.n_b}")


def moment_rhs(m: MomentState, params: SystemParams) -> tuple[float, float, complex]:
    """Time derivatives (dn_a/dt, dn_b/dt, dc/dt) of the moment set."""
    im_c = m.c.imag
    dna = -2.0 * params.kappa * im_c - params.gamma_a * (m.n_a - params.nbar_a0)
    dnb = 2.0 * params.kappa * im_c - (params.mu1 - params.mu2) * m.n_b + params.mu2
    dc = (
        1j * params.delta * m.c
        - 1j * params.kappa * (m.n_b - m.n_a)
        - 0.5 * (params.gamma_a + params.mu1 - params.mu2) * m.c
    )
    return dna, dnb, dc


def _rhs_vec(params: SystemParams):
    """The same rhs on the real vector (n_a, n_b, Re c, Im c)."""
    k, g = params.kappa, params.gamma_a
    s = 0.5 * (g + params.mu1 - params.mu2)
    mu_diff, mu2, delta, na0 = params.mu1 - params.mu2, params.mu2, params.delta, params.nbar_a0

    def rhs(t: float, y: np.ndarray) -> list[float]:
        na, nb, x, v = y
        return [
            -2.0 * k * v - g * (na - na0),
            2.0 * k * v - mu_diff * nb + mu2,
            -delta * v - s * x,
            delta * x - k * (nb - na) - s * v,
        ]

    return rhs


def evolve_moments(
    m0: MomentState,
    params: SystemParams,
    grid: np.ndarray,
    step_control: tuple[float, float] = DEFAULT_STEP_CONTROL,
) -> Trajectory:
    """Integrate the moment equations over ``grid`` (seconds, increasing).

    ``m0`` is the state at ``grid[0]``. Uses the same adaptive scheme and
    default tolerances as the full density-matrix path so the two stay
    comparable. With mu1 = mu2 > 0 the ion occupation grows linearly without
    bound at late times; that is the model, nothing is clamped.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2:
        raise ValueError("grid must contain at least 2 times")
    if not np.all(np.diff(grid) > 0):
        raise ValueError("grid must be strictly increasing")
    atol, rtol = step_control
    y0 = [m0.n_a, m0.n_b, m0.c.real, m0.c.imag]
    sol = solve_ivp(
        _rhs_vec(params),
        (grid[0], grid[-1]),
        y0,
        method="DOP853",
        t_eval=grid,
        rtol=rtol,
        atol=atol,
        # keep dense-output samples as accurate as the steps (see the
        # matching cap in the density-matrix back end)
        max_step=(grid[-1] - grid[0]) / 64.0,
    )
    if not sol.success:
        raise IntegrationError(f"moment integration failed: {sol.message}")
    traj = Trajectory(
        times=sol.t,
        nbar_a=sol.y[0],
        nbar_b=sol.y[1],
        re_c=sol.y[2],
        im_c=sol.y[3],
    )
    traj.validate()
    return traj


def moment_steady_state(params: SystemParams) -> MomentState:
    """Steady state of the linear moment system (rhs = 0).

    Solves the 4x4 real linear system for (n_a, n_b, Re c, Im c). Raises
    ``IllConditionedError`` when the system has no unique steady state
    (e.g. every damping rate zero, or kappa = 0 with mu1 <= mu2 so the
    decoupled ion heats without bound).
    """
    k, g, delta = params.kappa, params.gamma_a, params.delta
    if k == 0.0:
        # decoupled: the oscillator sits at its bath, the ion at its own fixed point
        if g == 0.0 or params.mu1 <= params.mu2:
            raise IllConditionedError("no unique steady state for these rates")
        nb = params.mu2 / (params.mu1 - params.mu2)
        return MomentState(params.nbar_a0, nb, 0j)
    s = 0.5 * (g + params.mu1 - params.mu2)
    mat = np.array(
        [
            [-g, 0.0, 0.0, -2.0 * k],
            [0.0, -(params.mu1 - params.mu2), 0.0, 2.0 * k],
            [0.0, 0.0, -s, -delta],
            [k, -k, delta, -s],
        ]
    )
    vec = np.array([g * params.nbar_a0, params.mu2, 0.0, 0.0])
    try:
        x = np.linalg.solve(mat, -vec)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedError(f"moment system has no unique steady state: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise IllConditionedError("moment steady state is not finite")
    return MomentState(x[0], x[1], complex(x[2], x[3]))


def exchange_frequency(kappa: float, gamma_a: float, allow_overdamped: bool = False):
    """Damped exchange frequency Omega = sqrt(kappa^2 - (gamma_a/4)^2).

    Real and positive on the underdamped branch kappa > gamma_a/4. With
    ``allow_overdamped`` the analytic continuation (imaginary Omega) is
    returned as a complex number; the critically damped point itself is
    rejected as ill-conditioned.
    """
    disc = kappa * kappa - (gamma_a / 4.0) ** 2
    if disc > 0:
        return math.sqrt(disc)
    if not allow_overdamped:
        raise OverdampedError(
            f"kappa = {kappa:.6g} <= gamma_a/4 = {gamma_a / 4.0:.6g}; "
            "pass allow_overdamped=True for the analytically continued branch"
        )
    if disc == 0:
        raise IllConditionedError("critically damped point kappa = gamma_a/4 not supported")
    return complex(0.0, math.sqrt(-disc))


def nbar_b_analytic(
    tau,
    nbar_a0: float,
    nbar_b0: float,
    kappa: float,
    gamma_a: float,
    allow_overdamped: bool = False,
):
    """Mean ion occupation after coupling for tau (delta = mu1 = mu2 = 0).

    Closed-form solution of the moment set:

        nbar_b(tau) = nbar_a0 - (nbar_a0 - nbar_b0)/(8 Omega^2) e^{-gamma_a tau/2}
                      [ (4 Omega^2 - 2 kappa^2 + i gamma_a Omega) e^{-2i Omega tau}
                        + 4 kappa^2
                        + (4 Omega^2 - 2 kappa^2 - i gamma_a Omega) e^{+2i Omega tau} ]

    On the underdamped branch the bracket is evaluated in its explicitly real
    form. The opt-in overdamped continuation evaluates the complex form and
    verifies the imaginary residue is below 1e-12 (relative) before
    discarding it. Accepts scalar or array tau.
    """
    _check_analytic_args(tau, nbar_a0, nbar_b0, kappa, gamma_a)
    tau = np.asarray(tau, dtype=float)
    omega = exchange_frequency(kappa, gamma_a, allow_overdamped)
    if isinstance(omega, complex):
        bracket = (
            (4 * omega**2 - 2 * kappa**2 + 1j * gamma_a * omega) * np.exp(-2j * omega * tau)
            + 4 * kappa**2
            + (4 * omega**2 - 2 * kappa**2 - 1j * gamma_a * omega) * np.exp(2j * omega * tau)
        )
        envelope = np.exp(-gamma_a * tau / 2.0) * bracket / (8.0 * omega**2)
        scale = np.maximum(1.0, np.abs(envelope.real))
        if np.any(np.abs(envelope.imag) / scale > 1e-12):
            raise IllConditionedError("overdamped continuation produced a complex result")
        envelope = envelope.real
    else:
        bracket = (
            2.0 * (4 * omega**2 - 2 * kappa**2) * np.cos(2 * omega * tau)
            + 2.0 * gamma_a * omega * np.sin(2 * omega * tau)
            + 4 * kappa**2
        )
        envelope = np.exp(-gamma_a * tau / 2.0) * bracket / (8.0 * omega**2)
    out = nbar_a0 - (nbar_a0 - nbar_b0) * envelope
    return out if out.ndim else float(out)


def nbar_a_analytic(
    tau,
    nbar_a0: float,
    nbar_b0: float,
    kappa: float,
    gamma_a: float,
    allow_overdamped: bool = False,
):
    """Mean oscillator occupation after coupling for tau (delta = mu1 = mu2 = 0).

        nbar_a(tau) = nbar_a0 - (nbar_a0 - nbar_b0) e^{-gamma_a tau/2}
                      kappa^2 sin^2(Omega tau)/Omega^2
    """
    _check_analytic_args(tau, nbar_a0, nbar_b0, kappa, gamma_a)
    tau = np.asarray(tau, dtype=float)
    omega = exchange_frequency(kappa, gamma_a, allow_overdamped)
    if isinstance(omega, complex):
        # sin(i x)/i = sinh(x): the ratio sin^2(Omega tau)/Omega^2 stays real
        ratio = (np.sin(omega * tau) / omega) ** 2
        scale = np.maximum(1.0, np.abs(ratio.real))
        if np.any(np.abs(ratio.imag) / scale > 1e-12):
            raise IllConditionedError("overdamped continuation produced a complex result")
        ratio = ratio.real
    else:
        ratio = (np.sin(omega * tau) / omega) ** 2
    out = nbar_a0 - (nbar_a0 - nbar_b0) * np.exp(-gamma_a * tau / 2.0) * kappa**2 * ratio
    return out if out.ndim else float(out)


def nbar_b_short_time(tau, nbar_a0: float, kappa: float):
    """Short-time limit (gamma_a tau << 1): nbar_a0 sin^2(kappa tau)."""
    tau = np.asarray(tau, dtype=float)
    out = nbar_a0 * np.sin(kappa * tau) ** 2
    return out if out.ndim else float(out)


def nbar_b_quadratic(tau, nbar_a0: float, kappa: float):
    """Quadratic rise nbar_a0 (kappa tau)^2, the readout-inversion form."""
    tau = np.asarray(tau, dtype=float)
    out = nbar_a0 * (kappa * tau) ** 2
    return out if out.ndim else float(out)


def exchange_time(kappa: float, gamma_a: float = 0.0) -> float:
    """First occupation-swap time tau* = pi/(2 Omega), underdamped branch."""
    omega = exchange_frequency(kappa, gamma_a)
    return math.pi / (2.0 * omega)


def _check_analytic_args(tau, nbar_a0, nbar_b0, kappa, gamma_a) -> None:
    if np.any(np.asarray(tau) < 0):
        raise ValueError("tau must be nonnegative")
    if nbar_a0 < 0 or nbar_b0 < 0:
        raise ValueError("occupations must be nonnegative")
    if kappa < 0 or gamma_a < 0:
        raise ValueError("rates must be nonnegative")
