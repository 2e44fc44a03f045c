"""Measurement, cooling, and force-sensing protocols over the device layer."""

import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.constants as sc
from scipy.integrate import solve_ivp

from ionqems import hilbert
from ionqems.device import coupling_kappa, thermal_occupation, zero_point_length
from ionqems.dynamics_full import evolve
from ionqems.dynamics_moments import (
    exchange_time,
    moment_steady_state,
    nbar_a_analytic,
    nbar_b_analytic,
)
from ionqems.errors import DomainError, IllConditionedError
from ionqems.params import SystemParams
from ionqems.protocols import (
    COOLING_SCHEMES,
    ForceSensingResult,
    ProtocolResult,
    _one_cooling_cycle,
    cool_continuous,
    cool_iterative,
    cool_single_exchange,
    force_sensitivity,
    run_cooling,
    run_measurement_protocol,
    single_ion_monitoring_feasible,
    single_ion_quanta_bound,
)
from ionqems.readout import PhononDistribution, SidebandDrive

from conftest import GAMMA_A, KAPPA, NBAR_A0


def design_drive(device):
    from ionqems.device import lamb_dicke

    g = lamb_dicke(device).eta * device.rabi_frequency
    return SidebandDrive(g=g, duration=math.pi / (4.0 * g), sideband="red")


# ----------------------------------------------------------- measurement runs


def test_measurement_round_trip_contains_truth(device):
    tau = 1.0 / (coupling_kappa(device) * math.sqrt(NBAR_A0))
    result = run_measurement_protocol(
        device, tau, design_drive(device), shots=100_000, seed=12345, nbar_a0=NBAR_A0
    )
    assert result.scheme == "measurement"
    assert len(result.timeline) == 3
    lo, hi = result.inferred_ci
    assert lo <= NBAR_A0 <= hi
    assert result.inferred_nbar_a0 == pytest.approx(NBAR_A0, rel=0.1)
    assert result.nbar_b_reliable
    assert 0.0 < result.p_red < result.p_blue < 1.0
    # stage I barely dents the oscillator at this short tau
    assert result.final_nbar_a == pytest.approx(NBAR_A0, rel=0.01)


def test_measurement_with_zero_coupling(device):
    off = replace(device, v0=0.0)
    result = run_measurement_protocol(
        off, 1.0e-6, design_drive(device), shots=1000, seed=3
    )
    assert result.inferred_nbar_a0 == 0.0
    assert result.inferred_ci == (0.0, 0.0)
    assert result.estimate.nbar == 0.0
    assert any("no coupling" in note for note in result.notes)
    # with no coupling the oscillator keeps its bath occupancy
    assert result.final_nbar_a == pytest.approx(
        thermal_occupation(off.t_bath, off.omega), rel=1e-12
    )


def test_measurement_at_exchange_node_is_refused(device):
    lossless = replace(device, q_factor=math.inf)
    kappa = coupling_kappa(lossless)
    tau_node = math.pi / kappa
    with pytest.raises(IllConditionedError):
        run_measurement_protocol(
            lossless, tau_node, design_drive(device), shots=1000, seed=0, nbar_a0=100.0
        )


def test_measurement_argument_checks(device):
    with pytest.raises(DomainError):
        run_measurement_protocol(device, 0.0, design_drive(device), shots=100, seed=0)
    with pytest.raises(ValueError):
        run_measurement_protocol(
            device, 1e-6, design_drive(device), shots=100, seed=0, heating="magnetic"
        )


def test_measurement_heating_model_shifts_little(device):
    tau = exchange_time(coupling_kappa(device), GAMMA_A)
    base = run_measurement_protocol(
        device, tau, design_drive(device), shots=1000, seed=1, nbar_a0=NBAR_A0
    )
    heated = run_measurement_protocol(
        device,
        tau,
        design_drive(device),
        shots=1000,
        seed=1,
        nbar_a0=NBAR_A0,
        heating="stochastic_field",
    )
    shift = heated.final_nbar_b - base.final_nbar_b
    # 60 quanta/s over ~5 us is a sub-milliquantum effect
    assert 0.0 < shift < 1e-2


def test_stage_one_thermal_model_against_full_dynamics():
    # the protocol treats the ion marginal after stage I as thermal with the
    # moment-equation mean; check the full master equation agrees level by
    # level at a small occupancy
    nbar_small = 1.0
    n_levels = 18
    params = SystemParams(kappa=KAPPA, gamma_a=GAMMA_A, nbar_a0=nbar_small)
    tau = 0.5 * exchange_time(KAPPA, GAMMA_A)
    rho0 = hilbert.tensor(
        hilbert.thermal_state(n_levels, nbar_small), hilbert.fock_state(n_levels, 0)
    )
    traj = evolve(
        rho0,
        params,
        tau,
        output_grid=np.array([0.0, tau]),
        n_a_levels=n_levels,
        n_b_levels=n_levels,
        keep_final_state=True,
    )
    ion = hilbert.partial_trace(traj.final_state, n_levels, n_levels, "b")
    populations = np.diag(ion).real
    mean = float(np.arange(n_levels) @ populations)
    model = PhononDistribution.thermal(mean, n_levels=n_levels).probs
    assert np.max(np.abs(populations - model)) < 1e-3
    # and the mean itself matches the closed form
    assert mean == pytest.approx(
        nbar_b_analytic(tau, nbar_small, 0.0, KAPPA, GAMMA_A), abs=1e-4
    )


# ---------------------------------------------------------------- cooling


def test_single_exchange_design_point(device):
    result = cool_single_exchange(device, nbar_a0=NBAR_A0)
    tau_star = exchange_time(KAPPA, GAMMA_A)
    assert result.timeline == (("exchange", tau_star),)
    assert result.final_nbar_a == pytest.approx(39.0639214375528, rel=1e-6)
    assert result.final_nbar_b == pytest.approx(
        nbar_b_analytic(tau_star, NBAR_A0, 0.0, KAPPA, GAMMA_A), rel=1e-6
    )


def test_single_exchange_lossless_reaches_ground(device):
    lossless = replace(device, q_factor=math.inf)
    result = cool_single_exchange(lossless, nbar_a0=500.0)
    assert result.final_nbar_a == pytest.approx(0.0, abs=1e-9)
    assert result.final_nbar_b == pytest.approx(500.0, rel=1e-8)


def test_relabeled_schemes_share_the_exchange_numbers(device):
    base = run_cooling(device, "single_exchange", nbar_a0=NBAR_A0)
    assert base.notes == ()
    for scheme in ("dump_ion", "two_traps"):
        other = run_cooling(device, scheme, nbar_a0=NBAR_A0)
        assert other.scheme == scheme
        assert other.final_nbar_a == base.final_nbar_a
        assert other.final_nbar_b == base.final_nbar_b
        assert other.notes  # the operational difference is an annotation
    with pytest.raises(ValueError):
        run_cooling(device, "laser_only")


def test_iterative_single_cycle_matches_single_exchange(device):
    one = cool_iterative(device, cycles=1, recool_time=0.0, nbar_a0=NBAR_A0)
    ref = cool_single_exchange(device, nbar_a0=NBAR_A0)
    assert one.final_nbar_a == pytest.approx(ref.final_nbar_a, rel=1e-4)
    assert one.cycle_nbars[0] == NBAR_A0
    assert len(one.cycle_nbars) == 2


def test_iterative_lossless_ground_in_one_cycle(device):
    lossless = replace(device, q_factor=math.inf)
    result = cool_iterative(lossless, cycles=1, recool_time=0.0, nbar_a0=300.0)
    assert result.final_nbar_a == pytest.approx(0.0, abs=1e-6)


def test_iterative_converges_to_fixed_point(device):
    recool = 5.0e-5
    result = cool_iterative(device, cycles=12, recool_time=recool, nbar_a0=NBAR_A0)
    nbars = np.array(result.cycle_nbars)
    # cooling from the bath value down onto the fixed point: strictly
    # decreasing until convergence, never below the fixed point
    assert nbars[1] < nbars[0]
    assert np.all(np.diff(nbars) < 1e-9 * nbars[0])
    assert result.fixed_point > 0.0
    assert nbars[-1] == pytest.approx(result.fixed_point, rel=1e-9)
    # the affine-map fixed point really is fixed under one more cycle
    tau_star = exchange_time(KAPPA, GAMMA_A)
    again = _one_cooling_cycle(result.fixed_point, KAPPA, GAMMA_A, NBAR_A0, tau_star, recool)
    assert again == pytest.approx(result.fixed_point, rel=1e-6)
    # and a long run lands on it
    long = cool_iterative(device, cycles=60, recool_time=recool, nbar_a0=NBAR_A0)
    assert long.final_nbar_a == pytest.approx(result.fixed_point, rel=1e-6)
    with pytest.raises(ValueError):
        cool_iterative(device, cycles=0, recool_time=0.0)
    with pytest.raises(ValueError):
        cool_iterative(device, cycles=1, recool_time=-1.0)


def test_continuous_cooling_steady_state(device):
    mu1 = 1.0e5
    steady = cool_continuous(device, mu1, nbar_a0=NBAR_A0)
    direct = moment_steady_state(
        SystemParams(kappa=KAPPA, gamma_a=GAMMA_A, nbar_a0=NBAR_A0, mu1=mu1)
    ).n_a
    assert steady == pytest.approx(direct, rel=1e-12)
    # model prediction at the design point (algebraic route pinned in
    # test_dynamics_moments): far above the oscillator ground state
    assert steady == pytest.approx(162.14, rel=1e-3)
    # switching the cooling laser off leaves the oscillator at its bath
    assert cool_continuous(device, 0.0, nbar_a0=NBAR_A0) == pytest.approx(NBAR_A0, rel=1e-12)
    with pytest.raises(ValueError):
        cool_continuous(device, -1.0)


def test_run_cooling_continuous_result_record(device):
    result = run_cooling(device, "continuous", ion_damping=2.0e5, nbar_a0=NBAR_A0)
    assert result.scheme == "continuous"
    assert result.final_nbar_a == pytest.approx(
        cool_continuous(device, 2.0e5, nbar_a0=NBAR_A0), rel=1e-12
    )
    assert result.final_nbar_b == 0.0
    assert math.isinf(result.timeline[0][1])
    assert any("ion damping" in note for note in result.notes)
    assert set(COOLING_SCHEMES) == {
        "single_exchange",
        "dump_ion",
        "two_traps",
        "iterative",
        "continuous",
    }


# ------------------------------------------------------------- force sensing


def test_force_sensitivity_identities(device):
    result = force_sensitivity(device)
    x_zp = zero_point_length(device.cantilever_mass, device.omega)
    gamma = device.omega / device.q_factor
    # f_min is defined by delta_nbar(f_min) = 1
    assert result.delta_nbar == pytest.approx(1.0, rel=1e-12)
    assert 2.0 * result.f_min * x_zp / (sc.hbar * gamma) == pytest.approx(1.0, rel=1e-8)
    assert result.f_min == pytest.approx(sc.hbar * gamma / (2.0 * x_zp), rel=1e-8)
    assert result.x_sql == x_zp
    assert result.force == result.f_min
    # attonewton scale for the default cantilever
    assert 1e-18 < result.f_min < 1e-17


def test_force_shift_is_quadratic(device):
    f = 5.0e-18
    one = force_sensitivity(device, f)
    two = force_sensitivity(device, 2.0 * f)
    assert two.delta_nbar / one.delta_nbar == 4.0
    assert force_sensitivity(device, 0.0).delta_nbar == 0.0
    with pytest.raises(ValueError):
        force_sensitivity(device, -1.0)


def test_force_shift_against_driven_moment_integration(device):
    # independent oracle: resonant drive f_d = F x_zp / hbar enters the
    # moment equations as
    #   d Re(alpha)/dt = -(gamma/2) Re(alpha)
    #   d Im(alpha)/dt = f_d - (gamma/2) Im(alpha)
    #   d n/dt         = 2 f_d Im(alpha) - gamma (n - nbar_th)
    # whose steady state shifts n by 4 f_d^2/gamma^2
    force = 8.0e-18
    gamma = device.omega / device.q_factor
    x_zp = zero_point_length(device.cantilever_mass, device.omega)
    f_d = force * x_zp / sc.hbar
    nbar_th = 25.0

    def rhs(t, y):
        re_a, im_a, n = y
        return [
            -0.5 * gamma * re_a,
            f_d - 0.5 * gamma * im_a,
            2.0 * f_d * im_a - gamma * (n - nbar_th),
        ]

    sol = solve_ivp(
        rhs, (0.0, 40.0 / gamma), [0.0, 0.0, nbar_th], rtol=1e-10, atol=1e-12
    )
    delta_numeric = sol.y[2, -1] - nbar_th
    predicted = force_sensitivity(device, force).delta_nbar
    assert predicted == pytest.approx(delta_numeric, rel=1e-6)


# ------------------------------------------------- single-ion monitoring cost


def test_single_ion_quanta_bound_tracks_full_period():
    bound = single_ion_quanta_bound(NBAR_A0, GAMMA_A, KAPPA)
    assert bound == pytest.approx(NBAR_A0 * math.pi * GAMMA_A / KAPPA, rel=1e-12)
    omega = math.sqrt(KAPPA**2 - (GAMMA_A / 4.0) ** 2)
    full_period_pickup = nbar_b_analytic(math.pi / omega, NBAR_A0, 0.0, KAPPA, GAMMA_A)
    assert 1.8 < bound / full_period_pickup < 2.1


def test_single_ion_feasibility_threshold():
    assert not single_ion_monitoring_feasible(NBAR_A0, GAMMA_A, KAPPA)  # ~157 quanta
    assert single_ion_monitoring_feasible(400.0, GAMMA_A, KAPPA)  # ~15.7 quanta
    assert not single_ion_monitoring_feasible(400.0, GAMMA_A, KAPPA, n_max=10.0)
    with pytest.raises(DomainError):
        single_ion_quanta_bound(100.0, GAMMA_A, 0.0)
    with pytest.raises(DomainError):
        single_ion_quanta_bound(-1.0, GAMMA_A, KAPPA)


# ------------------------------------------------------------------- records


def test_result_validation():
    with pytest.raises(ValueError):
        ProtocolResult(
            scheme="x", timeline=(("phase", -1.0),), final_nbar_a=0.0, final_nbar_b=0.0
        )
    with pytest.raises(ValueError):
        ProtocolResult(scheme="x", timeline=(), final_nbar_a=-0.5, final_nbar_b=0.0)
    with pytest.raises(ValueError):
        ForceSensingResult(delta_nbar=-1.0, f_min=1.0, x_sql=1.0, force=1.0)


def test_oscillator_analytic_consistency_of_exchange(device):
    # the cooling result quotes the same closed form the dynamics layer owns
    result = cool_single_exchange(device, nbar_a0=1234.0)
    tau_star = exchange_time(KAPPA, GAMMA_A)
    assert result.final_nbar_a == pytest.approx(
        float(nbar_a_analytic(tau_star, 1234.0, 0.0, KAPPA, GAMMA_A)), rel=1e-12
    )
