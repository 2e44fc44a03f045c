"""Sideband thermometry: excitation sums, the thermal ratio law, estimators."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionqems.dynamics_moments import exchange_time, nbar_b_analytic
from ionqems.errors import IllConditionedError, SaturationError
from ionqems.readout import (
    N_MAX_RELIABLE,
    MeasurementRecord,
    NbarEstimate,
    PhononDistribution,
    RatioInversion,
    SidebandDrive,
    estimate_nbar,
    infer_nbar_a0,
    nbar_from_ratio,
    ratio_Re,
    sideband_excitation_probability,
    simulate_shots,
)

from conftest import GAMMA_A, KAPPA


# -------------------------------------------------------------- distributions


def test_thermal_distribution_shape():
    dist = PhononDistribution.thermal(2.0)
    assert dist.probs.sum() == pytest.approx(1.0, abs=1e-12)
    # geometric law p_{n+1}/p_n = nbar/(1+nbar)
    np.testing.assert_allclose(dist.probs[1:] / dist.probs[:-1], 2.0 / 3.0, rtol=1e-12)
    assert dist.nbar == pytest.approx(2.0, rel=1e-9)


def test_thermal_distribution_zero_is_ground():
    dist = PhononDistribution.thermal(0.0)
    assert dist.probs[0] == 1.0
    assert dist.nbar == 0.0


def test_fock_distribution():
    dist = PhononDistribution.fock(3)
    assert dist.probs.size == 4
    assert dist.probs[3] == 1.0
    assert dist.nbar == 3.0
    with pytest.raises(ValueError):
        PhononDistribution.fock(5, n_levels=4)
    with pytest.raises(ValueError):
        PhononDistribution.fock(-1)


def test_distribution_validation():
    with pytest.raises(ValueError):
        PhononDistribution(np.array([0.5, 0.4]))  # does not sum to 1
    with pytest.raises(ValueError):
        PhononDistribution(np.array([1.2, -0.2]))
    with pytest.raises(ValueError):
        PhononDistribution(np.array([]))
    dist = PhononDistribution(np.array([0.25, 0.75]))
    with pytest.raises(ValueError):
        dist.probs[0] = 0.9  # stored read-only


def test_drive_and_record_validation():
    with pytest.raises(ValueError):
        SidebandDrive(g=0.0, duration=1.0, sideband="red")
    with pytest.raises(ValueError):
        SidebandDrive(g=1.0, duration=-1.0, sideband="red")
    with pytest.raises(ValueError):
        SidebandDrive(g=1.0, duration=1.0, sideband="carrier")
    with pytest.raises(ValueError):
        MeasurementRecord(100, 100, 101, 0, seed=1)
    with pytest.raises(ValueError):
        MeasurementRecord(0, 100, 0, 0, seed=1)


# ----------------------------------------------------- excitation probability


def test_excitation_probability_fock_states():
    g = 1.0e5
    # ground state never responds to the red sideband, always to the blue
    ground = PhononDistribution.fock(0, n_levels=3)
    assert sideband_excitation_probability(ground, SidebandDrive(g, 1.0e-6, "red")) == 0.0
    t_pi = math.pi / (2.0 * g)  # sin^2(g t) = 1 for the n=0 blue transition
    assert sideband_excitation_probability(
        ground, SidebandDrive(g, t_pi, "blue")
    ) == pytest.approx(1.0, abs=1e-12)
    # |1> on red: sin^2(g sqrt(1) t)
    one = PhononDistribution.fock(1, n_levels=3)
    assert sideband_excitation_probability(one, SidebandDrive(g, t_pi, "red")) == pytest.approx(
        1.0, abs=1e-12
    )
    assert sideband_excitation_probability(
        one, SidebandDrive(g, t_pi / 2.0, "red")
    ) == pytest.approx(0.5, abs=1e-12)


def test_excitation_probability_sqrt_n_scaling():
    g, t = 2.0e4, 3.7e-6
    for n in range(4):
        dist = PhononDistribution.fock(n, n_levels=6)
        red = sideband_excitation_probability(dist, SidebandDrive(g, t, "red"))
        blue = sideband_excitation_probability(dist, SidebandDrive(g, t, "blue"))
        assert red == pytest.approx(math.sin(g * math.sqrt(n) * t) ** 2, abs=1e-12)
        assert blue == pytest.approx(math.sin(g * math.sqrt(n + 1) * t) ** 2, abs=1e-12)


def test_zero_duration_gives_zero_probability():
    dist = PhononDistribution.thermal(1.0)
    assert sideband_excitation_probability(dist, SidebandDrive(1e5, 0.0, "red")) == 0.0
    assert sideband_excitation_probability(dist, SidebandDrive(1e5, 0.0, "blue")) == 0.0


@given(
    nbar=st.floats(min_value=0.0, max_value=20.0),
    pulse_area=st.floats(min_value=0.05, max_value=3.0),
)
@settings(max_examples=50, deadline=None)
def test_red_below_blue_for_thermal_states(nbar, pulse_area):
    # thermal weights decay with n while the blue couplings lead by one
    # quantum: P_red < P_blue strictly (equality only in degenerate limits)
    dist = PhononDistribution.thermal(nbar)
    g = 1.0e5
    t = pulse_area / g
    red = sideband_excitation_probability(dist, SidebandDrive(g, t, "red"))
    blue = sideband_excitation_probability(dist, SidebandDrive(g, t, "blue"))
    assert 0.0 <= red <= 1.0
    assert 0.0 <= blue <= 1.0
    assert red <= blue + 1e-12


# ---------------------------------------------------------------- ratio law


def test_thermal_ratio_identity_grid():
    # R = nbar/(1+nbar) independent of pulse parameters: 10x10 (g, T) grid
    for nbar in (0.1, 1.0, 7.3):
        expected = nbar / (1.0 + nbar)
        dist = PhononDistribution.thermal(nbar)
        for g in np.linspace(2e4, 3e5, 10):
            for t in np.linspace(0.3 / g, 3.0 / g, 10):
                ratio = ratio_Re(dist, g, t)
                assert abs(ratio - expected) <= 1e-9, (nbar, g, t)


def test_ratio_one_quantum_is_one_half():
    dist = PhononDistribution.thermal(1.0)
    assert ratio_Re(dist, 1.2e5, 2.0e-6) == pytest.approx(0.5, abs=1e-10)


def test_ratio_blue_floor():
    # a vanishing blue denominator must be refused, not divided through
    dist = PhononDistribution.fock(0, n_levels=4)
    with pytest.raises(IllConditionedError):
        ratio_Re(dist, 1.0e5, 0.0)


def test_nbar_from_ratio_round_trip():
    for nbar in (0.0, 0.5, 4.0, 15.0):
        inv = nbar_from_ratio(nbar / (1.0 + nbar))
        assert isinstance(inv, RatioInversion)
        assert inv.nbar == pytest.approx(nbar, rel=1e-12, abs=1e-12)
        assert inv.reliable
    high = nbar_from_ratio(30.0 / 31.0)
    assert high.nbar == pytest.approx(30.0, rel=1e-9)
    assert not high.reliable  # above N_MAX_RELIABLE = 20
    assert N_MAX_RELIABLE == 20.0


def test_nbar_from_ratio_saturation():
    with pytest.raises(SaturationError):
        nbar_from_ratio(1.0)
    with pytest.raises(SaturationError):
        nbar_from_ratio(1.3)
    from ionqems.errors import DomainError

    with pytest.raises(DomainError):
        nbar_from_ratio(-0.1)


# ------------------------------------------------------------------ sampling


def test_simulate_shots_deterministic():
    a = simulate_shots(0.3, 0.6, 5000, seed=99)
    b = simulate_shots(0.3, 0.6, 5000, seed=99)
    assert a == b
    c = simulate_shots(0.3, 0.6, 5000, seed=100)
    assert (a.excited_red, a.excited_blue) != (c.excited_red, c.excited_blue)


def test_simulate_shots_stream_independence():
    # red counts come from spawn child 0: changing p_blue must not move them
    a = simulate_shots(0.3, 0.6, 5000, seed=7)
    b = simulate_shots(0.3, 0.1, 5000, seed=7)
    assert a.excited_red == b.excited_red
    assert a.excited_blue != b.excited_blue


def test_simulate_shots_edge_probabilities():
    rec = simulate_shots(0.0, 1.0, 1000, seed=1)
    assert rec.excited_red == 0
    assert rec.excited_blue == 1000


def test_simulate_shots_frequencies_match_probability():
    errs = []
    shots = 4000
    for seed in range(30):
        rec = simulate_shots(0.27, 0.8, shots, seed=seed)
        errs.append(rec.excited_red / shots - 0.27)
    # the mean of 30 independent binomial frequencies: SE ~ sqrt(p(1-p)/n/30)
    se = math.sqrt(0.27 * 0.73 / shots / 30.0)
    assert abs(np.mean(errs)) < 4.0 * se


def test_simulate_shots_validation():
    with pytest.raises(ValueError):
        simulate_shots(-0.1, 0.5, 100, seed=0)
    with pytest.raises(ValueError):
        simulate_shots(0.5, 1.1, 100, seed=0)
    with pytest.raises(ValueError):
        simulate_shots(0.5, 0.5, 0, seed=0)


# ----------------------------------------------------------------- estimator


def test_estimate_nbar_recovers_truth_with_shrinking_error():
    nbar = 2.0
    dist = PhononDistribution.thermal(nbar)
    g = 1.5e5
    t = 1.0 / g
    p_red = sideband_excitation_probability(dist, SidebandDrive(g, t, "red"))
    p_blue = sideband_excitation_probability(dist, SidebandDrive(g, t, "blue"))
    sigmas = []
    for shots in (10**3, 10**4, 10**5, 10**6):
        est = estimate_nbar(simulate_shots(p_red, p_blue, shots, seed=12345))
        assert est.ci_low <= est.nbar <= est.ci_high
        assert abs(est.nbar - nbar) < 5.0 * max(est.sigma, 1e-12)
        assert est.reliable
        sigmas.append(est.sigma)
    # delta-method error shrinks like 1/sqrt(shots)
    for a, b in zip(sigmas, sigmas[1:]):
        assert b < a
        assert b == pytest.approx(a / math.sqrt(10.0), rel=0.35)


def test_estimate_nbar_zero_red_rule_of_three():
    rec = MeasurementRecord(10000, 10000, 0, 5000, seed=0)
    est = estimate_nbar(rec)
    assert est.nbar == 0.0
    assert est.ci_low == 0.0
    ratio_bound = (3.0 / 10000) / 0.5
    assert est.ci_high == pytest.approx(ratio_bound / (1.0 - ratio_bound), rel=1e-12)
    assert est.sigma == 0.0


def test_estimate_nbar_saturation_paths():
    with pytest.raises(SaturationError):
        estimate_nbar(MeasurementRecord(100, 100, 10, 0, seed=0))
    with pytest.raises(SaturationError):
        estimate_nbar(MeasurementRecord(100, 100, 60, 50, seed=0))  # ratio > 1
    with pytest.raises(SaturationError):
        estimate_nbar(MeasurementRecord(100, 100, 50, 50, seed=0))  # ratio = 1


def test_estimate_nbar_flags_deep_thermal_regime():
    # ratio 0.97 -> nbar ~ 32 > 20: numbers are returned but flagged
    est = estimate_nbar(MeasurementRecord(100000, 100000, 97000, 100000 - 1, seed=0))
    assert est.nbar > N_MAX_RELIABLE
    assert not est.reliable


def test_estimator_coverage_at_realistic_settings():
    # 95% nominal delta-method interval: demand >= 93/100 empirical coverage
    nbar = 2.0
    dist = PhononDistribution.thermal(nbar)
    g = 1.5e5
    t = 1.0 / g
    p_red = sideband_excitation_probability(dist, SidebandDrive(g, t, "red"))
    p_blue = sideband_excitation_probability(dist, SidebandDrive(g, t, "blue"))
    hits = 0
    for seed in range(100):
        est = estimate_nbar(simulate_shots(p_red, p_blue, 10**4, seed=seed))
        hits += est.ci_low <= nbar <= est.ci_high
    assert hits >= 93


# ------------------------------------------------------------- inversion map


def test_infer_short_time_round_trip():
    # gamma tau << 1: algebraic inversion of nbar_a0 sin^2(kappa tau)
    tau = 1.0e-6
    nbar_a0 = 4000.0
    nbar_b = nbar_b_analytic(tau, nbar_a0, 0.0, KAPPA, 0.0)
    recovered = infer_nbar_a0(nbar_b, KAPPA, tau, 0.0)
    assert recovered == pytest.approx(nbar_a0, rel=1e-12)


def test_infer_analytic_round_trip_at_short_tau():
    # the numeric inversion agrees with the algebraic one where both apply
    tau = 1.0e-6
    nbar_a0 = 4000.0
    nbar_b = nbar_b_analytic(tau, nbar_a0, 0.0, KAPPA, GAMMA_A)
    recovered = infer_nbar_a0(nbar_b, KAPPA, tau, GAMMA_A, method="analytic")
    assert recovered == pytest.approx(nbar_a0, rel=1e-6)


def test_infer_auto_selects_branch_by_damping():
    nbar_a0 = 800.0
    # gamma tau = 0.004 < 0.01: auto takes the short-time branch and ignores
    # damping; feeding it the undamped value must round-trip exactly
    tau_short = 1.0e-6
    assert GAMMA_A * tau_short < 0.01
    nbar_b = nbar_b_analytic(tau_short, nbar_a0, 0.0, KAPPA, 0.0)
    assert infer_nbar_a0(nbar_b, KAPPA, tau_short, GAMMA_A) == pytest.approx(
        nbar_a0, rel=1e-9
    )
    # gamma tau = 0.04 > 0.01: auto switches to the damped inversion
    tau_long = 1.0e-5
    assert GAMMA_A * tau_long > 0.01
    nbar_b_damped = nbar_b_analytic(tau_long, nbar_a0, 0.0, KAPPA, GAMMA_A)
    assert infer_nbar_a0(nbar_b_damped, KAPPA, tau_long, GAMMA_A) == pytest.approx(
        nbar_a0, rel=1e-9
    )


def test_infer_with_precooled_ion_offset():
    tau = 8.0e-6
    nbar_a0, nbar_b0 = 600.0, 2.0
    nbar_b = nbar_b_analytic(tau, nbar_a0, nbar_b0, KAPPA, GAMMA_A)
    got = infer_nbar_a0(nbar_b, KAPPA, tau, GAMMA_A, nbar_b0=nbar_b0)
    assert got == pytest.approx(nbar_a0, rel=1e-9)


def test_infer_swap_point_consistency():
    # at tau* the ion inherits nearly the full oscillator occupation
    tau_star = exchange_time(KAPPA, GAMMA_A)
    nbar_b = nbar_b_analytic(tau_star, 4000.0, 0.0, KAPPA, GAMMA_A)
    assert infer_nbar_a0(nbar_b, KAPPA, tau_star, GAMMA_A) == pytest.approx(4000.0, rel=1e-9)


def test_infer_refuses_exchange_node():
    # undamped: sin^2(kappa tau) = 0 at tau = pi/kappa, nothing to invert
    tau_node = math.pi / KAPPA
    with pytest.raises(IllConditionedError):
        infer_nbar_a0(10.0, KAPPA, tau_node, 0.0)


def test_infer_refuses_insensitive_analytic_point():
    # nearly undamped at a full exchange period: the damped map's sensitivity
    # to nbar_a0 collapses below the floor
    kappa = 1.0e5
    gamma = 1.0e-2
    tau_node = math.pi / kappa
    with pytest.raises(IllConditionedError):
        infer_nbar_a0(5.0, kappa, tau_node, gamma, method="analytic")


def test_infer_argument_errors():
    from ionqems.errors import DomainError

    with pytest.raises(DomainError):
        infer_nbar_a0(-1.0, KAPPA, 1e-6, GAMMA_A)
    with pytest.raises(DomainError):
        infer_nbar_a0(1.0, KAPPA, 0.0, GAMMA_A)
    with pytest.raises(ValueError):
        infer_nbar_a0(1.0, KAPPA, 1e-6, GAMMA_A, method="magic")


def test_estimate_dataclass_is_plain_data():
    est = NbarEstimate(1.0, 0.5, 1.5, 0.5, 0.25, True)
    assert est.nbar == 1.0
    assert est.reliable
