"""Shared fixtures: the design-point parameter set and small random states."""

import numpy as np
import pytest

from ionqems import SystemParams, default_device

# cantilever/ion pair used throughout the suite: kappa = 2pi x 52.5 kHz,
# omega = 2pi x 19.7 MHz, Q = 30000, bath at 4 K -> nbar_a0 ~ 4000
KAPPA = 2.0 * np.pi * 52.5e3
OMEGA = 2.0 * np.pi * 19.7e6
GAMMA_A = OMEGA / 30000.0
NBAR_A0 = 4000.0


@pytest.fixture
def design_params():
    return SystemParams(kappa=KAPPA, gamma_a=GAMMA_A, nbar_a0=NBAR_A0)


@pytest.fixture
def device():
    return default_device()


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture
def random_density():
    """Factory producing random full-rank density matrices (with coherences)."""
    gen = np.random.default_rng(777)

    def make(d: int) -> np.ndarray:
        x = gen.normal(size=(d, d)) + 1j * gen.normal(size=(d, d))
        rho = x @ x.conj().T
        return rho / np.trace(rho).real

    return make
