"""Model parameters of the two-mode master equation."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SystemParams:
    """Everything the master equation needs.

    Attributes:
        delta: detuning omega - nu between oscillator and ion (rad/s).
        kappa: exchange coupling (rad/s).
        gamma_a: oscillator energy damping rate omega/Q (1/s).
        nbar_a0: oscillator bath occupation (dimensionless).
        mu1, mu2: ion decay/excitation rates (1/s). The thermal-bath model
            uses (gamma_b (nbar_b0 + 1), gamma_b nbar_b0), the stochastic-field
            model mu1 = mu2 = 1/tau1; either way mu2 <= mu1, which is enforced
            (mu2 > mu1 would be a gain medium, outside this model).
    """

    kappa: float
    gamma_a: float = 0.0
    nbar_a0: float = 0.0
    delta: float = 0.0
    mu1: float = 0.0
    mu2: float = 0.0

    def __post_init__(self) -> None:
        for name in ("kappa", "gamma_a", "nbar_a0", "mu1", "mu2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.mu2 > self.mu1:
            raise ValueError(f"mu2 = {self.mu2} must not exceed mu1 = {self.mu1}")
