"""Error types with stable codes.

``DomainError`` subclasses mark physics/numerics failures (CLI exit 3, HTTP
400 with the ``code`` in the body). ``ConfigError`` marks unresolvable or
contradictory configuration (CLI exit 2). Plain ``ValueError`` from
constructors means an invalid argument and is mapped like a config error at
the boundaries.
"""

from __future__ import annotations


class DomainError(Exception):
    """A simulation-domain failure (saturated measurement, bad regime, ...)."""

    code = "domain"


class PositivityError(DomainError):
    """Density-matrix positivity drifted beyond tolerance during evolution."""

    code = "positivity"


class IntegrationError(DomainError):
    """The ODE integrator failed (step underflow or rejected trajectory)."""

    code = "integration"


class SaturationError(DomainError):
    """Measurement ratio at or beyond 1; phonon number uninformative."""

    code = "saturation"


class IllConditionedError(DomainError):
    """Inversion requested at an ill-conditioned point (e.g. exchange node)."""

    code = "ill_conditioned"


class OverdampedError(DomainError):
    """Underdamped-branch formula called with kappa <= gamma_a/4."""

    code = "overdamped"


class GuardrailError(DomainError):
    """Full density-matrix evolution requested beyond the documented size guardrail."""

    code = "guardrail"


class ConfigError(Exception):
    """Configuration could not be resolved (unknown flag, unit parse, conflict)."""

    code = "config"
