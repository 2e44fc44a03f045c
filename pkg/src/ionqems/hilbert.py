"""Truncated-Fock-space linear algebra.

Operators and density matrices are dense complex ndarrays. The joint space of
the two modes is always ordered (oscillator a) otimes (ion b) and built with
``tensor``/``np.kron`` in that order; this convention is relied on everywhere
downstream. Constructor outputs are marked read-only so shared values are safe
across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FockTruncation",
    "destroy",
    "create",
    "number",
    "fock_state",
    "thermal_state",
    "tensor",
    "expectation",
    "dissipator",
    "truncation_for",
    "partial_trace",
    "density_matrix_checks",
    "validate_density_matrix",
]

# Smallest truncation we ever hand out, so that a, a+ stay nondegenerate.
MIN_LEVELS = 2


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def destroy(n_levels: int) -> np.ndarray:
    """Annihilation operator on an n_levels-dimensional Fock space.

    Matrix elements <m|a|n> = sqrt(n) delta_{m,n-1}.
    """
    if n_levels < MIN_LEVELS:
        raise ValueError(f"need at least {MIN_LEVELS} Fock levels, got {n_levels}")
    return _readonly(np.diag(np.sqrt(np.arange(1, n_levels)), k=1).astype(complex))


def create(n_levels: int) -> np.ndarray:
    """Creation operator, the adjoint of ``destroy``."""
    return _readonly(destroy(n_levels).conj().T.copy())


def number(n_levels: int) -> np.ndarray:
    """Number operator diag(0, 1, ..., n_levels-1)."""
    if n_levels < MIN_LEVELS:
        raise ValueError(f"need at least {MIN_LEVELS} Fock levels, got {n_levels}")
    return _readonly(np.diag(np.arange(n_levels)).astype(complex))


def fock_state(n_levels: int, n: int) -> np.ndarray:
    """Density matrix |n><n| on an n_levels-dimensional space."""
    if n_levels < MIN_LEVELS:
        raise ValueError(f"need at least {MIN_LEVELS} Fock levels, got {n_levels}")
    if not 0 <= n < n_levels:
        raise ValueError(f"Fock index {n} out of range [0, {n_levels})")
    rho = np.zeros((n_levels, n_levels), dtype=complex)
    rho[n, n] = 1.0
    return _readonly(rho)


def thermal_state(n_levels: int, nbar: float) -> np.ndarray:
    """Thermal density matrix with target mean occupation ``nbar``.

    Populations follow the geometric law p_n proportional to
    (nbar/(1+nbar))^n, renormalized over the truncated space so the trace is
    exactly 1. The realized mean occupation is therefore slightly below
    ``nbar`` when the truncation tail is non-negligible.
    """
    if n_levels < MIN_LEVELS:
        raise ValueError(f"need at least {MIN_LEVELS} Fock levels, got {n_levels}")
    if nbar < 0:
        raise ValueError(f"nbar must be nonnegative, got {nbar}")
    if nbar == 0:
        return fock_state(n_levels, 0)
    n = np.arange(n_levels)
    # log-space geometric weights: n*log(nbar) - (n+1)*log(1+nbar)
    log_p = n * math.log(nbar) - (n + 1) * math.log(1.0 + nbar)
    p = np.exp(log_p - log_p.max())
    p /= p.sum()
    return _readonly(np.diag(p).astype(complex))


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; mode ordering (oscillator a) otimes (ion b)."""
    return _readonly(np.kron(a, b))


def expectation(op: np.ndarray, rho: np.ndarray) -> complex:
    """trace(op @ rho) without forming the product."""
    if op.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {op.shape} vs {rho.shape}")
    return complex(np.sum(op * rho.T))


def dissipator(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Lindblad dissipator D[O]rho = O rho O+ - (O+O rho + rho O+O)/2."""
    if op.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {op.shape} vs {rho.shape}")
    od = op.conj().T
    odo = od @ op
    return op @ rho @ od - 0.5 * (odo @ rho + rho @ odo)


def truncation_for(nbar: float, tail_mass_bound: float) -> int:
    """Smallest N such that a thermal state's mass at levels >= N is below the bound.

    The tail mass of the geometric distribution is (nbar/(1+nbar))^N. The
    return value is floored at 2 levels.
    """
    if not 0.0 < tail_mass_bound < 1.0:
        raise ValueError(f"tail_mass_bound must be in (0, 1), got {tail_mass_bound}")
    if nbar < 0:
        raise ValueError(f"nbar must be nonnegative, got {nbar}")
    if nbar == 0:
        return MIN_LEVELS
    r = nbar / (1.0 + nbar)
    n = max(MIN_LEVELS, math.ceil(math.log(tail_mass_bound) / math.log(r)))
    # guard against a boundary rounding miss
    while r**n > tail_mass_bound:
        n += 1
    return n


@dataclass(frozen=True)
class FockTruncation:
    """A truncation choice together with the tail-mass bound that produced it."""

    n_levels: int
    tail_mass_bound: float

    def __post_init__(self) -> None:
        if self.n_levels < MIN_LEVELS:
            raise ValueError(f"n_levels must be >= {MIN_LEVELS}")
        if not 0.0 <= self.tail_mass_bound < 1.0:
            raise ValueError("tail_mass_bound must be in [0, 1)")

    @classmethod
    def for_thermal(cls, nbar: float, tail_mass_bound: float) -> "FockTruncation":
        return cls(truncation_for(nbar, tail_mass_bound), tail_mass_bound)


def partial_trace(rho: np.ndarray, n_a: int, n_b: int, keep: str) -> np.ndarray:
    """Trace out one mode of a joint (a otimes b) density matrix.

    Args:
        rho: joint density matrix of dimension n_a*n_b.
        n_a, n_b: per-mode truncations.
        keep: "a" to return the oscillator state, "b" for the ion.
    """
    d = n_a * n_b
    if rho.shape != (d, d):
        raise ValueError(f"expected shape {(d, d)}, got {rho.shape}")
    r4 = rho.reshape(n_a, n_b, n_a, n_b)
    if keep == "a":
        return np.einsum("ikjk->ij", r4)
    if keep == "b":
        return np.einsum("kikj->ij", r4)
    raise ValueError(f"keep must be 'a' or 'b', got {keep!r}")


def density_matrix_checks(rho: np.ndarray) -> tuple[float, float, float]:
    """Measure (hermiticity error, trace error, minimum eigenvalue) of rho."""
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr = abs(float(np.trace(rho).real) - 1.0) + abs(float(np.trace(rho).imag))
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    return herm, tr, min_eig


def validate_density_matrix(
    rho: np.ndarray,
    herm_tol: float = 1e-12,
    trace_tol: float = 1e-9,
    eig_floor: float = -1e-8,
) -> None:
    """Raise ValueError if rho violates the density-matrix invariants."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    herm, tr, min_eig = density_matrix_checks(rho)
    if herm > herm_tol:
        raise ValueError(f"not Hermitian: max deviation {herm:.3e} > {herm_tol:.1e}")
    if tr > trace_tol:
        raise ValueError(f"trace off by {tr:.3e} > {trace_tol:.1e}")
    if min_eig < eig_floor:
        raise ValueError(f"minimum eigenvalue {min_eig:.3e} below {eig_floor:.1e}")
