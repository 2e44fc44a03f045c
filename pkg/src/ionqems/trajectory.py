"""Shared trajectory container for both dynamics back ends."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError

#: trace drift beyond this at any sample invalidates a trajectory
TRACE_ERROR_LIMIT = 1e-6


@dataclass
class Trajectory:
    """Observable samples (nbar_a, nbar_b, Re c, Im c) on a time grid.

    ``trace_error`` is populated by the full density-matrix path and stays
    None for the moment path (which has no trace to lose). The summary
    diagnostics ``max_hermiticity_error``/``min_eigenvalue`` cover the samples
    where the full path ran its positivity check.
    """

    times: np.ndarray
    nbar_a: np.ndarray
    nbar_b: np.ndarray
    re_c: np.ndarray
    im_c: np.ndarray
    trace_error: np.ndarray | None = None
    max_hermiticity_error: float | None = None
    min_eigenvalue: float | None = None
    final_state: np.ndarray | None = field(default=None, repr=False)

    def validate(self) -> None:
        n = len(self.times)
        for name in ("nbar_a", "nbar_b", "re_c", "im_c"):
            if len(getattr(self, name)) != n:
                raise IntegrationError(f"{name} length != times length")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise IntegrationError("times must be strictly increasing")
        if self.trace_error is not None:
            if len(self.trace_error) != n:
                raise IntegrationError("trace_error length != times length")
            worst = int(np.argmax(self.trace_error))
            if self.trace_error[worst] > TRACE_ERROR_LIMIT:
                raise IntegrationError(
                    f"trace error {self.trace_error[worst]:.3e} at "
                    f"t={self.times[worst]:.3e} s exceeds {TRACE_ERROR_LIMIT:.1e}"
                )
