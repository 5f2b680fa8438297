"""Shared result type returned by every identification method."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class IdentificationResult:
    """Outcome of one identification call.

    `support` holds state-column indices (empty when no attack is declared)
    and `values` the estimated bias on those columns.  `statistic` is the
    method's scalar detection statistic, recorded so receiver operating
    curves can be swept without re-running the selector.  `scores` optionally
    keeps the full candidate score table; `diagnostics` carries method
    specific extras (skipped candidates, iteration traces, partitions).
    """

    support: tuple[int, ...]
    values: np.ndarray
    detected: bool
    statistic: float
    scores: tuple[tuple[tuple[int, ...], float], ...] | None = None
    diagnostics: dict = field(default_factory=dict)

    def state_vector(self, n_states: int) -> np.ndarray:
        """Full-length state bias vector with `values` scattered on `support`."""
        c = np.zeros(n_states)
        if self.support:
            c[list(self.support)] = self.values
        return c


def empty_result(statistic: float = float("-inf"), **diagnostics) -> IdentificationResult:
    return IdentificationResult(
        support=(),
        values=np.zeros(0),
        detected=False,
        statistic=statistic,
        diagnostics=dict(diagnostics),
    )
