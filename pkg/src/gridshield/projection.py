"""Orthogonal projections onto column subspaces of the restricted matrix.

Projectors are built from a thin QR factorization, never from an explicit
inverse, so energies stay accurate for moderately ill-conditioned supports.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular

# A column counts as dependent when its residual after projection on the
# preceding columns drops below this fraction of its original norm.
RANK_RTOL = 1e-8


class DegenerateSupportError(Exception):
    """Support columns are collinear or zero; no unique projector exists."""

    def __init__(self, support, reason: str = "collinear or zero columns"):
        super().__init__(f"degenerate support {tuple(support)}: {reason}")
        self.support = tuple(support)


@dataclass(frozen=True)
class SubspaceProjector:
    """Projector onto span of `basis`, held as an orthonormal factor."""

    basis: np.ndarray
    q: np.ndarray
    support: tuple[int, ...] = ()

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.q @ self.q.T

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.q @ (self.q.T @ v)

    def energy(self, v: np.ndarray) -> float:
        """Squared norm of the projection of `v`."""
        coeff = self.q.T @ v
        return float(coeff @ coeff)

    @property
    def rank(self) -> int:
        return self.q.shape[1]


def projector(h_sub: np.ndarray, support: tuple[int, ...] = ()) -> SubspaceProjector:
    """Build the orthogonal projector onto the span of `h_sub`'s columns."""
    h_sub = np.atleast_2d(np.asarray(h_sub, dtype=float))
    if h_sub.ndim != 2:
        raise ValueError("basis must be a 2-d array")
    if h_sub.shape[1] == 0:
        raise DegenerateSupportError(support, "empty support")
    q, r = np.linalg.qr(h_sub)
    col_norms = np.linalg.norm(h_sub, axis=0)
    diag = np.abs(np.diag(r))
    if np.any(col_norms == 0.0) or np.any(diag < RANK_RTOL * col_norms):
        raise DegenerateSupportError(support)
    return SubspaceProjector(basis=h_sub, q=q, support=tuple(support))


def projection_energy(proj: SubspaceProjector, v: np.ndarray) -> float:
    return proj.energy(np.asarray(v, dtype=float))


def ml_attack_estimate(h_sub: np.ndarray, dz_load: np.ndarray) -> np.ndarray:
    """Least-squares bias values on a support: (H'H)^{-1} H' dz via QR."""
    h_sub = np.atleast_2d(np.asarray(h_sub, dtype=float))
    q, r = np.linalg.qr(h_sub)
    col_norms = np.linalg.norm(h_sub, axis=0)
    diag = np.abs(np.diag(r))
    if np.any(col_norms == 0.0) or np.any(diag < RANK_RTOL * col_norms):
        raise DegenerateSupportError(range(h_sub.shape[1]))
    return solve_triangular(r, q.T @ np.asarray(dz_load, dtype=float))


class ProjectorCache:
    """Per-run cache of projectors over one fixed matrix, keyed by support.

    Lookups are guarded by a lock so concurrent readers never observe a
    partially built entry.  Degenerate supports are cached as failures.
    """

    def __init__(self, h_full: np.ndarray):
        self._h = np.asarray(h_full, dtype=float)
        self._store: dict[tuple[int, ...], SubspaceProjector | None] = {}
        self._lock = threading.Lock()

    def get(self, support) -> SubspaceProjector:
        key = tuple(sorted(int(j) for j in support))
        with self._lock:
            if key in self._store:
                hit = self._store[key]
                if hit is None:
                    raise DegenerateSupportError(key)
                return hit
        try:
            proj = projector(self._h[:, list(key)], support=key)
        except DegenerateSupportError:
            with self._lock:
                self._store[key] = None
            raise
        with self._lock:
            self._store[key] = proj
        return proj

    def __len__(self) -> int:
        return len(self._store)
