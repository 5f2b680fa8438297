"""Weighted least squares state estimation and residual-based bad data tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian measurement noise, parameterized by the difference variance.

    `sigma_e2` is the variance of each element of the difference of two
    consecutive snapshots, so a single snapshot carries half of it.
    """

    sigma_e2: float

    def __post_init__(self):
        if not np.isfinite(self.sigma_e2) or self.sigma_e2 <= 0:
            raise ValueError("sigma_e2 must be positive")

    @property
    def snapshot_variance(self) -> float:
        return self.sigma_e2 / 2.0

    def r_diagonal(self, m: int) -> np.ndarray:
        """Diagonal of the single-snapshot covariance."""
        return np.full(m, self.snapshot_variance)

    def sample_snapshot(self, rng: np.random.Generator, shape) -> np.ndarray:
        return rng.normal(0.0, np.sqrt(self.snapshot_variance), size=shape)

    def sample_difference(self, rng: np.random.Generator, shape) -> np.ndarray:
        return rng.normal(0.0, np.sqrt(self.sigma_e2), size=shape)


@dataclass(frozen=True)
class PsseResult:
    theta: np.ndarray
    residual: np.ndarray
    statistic: float  # squared residual norm


def k_matrix(h: np.ndarray, r_diag: np.ndarray) -> np.ndarray:
    """Estimator gain (H'WH)^{-1}H'W for diagonal weights W = R^{-1}."""
    h = np.asarray(h, dtype=float)
    w = 1.0 / np.asarray(r_diag, dtype=float)
    hw = h.T * w
    return np.linalg.solve(hw @ h, hw)


def wls_psse(h: np.ndarray, r_diag: np.ndarray, z: np.ndarray) -> PsseResult:
    """Weighted least squares state estimate from one snapshot."""
    h = np.asarray(h, dtype=float)
    z = np.asarray(z, dtype=float)
    sqrt_w = 1.0 / np.sqrt(np.asarray(r_diag, dtype=float))
    theta, *_ = np.linalg.lstsq(h * sqrt_w[:, None], z * sqrt_w, rcond=None)
    residual = z - h @ theta
    return PsseResult(theta=theta, residual=residual, statistic=float(residual @ residual))


def bdd_test(
    h: np.ndarray, r_diag: np.ndarray, z: np.ndarray, gamma: float
) -> tuple[float, bool]:
    """Residual test: squared residual norm against a threshold."""
    est = wls_psse(h, r_diag, z)
    return est.statistic, bool(est.statistic > gamma)


def corrected_psse(
    h: np.ndarray, r_diag: np.ndarray, z_next: np.ndarray, c_hat: np.ndarray
) -> PsseResult:
    """State estimate after subtracting an identified measurement bias.

    `c_hat` is the full-length state bias estimate; the cleaned snapshot is
    z_next - H c_hat.
    """
    h = np.asarray(h, dtype=float)
    cleaned = np.asarray(z_next, dtype=float) - h @ np.asarray(c_hat, dtype=float)
    return wls_psse(h, r_diag, cleaned)
