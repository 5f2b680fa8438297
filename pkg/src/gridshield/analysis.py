"""Distributional characterization of the projection detector.

The noise-normalized energy a support captures from the load-row difference
is noncentral chi-square with one degree of freedom per selected state; its
tail probabilities are generalized Marcum Q values.  The oracle variants
remove the known state-drift nuisance first, bounding what calibration can
hope to achieve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .gic import CandidateFamily, PenaltyConfig, gic_select
from .grid_model import TopologyMatrix
from .projection import ProjectorCache, projector
from .results import IdentificationResult


def glrt_statistic(
    topology: TopologyMatrix,
    dz_load: np.ndarray,
    support,
    sigma_e2: float,
    cache: ProjectorCache | None = None,
) -> float:
    """Noise-normalized energy captured by a fixed support."""
    if sigma_e2 <= 0:
        raise ValueError("sigma_e2 must be positive")
    support = tuple(sorted(int(j) for j in support))
    if not support:
        return 0.0
    if cache is not None:
        proj = cache.get(support)
    else:
        proj = projector(topology.h_load[:, list(support)], support=support)
    return proj.energy(np.asarray(dz_load, dtype=float)) / sigma_e2


def oracle_glrt_statistic(
    topology: TopologyMatrix,
    dz_load: np.ndarray,
    load_term: np.ndarray,
    support,
    sigma_e2: float,
    cache: ProjectorCache | None = None,
) -> float:
    """Same statistic with the known state-drift contribution removed.

    `load_term` is the noiseless load-row image of the state change between
    the two snapshots.
    """
    cleaned = np.asarray(dz_load, dtype=float) - np.asarray(load_term, dtype=float)
    return glrt_statistic(topology, cleaned, support, sigma_e2, cache)


def oracle_gic_select(
    topology: TopologyMatrix,
    dz_load: np.ndarray,
    load_term: np.ndarray,
    family: CandidateFamily | None = None,
    penalty: PenaltyConfig = PenaltyConfig(),
    sigma_e2: float = 0.01,
    cache: ProjectorCache | None = None,
    evaluator=None,
) -> IdentificationResult:
    """Penalized selection on the nuisance-free difference."""
    cleaned = np.asarray(dz_load, dtype=float) - np.asarray(load_term, dtype=float)
    return gic_select(
        topology,
        cleaned,
        family=family,
        penalty=penalty,
        sigma_e2=sigma_e2,
        cache=cache,
        evaluator=evaluator,
    )


def marcum_q(order: float, a: float, b: float) -> float:
    """Generalized Marcum Q: upper tail of a noncentral chi-square.

    Q_order(a, b) = P(X > b^2) with X noncentral chi-square, 2*order degrees
    of freedom and noncentrality a^2.
    """
    if order <= 0:
        raise ValueError("order must be positive")
    if a < 0 or b < 0:
        raise ValueError("a and b must be nonnegative")
    if a == 0.0:
        return float(stats.chi2.sf(b * b, 2.0 * order))
    return float(stats.ncx2.sf(b * b, 2.0 * order, a * a))


def glrt_tail(support_size: int, gamma: float, noncentrality: float) -> float:
    """P(statistic > gamma) for a size-`support_size` support.

    `noncentrality` is the normalized energy of the deterministic component
    inside the candidate subspace.
    """
    if support_size < 1:
        raise ValueError("support_size must be at least 1")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if noncentrality < 0:
        raise ValueError("noncentrality must be nonnegative")
    return marcum_q(support_size / 2.0, np.sqrt(noncentrality), np.sqrt(gamma))


def false_alarm_probability(
    support_size: int, gamma: float, nuisance_energy: float, sigma_e2: float
) -> float:
    """Exact false alarm rate when the subspace catches `nuisance_energy`."""
    return glrt_tail(support_size, gamma, nuisance_energy / sigma_e2)


def detection_probability(
    support_size: int, gamma: float, signal_energy: float, sigma_e2: float
) -> float:
    """Detection rate; `signal_energy` is the projected attack-plus-drift energy."""
    return glrt_tail(support_size, gamma, signal_energy / sigma_e2)


@dataclass(frozen=True)
class FalseAlarmBounds:
    lower: float
    upper: float


def false_alarm_bounds(
    support_size: int, gamma: float, eta: float, sigma_e2: float
) -> FalseAlarmBounds:
    """Sandwich on the false alarm rate when only the total drift energy is known.

    The subspace captures between none and all of `eta`, the squared norm of
    the load-row drift image, so the rate lies between the central tail and
    the fully-leaked tail.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    return FalseAlarmBounds(
        lower=glrt_tail(support_size, gamma, 0.0),
        upper=glrt_tail(support_size, gamma, eta / sigma_e2),
    )


def mismatch_fraction(
    topology: TopologyMatrix,
    load_term: np.ndarray,
    support,
    cache: ProjectorCache | None = None,
) -> float:
    """Fraction of the drift energy leaking into a support's subspace, in [0, 1]."""
    load_term = np.asarray(load_term, dtype=float)
    total = float(load_term @ load_term)
    if total == 0.0:
        return 0.0
    support = tuple(sorted(int(j) for j in support))
    if cache is not None:
        proj = cache.get(support)
    else:
        proj = projector(topology.h_load[:, list(support)], support=support)
    return min(1.0, proj.energy(load_term) / total)
