"""Greedy single-state pursuit over the restricted columns.

Each iteration adds the state whose single-column subspace captures the most
residual energy, then re-projects.  The loop stops when the best capture
falls below a calibrated threshold, so the first iteration doubles as the
detector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_model import TopologyMatrix
from .projection import DegenerateSupportError, ml_attack_estimate, projector
from .results import IdentificationResult, empty_result


@dataclass(frozen=True)
class OmpConfig:
    """Iteration cap and stopping threshold for the greedy pursuit."""

    k_max: int = 6
    gamma_omp: float = 0.0

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if not np.isfinite(self.gamma_omp) or self.gamma_omp < 0:
            raise ValueError("gamma_omp must be nonnegative")


def _unit_columns(h_load: np.ndarray, ground) -> tuple[np.ndarray, np.ndarray]:
    """Normalized columns for the ground set; zero columns are masked out."""
    cols = h_load[:, ground]
    norms = np.linalg.norm(cols, axis=0)
    max_norm = norms.max() if norms.size else 0.0
    usable = norms > 1e-8 * max_norm if max_norm > 0 else np.zeros(len(ground), bool)
    units = np.zeros_like(cols)
    units[:, usable] = cols[:, usable] / norms[usable]
    return units, usable


def omp_identify(
    topology: TopologyMatrix,
    dz_load: np.ndarray,
    config: OmpConfig = OmpConfig(),
    ground=None,
) -> IdentificationResult:
    """Greedily select attacked states from the load-row difference.

    Ties on captured energy resolve to the smallest column index.  The
    recorded statistic is the first-iteration best energy, the quantity the
    stopping threshold is calibrated on.
    """
    h_load = topology.h_load
    dz_load = np.asarray(dz_load, dtype=float)
    ground = sorted(int(g) for g in (ground if ground is not None else topology.restricted_states))
    if not ground:
        return empty_result()
    units, usable = _unit_columns(h_load, ground)
    skipped = [g for g, ok in zip(ground, usable) if not ok]

    support: list[int] = []
    residual = dz_load.copy()
    first_best = None
    trace: list[dict] = []
    for iteration in range(min(config.k_max, int(usable.sum()))):
        captures = (units.T @ residual) ** 2
        captures[~usable] = -np.inf
        for j in support:
            captures[ground.index(j)] = -np.inf
        pick = int(np.argmax(captures))  # first max: smallest column wins ties
        best = float(captures[pick])
        if iteration == 0:
            first_best = best
        trace.append({"iteration": iteration, "column": ground[pick], "energy": best})
        if best < config.gamma_omp or best <= 0.0:
            break
        candidate = sorted(support + [ground[pick]])
        try:
            proj = projector(h_load[:, candidate], support=tuple(candidate))
        except DegenerateSupportError:
            trace[-1]["degenerate"] = True
            break
        support = candidate
        residual = dz_load - proj.apply(dz_load)

    if not support:
        return empty_result(
            statistic=first_best if first_best is not None else float("-inf"),
            trace=trace,
            skipped=skipped,
        )
    values = ml_attack_estimate(h_load[:, support], dz_load)
    return IdentificationResult(
        support=tuple(support),
        values=values,
        detected=True,
        statistic=float(first_best),
        diagnostics={"trace": trace, "skipped": skipped},
    )


def single_state_energies(
    topology: TopologyMatrix, dz_load_batch: np.ndarray, ground=None
) -> np.ndarray:
    """Energy captured by each single-state subspace, per draw (vectorized)."""
    ground = sorted(int(g) for g in (ground if ground is not None else topology.restricted_states))
    units, usable = _unit_columns(topology.h_load, ground)
    draws = np.atleast_2d(np.asarray(dz_load_batch, dtype=float))
    captures = (draws @ units) ** 2
    captures[:, ~usable] = -np.inf
    return captures


def calibrate_gamma_omp(
    topology: TopologyMatrix,
    noise,
    alpha: float,
    n_null: int,
    rng: np.random.Generator,
    ground=None,
    null_sampler=None,
) -> float:
    """(1 - alpha) quantile of the first-iteration best energy under the null."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    if n_null < 1:
        raise ValueError("n_null must be positive")
    m = len(topology.load_rows)
    if null_sampler is None:
        draws = noise.sample_difference(rng, (n_null, m))
    else:
        draws = np.stack([null_sampler(rng) for _ in range(n_null)])
    best = single_state_energies(topology, draws, ground).max(axis=1)
    return float(np.quantile(best, 1.0 - alpha))
