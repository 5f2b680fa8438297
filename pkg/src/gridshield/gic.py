"""Structure-constrained information-criterion selection of attacked states.

Each candidate support is scored by the noise-normalized energy its column
subspace captures from the load-row difference, minus a sparsity penalty.
The empty support competes with a calibrated offset, so selection doubles as
a constant-false-alarm detector.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid_model import TopologyMatrix
from .projection import (
    RANK_RTOL,
    DegenerateSupportError,
    ProjectorCache,
    ml_attack_estimate,
    projector,
)
from .results import IdentificationResult

# Candidate counts above this switch energy evaluation to the batched path.
_BATCH_THRESHOLD = 128

# Rank gate on the determinant of the correlation-normalized Gram submatrix.
# A support the QR pivot gate rejects has true determinant at most
# RANK_RTOL**2 = 1e-16, which LU evaluates with roughly 1e-15 absolute noise;
# the gate must sit above that noise band while staying below the smallest
# full-rank determinant, so borderline supports are skipped rather than
# scored with unreliable inverses.
_GRAM_DET_GATE = 1e-12


@dataclass(frozen=True)
class PenaltyConfig:
    """Sparsity penalty: zeta per selected state, gamma_gic granted to the
    empty support.  A larger gamma_gic makes detection more conservative."""

    zeta: float = 2.0
    gamma_gic: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.zeta) or self.zeta < 0:
            raise ValueError("zeta must be nonnegative")
        if not np.isfinite(self.gamma_gic):
            raise ValueError("gamma_gic must be finite")

    def penalty(self, size: int) -> float:
        return self.zeta * size if size else -self.gamma_gic

    @property
    def null_score(self) -> float:
        return self.gamma_gic


@dataclass(frozen=True)
class CandidateFamily:
    """All candidate supports, ordered by cardinality then lexicographically."""

    ground: tuple[int, ...]
    k_max: int
    supports: tuple[tuple[int, ...], ...]

    @classmethod
    def enumerate_from(cls, ground, k_max: int) -> "CandidateFamily":
        ground = tuple(sorted(int(g) for g in ground))
        if len(set(ground)) != len(ground):
            raise ValueError("ground set has repeated columns")
        if k_max < 1:
            raise ValueError("k_max must be at least 1")
        k_max = min(k_max, len(ground))
        supports = tuple(
            comb
            for k in range(1, k_max + 1)
            for comb in itertools.combinations(ground, k)
        )
        return cls(ground=ground, k_max=k_max, supports=supports)

    def __len__(self) -> int:
        return len(self.supports)

    @cached_property
    def groups(self) -> tuple[tuple[int, np.ndarray, np.ndarray], ...]:
        """(size, positions into `supports`, index matrix) per cardinality."""
        by_size: dict[int, list[int]] = {}
        for pos, s in enumerate(self.supports):
            by_size.setdefault(len(s), []).append(pos)
        out = []
        for size, positions in by_size.items():
            pos_arr = np.array(positions, dtype=int)
            idx = np.array([self.supports[p] for p in positions], dtype=int)
            out.append((size, pos_arr, idx))
        return tuple(out)


def default_family(topology: TopologyMatrix, k_max: int = 6) -> CandidateFamily:
    return CandidateFamily.enumerate_from(topology.restricted_states, k_max)


def gic_statistic(
    topology: TopologyMatrix,
    dz_load: np.ndarray,
    support,
    penalty: PenaltyConfig,
    sigma_e2: float,
    cache: ProjectorCache | None = None,
) -> float:
    """Penalized score of one support; the empty support scores gamma_gic."""
    support = tuple(sorted(int(j) for j in support))
    if not support:
        return penalty.null_score
    if sigma_e2 <= 0:
        raise ValueError("sigma_e2 must be positive")
    if cache is not None:
        proj = cache.get(support)
    else:
        proj = projector(topology.h_load[:, list(support)], support=support)
    energy = proj.energy(np.asarray(dz_load, dtype=float))
    return energy / sigma_e2 - penalty.penalty(len(support))


def _degenerate_rows(gram: np.ndarray, gi: np.ndarray) -> np.ndarray:
    """True where a support's Gram submatrix is numerically rank deficient.

    Gated on the determinant of the correlation-normalized submatrix, which
    is bounded above by the squared smallest relative QR pivot: anything the
    projector rank gate rejects is flagged here as well.  Callers must have
    removed zero columns already.
    """
    scale = np.sqrt(np.diagonal(gram))[gi]
    sub = gram[gi[:, :, None], gi[:, None, :]]
    norm = sub / (scale[:, :, None] * scale[:, None, :])
    sign, logdet = np.linalg.slogdet(norm)
    return (sign <= 0) | (logdet < np.log(_GRAM_DET_GATE))


class FamilyEvaluator:
    """Candidate family bound to one measurement block, inverses precomputed.

    Scoring a difference vector against every candidate then costs one
    correlation matvec plus a quadratic form per support.  Degenerate
    candidates (zero or dependent columns) are dropped up front; their spans
    are covered by smaller full-rank candidates, so selections agree with the
    unbound route.
    """

    def __init__(self, h_load: np.ndarray, family: CandidateFamily):
        self.family = family
        self.h_load = np.asarray(h_load, dtype=float)
        self.gram = self.h_load.T @ self.h_load
        col_norm2 = np.diag(self.gram).copy()
        max_norm2 = float(col_norm2.max()) if col_norm2.size else 0.0
        zero_cols = col_norm2 <= RANK_RTOL**2 * max_norm2
        col_norm2[zero_cols] = 1.0  # keep the normalization finite
        col_scale = np.sqrt(col_norm2)
        self._col_scale = col_scale
        groups = []
        skipped: list[int] = []
        for size, positions, idx in family.groups:
            bad = zero_cols[idx].any(axis=1)
            skipped.extend(positions[bad].tolist())
            pos, gi = positions[~bad], idx[~bad]
            if pos.size == 0:
                continue
            scale = col_scale[gi]
            norm = self.gram[gi[:, :, None], gi[:, None, :]] / (
                scale[:, :, None] * scale[:, None, :]
            )
            sign, logdet = np.linalg.slogdet(norm)
            deg = (sign <= 0) | (logdet < np.log(_GRAM_DET_GATE))
            skipped.extend(pos[deg].tolist())
            pos, gi, norm = pos[~deg], gi[~deg], norm[~deg]
            if pos.size == 0:
                continue
            # slogdet and inv share the LU pivots, so these cannot be singular
            inv = np.linalg.inv(norm)
            groups.append((size, pos, gi, inv))
        self.groups = tuple(groups)
        self.skipped: tuple[int, ...] = tuple(sorted(skipped))

    def energies(self, dz_load: np.ndarray) -> np.ndarray:
        """Projection energies aligned with family.supports, NaN where skipped."""
        corr = (self.h_load.T @ np.asarray(dz_load, dtype=float)) / self._col_scale
        out = np.full(len(self.family.supports), np.nan)
        for _size, pos, gi, inv in self.groups:
            sc = corr[gi]
            out[pos] = np.einsum("nk,nkl,nl->n", sc, inv, sc)
        return out

    def max_scores(
        self,
        dz_load_batch: np.ndarray,
        zeta: float,
        sigma_e2: float,
        chunk: int = 16,
    ) -> np.ndarray:
        """Best penalized score per draw, computed in draw chunks to bound memory."""
        draws = np.atleast_2d(np.asarray(dz_load_batch, dtype=float))
        corr = (draws @ self.h_load) / self._col_scale
        best = np.full(draws.shape[0], -np.inf)
        for _size, _pos, gi, inv in self.groups:
            penalty = zeta * gi.shape[1]
            for start in range(0, corr.shape[0], chunk):
                sc = corr[start : start + chunk, gi]
                energies = np.einsum("dnk,nkl,dnl->dn", sc, inv, sc)
                scores = energies.max(axis=1) / sigma_e2 - penalty
                np.maximum(best[start : start + chunk], scores, out=best[start : start + chunk])
        return best


def candidate_energies(
    h_load: np.ndarray, dz_load: np.ndarray, family: CandidateFamily
) -> tuple[np.ndarray, list[int]]:
    """Projection energy of dz_load onto every candidate subspace.

    Returns (energies aligned with family.supports, positions of skipped
    degenerate candidates, whose energy is set to NaN).  Candidates are
    evaluated per cardinality through batched Gram solves; the result matches
    the projector route to floating point accuracy.
    """
    dz_load = np.asarray(dz_load, dtype=float)
    energies = np.full(len(family.supports), np.nan)
    skipped: list[int] = []

    gram = h_load.T @ h_load
    corr = h_load.T @ dz_load
    col_norm2 = np.diag(gram)
    max_norm2 = float(col_norm2.max()) if col_norm2.size else 0.0
    zero_cols = col_norm2 <= (1e-8) ** 2 * max_norm2

    for size, positions, idx in family.groups:
        bad = zero_cols[idx].any(axis=1)
        good = ~bad
        skipped.extend(positions[bad].tolist())
        if not good.any():
            continue
        pos = positions[good]
        gi = idx[good]
        try:
            sub_gram = gram[gi[:, :, None], gi[:, None, :]]
            sub_corr = corr[gi]
            coef = np.linalg.solve(sub_gram, sub_corr[..., None])[..., 0]
            energies[pos] = np.einsum("nk,nk->n", sub_corr, coef)
        except np.linalg.LinAlgError:
            # a singular candidate poisons the whole batch: mask and retry
            deg = _degenerate_rows(gram, gi)
            skipped.extend(pos[deg].tolist())
            keep = ~deg
            if not keep.any():
                continue
            pos, gi = pos[keep], gi[keep]
            sub_gram = gram[gi[:, :, None], gi[:, None, :]]
            sub_corr = corr[gi]
            try:
                coef = np.linalg.solve(sub_gram, sub_corr[..., None])[..., 0]
                energies[pos] = np.einsum("nk,nk->n", sub_corr, coef)
            except np.linalg.LinAlgError:
                for p, support in zip(pos, gi):
                    try:
                        proj = projector(h_load[:, support], support=tuple(support))
                    except DegenerateSupportError:
                        skipped.append(int(p))
                        continue
                    energies[p] = proj.energy(dz_load)
    return energies, sorted(skipped)


def _loop_energies(
    h_load: np.ndarray,
    dz_load: np.ndarray,
    family: CandidateFamily,
    cache: ProjectorCache | None,
) -> tuple[np.ndarray, list[int]]:
    energies = np.full(len(family.supports), np.nan)
    skipped: list[int] = []
    for i, support in enumerate(family.supports):
        try:
            if cache is not None:
                proj = cache.get(support)
            else:
                proj = projector(h_load[:, list(support)], support=support)
        except DegenerateSupportError:
            skipped.append(i)
            continue
        energies[i] = proj.energy(dz_load)
    return energies, skipped


def gic_select(
    topology: TopologyMatrix,
    dz_load: np.ndarray,
    family: CandidateFamily | None = None,
    penalty: PenaltyConfig = PenaltyConfig(),
    sigma_e2: float = 0.01,
    cache: ProjectorCache | None = None,
    collect_scores: bool = False,
    evaluator: FamilyEvaluator | None = None,
) -> IdentificationResult:
    """Pick the support maximizing the penalized energy score.

    The empty support participates with score gamma_gic; ties resolve to the
    earlier candidate in enumeration order (smaller cardinality, then
    lexicographic), so the null wins exact ties.  Passing a prebuilt
    `evaluator` amortizes the per-support factorizations across calls.
    """
    if sigma_e2 <= 0:
        raise ValueError("sigma_e2 must be positive")
    if evaluator is not None and family is not None and evaluator.family is not family:
        raise ValueError("evaluator was built for a different candidate family")
    if evaluator is not None:
        family = evaluator.family
    elif family is None:
        family = default_family(topology)
    dz_load = np.asarray(dz_load, dtype=float)
    h_load = topology.h_load

    if evaluator is not None:
        energies, skipped = evaluator.energies(dz_load), list(evaluator.skipped)
    elif len(family) > _BATCH_THRESHOLD or cache is None:
        energies, skipped = candidate_energies(h_load, dz_load, family)
    else:
        energies, skipped = _loop_energies(h_load, dz_load, family, cache)

    sizes = np.array([len(s) for s in family.supports])
    scores = energies / sigma_e2 - penalty.zeta * sizes

    best_idx = -1
    best_score = float("-inf")
    valid = np.flatnonzero(~np.isnan(scores))
    if valid.size:
        # enumeration order breaks ties toward the earlier candidate
        rel = int(np.argmax(scores[valid]))
        best_idx = int(valid[rel])
        best_score = float(scores[best_idx])

    detected = best_score > penalty.null_score
    if detected:
        support = family.supports[best_idx]
        values = ml_attack_estimate(h_load[:, list(support)], dz_load)
    else:
        support = ()
        values = np.zeros(0)

    score_table = None
    if collect_scores:
        table = [((), penalty.null_score)]
        table.extend(
            (s, float(scores[i]))
            for i, s in enumerate(family.supports)
            if not np.isnan(scores[i])
        )
        score_table = tuple(table)

    return IdentificationResult(
        support=support,
        values=values,
        detected=detected,
        statistic=best_score,
        scores=score_table,
        diagnostics={"skipped": [family.supports[i] for i in skipped]},
    )


def detect_from_selection(result: IdentificationResult) -> bool:
    """An attack is declared exactly when a nonempty support was selected."""
    return bool(result.support)


def max_score_samples(
    topology: TopologyMatrix,
    dz_load_batch: np.ndarray,
    family: CandidateFamily,
    zeta: float,
    sigma_e2: float,
    evaluator: FamilyEvaluator | None = None,
) -> np.ndarray:
    """Best penalized candidate score per draw: max over supports of
    E/sigma_e2 - zeta*|support|.  `dz_load_batch` has one draw per row.
    Degenerate candidates are skipped, matching `gic_select`."""
    if evaluator is None:
        evaluator = FamilyEvaluator(topology.h_load, family)
    elif evaluator.family is not family:
        raise ValueError("evaluator was built for a different candidate family")
    return evaluator.max_scores(dz_load_batch, zeta, sigma_e2)


def calibrate_gamma_gic(
    topology: TopologyMatrix,
    noise,
    alpha: float,
    n_null: int,
    rng: np.random.Generator,
    family: CandidateFamily | None = None,
    zeta: float = 2.0,
    null_sampler=None,
) -> float:
    """Empirical (1 - alpha) quantile of the best penalized score under the null.

    `null_sampler(rng)` draws one load-row difference under no attack; by
    default pure difference noise is used.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    if n_null < 1:
        raise ValueError("n_null must be positive")
    if family is None:
        family = default_family(topology)
    m = len(topology.load_rows)
    if null_sampler is None:
        draws = noise.sample_difference(rng, (n_null, m))
    else:
        draws = np.stack([null_sampler(rng) for _ in range(n_null)])
    scores = max_score_samples(topology, draws, family, zeta, noise.sigma_e2)
    return float(np.quantile(scores, 1.0 - alpha))
