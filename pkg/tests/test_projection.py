"""Orthogonal projector behavior on hand-checkable and random subspaces."""

import numpy as np
import pytest

from gridshield.projection import (
    DegenerateSupportError,
    ProjectorCache,
    ml_attack_estimate,
    projection_energy,
    projector,
)


def test_single_column_hand_oracle():
    # span of [1, 1, 0]: projecting [1, 0, 1] keeps energy 0.5
    h_sub = np.array([[1.0], [1.0], [0.0]])
    proj = projector(h_sub, support=(0,))
    v = np.array([1.0, 0.0, 1.0])
    np.testing.assert_allclose(proj.apply(v), [0.5, 0.5, 0.0], atol=1e-14)
    assert proj.energy(v) == pytest.approx(0.5)
    assert projection_energy(proj, v) == pytest.approx(0.5)
    expected_matrix = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 0.0]])
    np.testing.assert_allclose(proj.matrix, expected_matrix, atol=1e-14)
    assert proj.rank == 1


def test_idempotent_and_symmetric(rng):
    h_sub = rng.normal(size=(12, 4))
    p = projector(h_sub, support=(0, 1, 2, 3)).matrix
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    np.testing.assert_allclose(p, p.T, atol=1e-12)


def test_energy_decomposition(rng):
    h_sub = rng.normal(size=(20, 3))
    proj = projector(h_sub)
    for _ in range(10):
        v = rng.normal(size=20)
        inside = proj.energy(v)
        outside = v - proj.apply(v)
        assert inside + outside @ outside == pytest.approx(v @ v, rel=1e-12)


def test_vector_in_span_is_fixed(rng):
    h_sub = rng.normal(size=(15, 2))
    v = h_sub @ rng.normal(size=2)
    proj = projector(h_sub)
    np.testing.assert_allclose(proj.apply(v), v, atol=1e-12)
    assert proj.energy(v) == pytest.approx(v @ v, rel=1e-12)


def test_rank_counts_independent_columns(rng):
    h_sub = rng.normal(size=(10, 3))
    assert projector(h_sub).rank == 3


def test_empty_support_is_rejected():
    with pytest.raises(DegenerateSupportError, match="empty"):
        projector(np.zeros((5, 0)))


def test_duplicate_columns_are_degenerate(rng):
    col = rng.normal(size=8)
    h_sub = np.column_stack([col, col])
    with pytest.raises(DegenerateSupportError):
        projector(h_sub, support=(1, 4))


def test_zero_column_is_degenerate():
    with pytest.raises(DegenerateSupportError):
        projector(np.zeros((6, 1)), support=(2,))


def test_near_duplicate_columns_are_degenerate(rng):
    col = rng.normal(size=8)
    h_sub = np.column_stack([col, col * (1.0 + 1e-13)])
    with pytest.raises(DegenerateSupportError):
        projector(h_sub)


def test_ml_estimate_recovers_planted_coefficients(rng):
    h_sub = rng.normal(size=(20, 4))
    c = rng.normal(size=4)
    est = ml_attack_estimate(h_sub, h_sub @ c)
    np.testing.assert_allclose(est, c, atol=1e-10)


def test_ml_estimate_minimizes_residual(rng):
    # the fitted residual must be orthogonal to every column
    h_sub = rng.normal(size=(25, 3))
    dz = rng.normal(size=25)
    est = ml_attack_estimate(h_sub, dz)
    residual = dz - h_sub @ est
    np.testing.assert_allclose(h_sub.T @ residual, np.zeros(3), atol=1e-10)


class TestProjectorCache:
    def test_reuses_projector_objects(self, topology):
        cache = ProjectorCache(topology.h_load)
        support = tuple(topology.restricted_states[:2])
        assert cache.get(support) is cache.get(support)

    def test_cached_matches_direct(self, topology, rng):
        cache = ProjectorCache(topology.h_load)
        support = tuple(topology.restricted_states[:3])
        direct = projector(topology.h_load[:, list(support)], support=support)
        v = rng.normal(size=topology.h_load.shape[0])
        assert cache.get(support).energy(v) == pytest.approx(direct.energy(v))

    def test_degenerate_support_raises_every_time(self, topology):
        # bus 11 has a zero restricted column on the bundled case
        zero_col = int(np.flatnonzero(~topology.h_load.any(axis=0))[0])
        cache = ProjectorCache(topology.h_load)
        for _ in range(2):
            with pytest.raises(DegenerateSupportError):
                cache.get((zero_col,))
