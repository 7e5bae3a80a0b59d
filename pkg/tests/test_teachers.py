import math

import numpy as np
import pytest

from dualign.errors import NumericsError, ShapeError
from dualign.tensor import EmbeddingBatch
from dualign.teachers import (
    RankingLabels,
    TeacherEnsemble,
    combine_teachers,
    pseudo_rank_labels,
    target_distribution,
)


def batch(rows):
    return EmbeddingBatch(np.array(rows, dtype=np.float64))


class TestCombineTeachers:
    def test_degenerate_weight(self):
        t1 = batch([[3, 4], [0, 2]])
        t2 = batch([[1, 1], [1, 1]])
        out = combine_teachers(TeacherEnsemble((t1, t2), (1.0, 0.0)))
        assert np.allclose(out.data, [[0.6, 0.8], [0.0, 1.0]])

    def test_idempotent_on_identical_teachers(self):
        t = batch([[2, 0], [1, 1]])
        out = combine_teachers(TeacherEnsemble((t, t), (0.5, 0.5)))
        assert np.allclose(out.data, [[1, 0], [math.sqrt(0.5), math.sqrt(0.5)]])

    def test_orthogonal_mix(self):
        t1 = batch([[1, 0]])
        t2 = batch([[0, 1]])
        out = combine_teachers(TeacherEnsemble((t1, t2), (0.5, 0.5)))
        assert np.allclose(out.data, [[0.70710678, 0.70710678]])

    def test_rows_unit_norm(self):
        rng = np.random.default_rng(0)
        t1 = EmbeddingBatch(rng.standard_normal((10, 5)))
        t2 = EmbeddingBatch(rng.standard_normal((10, 5)))
        out = combine_teachers(TeacherEnsemble((t1, t2), (0.3, 0.7)))
        assert np.max(np.abs(np.linalg.norm(out.data, axis=1) - 1)) < 1e-9

    def test_rejects_bad_weight_sum(self):
        t = batch([[1, 0]])
        with pytest.raises(NumericsError):
            TeacherEnsemble((t, t), (0.5, 0.6))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ShapeError):
            TeacherEnsemble((batch([[1, 0]]), batch([[1, 0, 0]])), (0.5, 0.5))


class TestTargetDistribution:
    def test_single_row(self):
        out = target_distribution(batch([[1, 2]]), 1.0)
        assert np.allclose(out.data, [[1.0]])

    def test_orthonormal_rows(self):
        out = target_distribution(batch([[1, 0], [0, 1]]), 1.0)
        e = math.e
        assert np.allclose(out.data, [[e / (e + 1), 1 / (e + 1)],
                                      [1 / (e + 1), e / (e + 1)]], atol=1e-12)

    def test_rows_stochastic(self):
        rng = np.random.default_rng(1)
        out = target_distribution(EmbeddingBatch(rng.standard_normal((12, 6))), 0.5)
        assert np.max(np.abs(out.data.sum(axis=1) - 1)) < 1e-9

    def test_rescaling_invariance(self):
        rng = np.random.default_rng(2)
        t = rng.standard_normal((6, 4))
        scale = rng.uniform(0.5, 3.0, (6, 1))
        a = target_distribution(EmbeddingBatch(t), 1.0).data
        b = target_distribution(EmbeddingBatch(t * scale), 1.0).data
        assert np.max(np.abs(a - b)) < 1e-12


class TestPseudoRankLabels:
    def _batch_with_sims(self, sims):
        """Anchor at angle 0; candidate j at angle arccos(sims[j])."""
        rows = [[1.0, 0.0]]
        for s in sims:
            rows.append([s, math.sqrt(1 - s * s)])
        return batch(rows)

    def test_descending_sort(self):
        t = self._batch_with_sims([0.9, 0.1, 0.5])
        labels = pseudo_rank_labels(t)
        assert labels.perms[0] == (1, 3, 2)

    def test_tie_break_identity_order(self):
        t = batch([[1, 0], [1, 0], [1, 0]])
        labels = pseudo_rank_labels(t)
        assert labels.perms[0] == (1, 2)
        assert labels.perms[1] == (0, 2)

    def test_reversal_antisymmetry(self):
        fwd = pseudo_rank_labels(self._batch_with_sims([0.9, 0.5, 0.1]))
        rev = pseudo_rank_labels(self._batch_with_sims([0.1, 0.5, 0.9]))
        assert tuple(reversed(fwd.perms[0])) == rev.perms[0]

    def test_excludes_self_and_full_length(self):
        rng = np.random.default_rng(3)
        t = EmbeddingBatch(rng.standard_normal((7, 4)))
        labels = pseudo_rank_labels(t)
        assert labels.m == 6
        for i, perm in enumerate(labels.perms):
            assert i not in perm
            assert sorted(perm) == [j for j in range(7) if j != i]

    def test_monotone_transform_invariance(self):
        # argsort only sees the order, so scaling the teacher rows
        # (a strictly increasing transform of each similarity) is a no-op
        rng = np.random.default_rng(4)
        t = rng.standard_normal((6, 5))
        a = pseudo_rank_labels(EmbeddingBatch(t)).perms
        b = pseudo_rank_labels(EmbeddingBatch(t * rng.uniform(0.5, 4, (6, 1)))).perms
        assert a == b

    def test_needs_two(self):
        with pytest.raises(ShapeError):
            pseudo_rank_labels(batch([[1, 0]]))
