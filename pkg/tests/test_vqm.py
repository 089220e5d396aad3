import itertools

import numpy as np
import pytest

from scatterscore.gmm import (
    Covariance2,
    FitConfig,
    GaussianComponent,
    MixtureModel,
    Point2D,
)
from scatterscore.vqm import (
    MergeMatrix,
    VqmScore,
    build_merge_matrix,
    compare,
    count_components,
    rank,
    read_scores_csv,
    scalar_score,
    score_scatterplot,
    write_scores_csv,
)

from conftest import gaussian_blob, two_blob_plot

FIT_CFG = FitConfig(k_max=3, n_restarts=2, seed=0, em_tolerance=1e-6, max_iterations=200)


def matrix_from_edges(k, edges):
    m = np.eye(k, dtype=np.int8)
    for u, v in edges:
        m[u, v] = m[v, u] = 1
    return MergeMatrix(k=k, entries=m)


def dfs_component_count(adjacency):
    """Independent recursive-DFS oracle for connected components."""
    k = adjacency.shape[0]
    seen = [False] * k
    count = 0
    for start in range(k):
        if seen[start]:
            continue
        count += 1
        stack = [start]
        seen[start] = True
        while stack:
            node = stack.pop()
            for other in range(k):
                if adjacency[node, other] and not seen[other]:
                    seen[other] = True
                    stack.append(other)
    return count


class TestCountComponents:
    def test_no_edges(self):
        assert count_components(matrix_from_edges(3, [])) == 3

    def test_complete_graph(self):
        assert count_components(matrix_from_edges(3, [(0, 1), (0, 2), (1, 2)])) == 1

    def test_transitive_chain(self):
        assert count_components(matrix_from_edges(3, [(0, 1), (1, 2)])) == 1

    def test_k1(self):
        assert count_components(matrix_from_edges(1, [])) == 1

    def test_against_dfs_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            k = int(rng.integers(1, 9))
            m = np.eye(k, dtype=np.int8)
            for u in range(k):
                for v in range(u + 1, k):
                    if rng.random() < 0.3:
                        m[u, v] = m[v, u] = 1
            assert count_components(MergeMatrix(k=k, entries=m)) == dfs_component_count(m)


class TestMergeMatrixType:
    def test_rejects_asymmetry(self):
        m = np.eye(2, dtype=np.int8)
        m[0, 1] = 1
        with pytest.raises(ValueError):
            MergeMatrix(k=2, entries=m)

    def test_diagonal_forced_to_one(self):
        m = np.zeros((2, 2), dtype=np.int8)
        mm = MergeMatrix(k=2, entries=m)
        assert mm.entries[0, 0] == 1 and mm.entries[1, 1] == 1


class TestCompare:
    def test_m_dominates(self):
        assert compare(VqmScore(1, 2), VqmScore(2, 2)) == "<"

    def test_k_breaks_ties(self):
        assert compare(VqmScore(1, 1), VqmScore(1, 2)) == "<"

    def test_equal(self):
        assert compare(VqmScore(2, 3), VqmScore(2, 3)) == "="

    def test_total_order_exhaustive(self):
        scores = [VqmScore(m, k) for k in range(1, 11) for m in range(1, k + 1)]
        for a, b in itertools.product(scores, repeat=2):
            ab, ba = compare(a, b), compare(b, a)
            assert {"<": ">", ">": "<", "=": "="}[ab] == ba  # antisymmetry
        for a, b, c in itertools.permutations(scores[:12], 3):
            if compare(a, b) == "<" and compare(b, c) == "<":
                assert compare(a, c) == "<"


class TestScalarScore:
    def test_simplest_score(self):
        assert scalar_score(VqmScore(1, 1)) == 1.0

    def test_fractional_part(self):
        assert scalar_score(VqmScore(1, 2)) == pytest.approx(1 + 1 / 3, abs=1e-12)

    def test_order_embedding_exhaustive(self):
        scores = [VqmScore(m, k) for k in range(1, 11) for m in range(1, k + 1)]
        for a, b in itertools.product(scores, repeat=2):
            rel = compare(a, b)
            sa, sb = scalar_score(a), scalar_score(b)
            if rel == "<":
                assert sa < sb
            elif rel == ">":
                assert sa > sb
            else:
                assert sa == sb

    def test_integer_part_is_m(self):
        for k in range(1, 11):
            for m in range(1, k + 1):
                assert int(scalar_score(VqmScore(m, k))) == m


class TestRank:
    def test_ascending_example(self):
        scores = [("a", VqmScore(1, 1)), ("b", VqmScore(2, 2)), ("c", VqmScore(1, 3))]
        assert [i for i, _ in rank(scores, ascending=True)] == ["a", "c", "b"]

    def test_descending_default(self):
        scores = [("a", VqmScore(1, 1)), ("b", VqmScore(2, 2)), ("c", VqmScore(1, 3))]
        assert [i for i, _ in rank(scores)] == ["b", "c", "a"]

    def test_ties_keep_input_order(self):
        scores = [(n, VqmScore(1, 2)) for n in "abcd"]
        assert [i for i, _ in rank(scores)] == list("abcd")
        assert [i for i, _ in rank(scores, ascending=True)] == list("abcd")

    def test_input_reversal_same_ranking(self):
        scores = [("a", VqmScore(1, 1)), ("b", VqmScore(2, 2)), ("c", VqmScore(3, 3))]
        assert [i for i, _ in rank(scores)] == [i for i, _ in rank(scores[::-1])]


def isotropic_component(weight, x, y, var=1.0):
    return GaussianComponent(weight, Point2D(x, y), Covariance2(var, 0.0, var))


class TestBuildMergeMatrix:
    def test_single_component(self, trained_merger):
        model = MixtureModel(
            components=(isotropic_component(1.0, 0.0, 0.0),), log_likelihood=0.0, n_points=1
        )
        mm = build_merge_matrix(model, trained_merger)
        assert mm.k == 1
        assert count_components(mm) == 1

    def test_far_pair_not_merged(self, trained_merger):
        model = MixtureModel(
            components=(isotropic_component(0.5, 0.0, 0.0), isotropic_component(0.5, 0.0, 21.0)),
            log_likelihood=0.0,
            n_points=1,
        )
        mm = build_merge_matrix(model, trained_merger)
        assert mm.entries[0, 1] == 0

    def test_coincident_pair_merged(self, trained_merger):
        model = MixtureModel(
            components=(isotropic_component(0.5, 1.0, 1.0), isotropic_component(0.5, 1.0, 1.0)),
            log_likelihood=0.0,
            n_points=1,
        )
        mm = build_merge_matrix(model, trained_merger)
        assert mm.entries[0, 1] == 1

    def test_component_permutation_invariance(self, trained_merger):
        comps = (
            isotropic_component(0.3, 0.0, 0.0),
            isotropic_component(0.3, 0.0, 1.2),
            isotropic_component(0.4, 10.0, 0.0, var=2.0),
        )
        model = MixtureModel(components=comps, log_likelihood=0.0, n_points=1)
        base = build_merge_matrix(model, trained_merger)
        perm = [2, 0, 1]
        permuted_model = MixtureModel(
            components=tuple(comps[i] for i in perm), log_likelihood=0.0, n_points=1
        )
        permuted = build_merge_matrix(permuted_model, trained_merger)
        for a in range(3):
            for b in range(3):
                assert permuted.entries[a, b] == base.entries[perm[a], perm[b]]
        assert count_components(base) == count_components(permuted)


class TestScoreScatterplot:
    def test_single_blob_scores_one_one(self, trained_merger):
        hits = 0
        for seed in range(15):
            sp = gaussian_blob(400, [0.0, 0.0], seed=seed)
            if score_scatterplot(sp, FIT_CFG, trained_merger) == VqmScore(1, 1):
                hits += 1
        assert hits >= 13

    def test_two_far_blobs_score_two_two(self, trained_merger):
        hits = 0
        for seed in range(15):
            sp = two_blob_plot(200, 21.0, seed=seed)
            if score_scatterplot(sp, FIT_CFG, trained_merger) == VqmScore(2, 2):
                hits += 1
        assert hits >= 13

    def test_overlapping_blobs_merge_to_one(self, trained_merger):
        for seed in range(10):
            sp = two_blob_plot(250, 1.0, seed=seed)
            score = score_scatterplot(sp, FIT_CFG, trained_merger)
            assert score.m == 1

    def test_m_bounded_by_k_star(self, trained_merger):
        rng = np.random.default_rng(55)
        for seed in range(10):
            sep = float(rng.uniform(0, 12))
            sp = two_blob_plot(150, sep, seed=seed)
            score = score_scatterplot(sp, FIT_CFG, trained_merger)
            assert 1 <= score.m <= score.k_star


class TestScoresCsv:
    def test_roundtrip(self, tmp_path):
        scores = [("a", VqmScore(1, 2)), ("b", VqmScore(3, 4))]
        path = tmp_path / "scores.csv"
        write_scores_csv(path, scores)
        assert read_scores_csv(path) == scores

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("foo,bar\n1,2\n")
        with pytest.raises(ValueError):
            read_scores_csv(path)
