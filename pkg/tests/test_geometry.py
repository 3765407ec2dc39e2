import math

import numpy as np
import pytest

from furstat import (
    OrderedPartition,
    StatsCloud,
    cloud,
    containment_defect,
    delta,
    directed_hausdorff,
    hausdorff,
    mass,
    stabilize,
    stats_point,
    tail_bound,
    trivial_action,
)
from furstat.errors import BudgetError, MalformedInputError
from furstat.geometry import containment_report, points_for_labels, word_matrices
from furstat.words import GroupWord, enumerate_words

from oracles import all_labelings


def W(text):
    return GroupWord.parse(text, 2)


def as_set(points, tol=1e-12):
    return {tuple(np.rint(p.reshape(-1) / tol).astype(np.int64)) for p in points}


def brute_cloud(action, words, n):
    """Every labeling's statistics point via direct mass evaluation."""
    pts = []
    for labels in all_labelings(action.n_cells, n):
        blocks = [[c for c, l in zip(action.cell_ids, labels) if l == i] for i in range(n)]
        pts.append([[[mass(action, w, Ai, Aj) for Aj in blocks] for Ai in blocks] for w in words])
    return np.array(pts)


def brute_directed(A, B):
    return max(min(np.abs(p - q).max() for q in B) for p in A)


def point_cloud(*points):
    """Cloud of dims (m, 1) whose m coordinates are the given vectors."""
    return StatsCloud(np.array(points, dtype=float).reshape(len(points), -1, 1, 1), "exact")


class TestStatsPoint:
    def test_single_piece(self, boundary2):
        part = OrderedPartition.from_labels(boundary2, [0] * boundary2.n_cells)
        p = stats_point(boundary2, enumerate_words(2, 4), part)
        assert p.values.shape == (4, 1, 1)
        assert np.allclose(p.values, 1.0, atol=1e-12)

    def test_trivial_diagonal(self, m2):
        a = trivial_action([0.2, 0.3, 0.5], m2)
        part = OrderedPartition.from_labels(a, [0, 1, 0])
        p = stats_point(a, [W("a"), W("a b^-1")], part)
        for k in range(2):
            assert np.allclose(p.values[k], np.diag([0.7, 0.3]))

    def test_boundary_a_of_a(self, boundary2):
        labels = [0 if c.split()[0] == "a" else 1 for c in boundary2.cell_ids]
        p = stats_point(boundary2, [W("a")], OrderedPartition.from_labels(boundary2, labels))
        assert p.values[0, 0, 0] == pytest.approx(1 / 12, abs=1e-15)

    def test_row_sums_match_mass(self, boundary2, rng):
        labels = rng.integers(0, 3, size=boundary2.n_cells)
        part = OrderedPartition.from_labels(boundary2, labels, 3)
        words = enumerate_words(2, 6)
        p = stats_point(boundary2, words, part)
        blocks = part.blocks(boundary2)
        for k, w in enumerate(words):
            assert p.values[k].sum() == pytest.approx(1.0, abs=1e-10)
            for i in range(3):
                assert p.values[k, i].sum() == pytest.approx(mass(boundary2, w, blocks[i], None), abs=1e-12)

    def test_distance(self, boundary2):
        part = OrderedPartition.from_labels(boundary2, [0] * 6 + [1] * 6)
        p = stats_point(boundary2, [W("a")], part)
        assert p.distance(p) == 0.0


class TestPartition:
    def test_labels_out_of_range(self):
        with pytest.raises(MalformedInputError):
            OrderedPartition({"x": 3}, 2)

    def test_from_blocks(self, m2):
        a = trivial_action([0.5, 0.5], m2)
        part = OrderedPartition.from_blocks(a, [["1"], ["0"], []])
        assert list(part.labels(a)) == [1, 0] and part.n == 3

    def test_duplicate_cell(self, m2):
        a = trivial_action([0.5, 0.5], m2)
        with pytest.raises(MalformedInputError):
            OrderedPartition.from_blocks(a, [["0"], ["0"]])

    def test_unassigned_cell(self, m2):
        a = trivial_action([0.5, 0.5], m2)
        with pytest.raises(MalformedInputError):
            OrderedPartition({"0": 1}, 1).labels(a)


class TestCloud:
    def test_single_piece(self, boundary2):
        c = cloud(boundary2, enumerate_words(2, 3), 1)
        assert len(c) == 1 and np.allclose(c.points, 1.0)

    def test_trivial_two_cells(self, m2):
        a = trivial_action([0.3, 0.7], m2)
        assert len(cloud(a, [GroupWord.identity(2)], 2)) == 4

    def test_equal_weights_deduplicate(self, m2):
        a = trivial_action([0.5, 0.5], m2)
        assert len(cloud(a, [GroupWord.identity(2)], 2)) == 3

    def test_matches_brute_force(self, random_action, rng):
        a = random_action(5, rng)
        words = enumerate_words(2, 3)
        got = cloud(a, words, 2)
        assert as_set(got.points) == as_set(brute_cloud(a, words, 2))

    def test_budget_error(self, boundary2):
        with pytest.raises(BudgetError):
            cloud(boundary2, enumerate_words(2, 2), 3, budget=1000)

    def test_sampled_subset_of_exact(self, random_action, rng):
        a = random_action(8, rng)
        words = enumerate_words(2, 4)
        exact = cloud(a, words, 2)
        sampled = cloud(a, words, 2, mode="sampled", budget=50, seed=3)
        assert as_set(sampled.points) <= as_set(exact.points)

    def test_parallel_identical(self, random_action, rng):
        a = random_action(6, rng)
        words = enumerate_words(2, 4)
        serial = cloud(a, words, 4, n_jobs=1)
        a._cloud_cache.clear()
        parallel = cloud(a, words, 4, n_jobs=4)
        assert np.array_equal(serial.points, parallel.points)
        assert np.array_equal(serial.canonical, parallel.canonical)

    def test_sampled_deterministic(self, random_action, rng):
        a = random_action(7, rng)
        words = enumerate_words(2, 3)
        x = cloud(a, words, 3, mode="sampled", budget=200, seed=11)
        a._cloud_cache.clear()
        y = cloud(a, words, 3, mode="sampled", budget=200, seed=11)
        assert np.array_equal(x.points, y.points)

    def test_bad_mode(self, boundary1):
        with pytest.raises(MalformedInputError):
            cloud(boundary1, [W("a")], 2, mode="fast")

    def test_csv(self, m2):
        a = trivial_action([0.3, 0.7], m2)
        text = cloud(a, [GroupWord.identity(2)], 2).to_csv()
        lines = text.splitlines()
        assert lines[0].startswith("# dims=1x2x2 mode=exact")
        assert lines[1] == "v_1_1_1,v_1_1_2,v_1_2_1,v_1_2_2"
        assert len(lines) == 2 + 4

    def test_prefix_projection(self, random_action, rng):
        a = random_action(4, rng)
        words = enumerate_words(2, 4)
        full = cloud(a, words, 2)
        a._cloud_cache.clear()
        assert as_set(full.prefix(2).points) == as_set(cloud(a, words[:2], 2).points)


class TestHausdorff:
    def test_equal(self):
        A = point_cloud([0.0, 0.1], [0.5, 0.5])
        assert directed_hausdorff(A, A) == 0.0

    def test_inclusion_one_way(self):
        A = point_cloud([0.0])
        B = point_cloud([0.0], [0.3])
        assert directed_hausdorff(A, B) == 0.0
        assert directed_hausdorff(B, A) == pytest.approx(0.3)
        assert hausdorff(A, B) == pytest.approx(0.3)

    def test_dim_mismatch(self):
        with pytest.raises(MalformedInputError):
            directed_hausdorff(point_cloud([0.0]), StatsCloud(np.zeros((1, 1, 2, 2)), "exact"))

    def test_against_brute_force(self, rng):
        for _ in range(10):
            A = rng.random((int(rng.integers(1, 40)), 2, 2, 2))
            B = rng.random((int(rng.integers(1, 40)), 2, 2, 2))
            ca, cb = StatsCloud(A, "sampled"), StatsCloud(B, "sampled")
            want = brute_directed(A.reshape(len(A), -1), B.reshape(len(B), -1))
            assert directed_hausdorff(ca, cb) == pytest.approx(want, abs=1e-15)

    def test_label_symmetry_shortcut(self, random_action, rng):
        a, b = random_action(4, rng), random_action(4, rng)
        words = enumerate_words(2, 3)
        ca, cb = cloud(a, words, 3), cloud(b, words, 3)
        full = StatsCloud(ca.points, "exact")
        assert directed_hausdorff(ca, cb) == directed_hausdorff(full, cb)


class TestDelta:
    def test_tail_bound(self):
        assert tail_bound(6, 6) == 127 / 4096
        assert tail_bound(1, 1) == 0.75

    def test_self_distance(self, random_action, rng):
        a = random_action(5, rng)
        rep = delta(a, a)
        assert rep.truncated_value == 0.0
        assert rep.tail_bound == pytest.approx(0.031006, abs=1e-6)
        assert rep.interval == (0.0, 127 / 4096)

    def test_symmetric(self, random_action, rng):
        a, b = random_action(4, rng), random_action(5, rng)
        assert delta(a, b).truncated_value == delta(b, a).truncated_value

    def test_weighted_sum_of_terms(self, random_action, rng):
        a, b = random_action(4, rng), random_action(4, rng)
        rep = delta(a, b, 3, 3)
        total = math.fsum(2.0 ** -(m + n) * d for (m, n), d in rep.terms.items())
        assert rep.truncated_value == total

    def test_stabilize_direction(self, random_action, rng):
        a = random_action(4, rng)
        b = stabilize(a, [0.5, 0.5])
        rep = containment_report(a, b, 6, 3)
        assert all(d == 0.0 for d in rep.terms.values())

    def test_budget_errors_recorded(self, boundary2, trivial1):
        rep = delta(boundary2, trivial1, 2, 6)
        # 4^12 already exceeds the default budget
        assert set(rep.errors) == {4, 5, 6}
        assert rep.missing_bound == pytest.approx(sum(2.0 ** -(m + n) for m in (1, 2) for n in (4, 5, 6)))
        assert rep.interval[1] == pytest.approx(rep.truncated_value + rep.tail_bound + rep.missing_bound)
        assert "n=6" in rep.summary()

    def test_boundary_vs_trivial_defect(self, boundary2, m2):
        assert containment_defect(boundary2, trivial_action([0.5, 0.5], m2), 2, 2) > 1e-3

    def test_sampled_side_is_labelled(self, random_action, rng):
        a, b = random_action(4, rng), random_action(4, rng)
        rep = delta(a, b, 2, 2, mode=("exact", "sampled"), budget=100)
        assert rep.approximate_sides == ["b"]
        assert "approximate" in rep.summary()

    def test_csv_row(self, random_action, rng):
        a = random_action(3, rng)
        row = delta(a, a, 2, 2).csv_row()
        assert row[0] == "delta" and row[1] == "0" and len(row) == len(delta(a, a, 2, 2).CSV_FIELDS)

    def test_bad_truncation(self, boundary1):
        with pytest.raises(MalformedInputError):
            delta(boundary1, boundary1, 0, 2)


def test_points_for_labels_matches_stats_point(random_action, rng):
    a = random_action(5, rng)
    words = enumerate_words(2, 5)
    labels = rng.integers(0, 3, size=(7, 5))
    batch = points_for_labels(word_matrices(a, words), labels, 3)
    for row, pts in zip(labels, batch):
        single = stats_point(a, words, OrderedPartition.from_labels(a, row, 3)).values
        assert np.allclose(single, pts, atol=1e-15)
