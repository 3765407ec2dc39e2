import math

import pytest

from furstat import BoundarySpec, StepDistribution, boundary_action, entropy, validate
from furstat.boundary import first_passage, harmonic_boundary
from furstat.errors import MalformedInputError, SolverError
from furstat.experiments import boundary_entropy_closed_form

from oracles import hitting_frequencies, walk_entropy_speed

BIASED = {1: 0.4, -1: 0.1, 2: 0.3, -2: 0.2}


def closed_form_weight(u_len, rank):
    return 1.0 / (2 * rank) * (2 * rank - 1) ** -(u_len - 1)


@pytest.mark.parametrize("rank", [2, 3, 4])
def test_uniform_first_passage_closed_form(rank):
    F = first_passage({x: 1 / (2 * rank) for x in range(-rank, rank + 1) if x}, rank)
    assert all(v == pytest.approx(1 / (2 * rank - 1)) for v in F.values())


def test_iteration_matches_closed_form_when_forced():
    # a perturbation below the closed-form switch still converges to the same point
    step = {1: 0.25 + 1e-14, -1: 0.25 - 1e-14, 2: 0.25, -2: 0.25}
    F = first_passage(step, 2)
    assert all(v == pytest.approx(1 / 3, abs=1e-9) for v in F.values())


def test_first_passage_fixed_point_residual():
    F = first_passage(BIASED, 2)
    for x in BIASED:
        rhs = BIASED[x] + F[x] * sum(BIASED[y] * F[-y] for y in BIASED if y != x)
        assert abs(rhs - F[x]) < 1e-11


def test_solver_error_carries_residual():
    with pytest.raises(SolverError) as info:
        first_passage(BIASED, 2, maxiter=3)
    assert info.value.residual > 0


@pytest.mark.parametrize("depth, count", [(1, 4), (2, 12), (3, 36)])
def test_uniform_cell_weights(depth, count, m2):
    act = boundary_action(BoundarySpec(2, depth, m2))
    assert act.n_cells == count
    assert all(c.weight == pytest.approx(closed_form_weight(depth, 2), abs=1e-15) for c in act.cells)


@pytest.mark.parametrize("rank", [2, 3])
def test_cell_count_formula(rank):
    act = boundary_action(BoundarySpec(rank, 2, StepDistribution.uniform(rank)))
    assert act.n_cells == 2 * rank * (2 * rank - 1)


@pytest.mark.parametrize("depth", [2, 3, 4])
def test_entropy_depth_invariance(depth, m2):
    assert entropy(boundary_action(BoundarySpec(2, depth, m2))) == pytest.approx(0.5 * math.log(3), abs=1e-9)


@pytest.mark.parametrize("rank", [2, 3, 4])
def test_entropy_closed_form_in_rank(rank):
    act = boundary_action(BoundarySpec(rank, 1, StepDistribution.uniform(rank)))
    assert entropy(act) == pytest.approx(boundary_entropy_closed_form(rank), abs=1e-12)


def test_non_uniform_depth_invariance():
    m = StepDistribution.nearest_neighbor(BIASED, 2)
    values = [entropy(boundary_action(BoundarySpec(2, L, m))) for L in (2, 3, 4)]
    assert max(values) - min(values) < 1e-9
    assert validate(boundary_action(BoundarySpec(2, 3, m))).ok


def test_monte_carlo_entropy():
    # entropy of the simple random walk equals speed * ln(2r - 1)
    estimate = walk_entropy_speed(2, 10**6, seed=7)
    assert abs(estimate - 0.5 * math.log(3)) < 1e-2


@pytest.mark.parametrize("measure", ["uniform", "biased"])
def test_monte_carlo_cylinder_weights(measure):
    m = StepDistribution.uniform(2) if measure == "uniform" else StepDistribution.nearest_neighbor(BIASED, 2)
    act = boundary_action(BoundarySpec(2, 2, m))
    # nu is the hitting law of the walk whose steps are inverses of m-steps
    steps = {-w.letters[0]: p for w, p in m.entries}
    freq = hitting_frequencies(steps, 2, 2, walks=20000, length=60, seed=3)
    from furstat.words import GroupWord
    for c in act.cells:
        key = GroupWord.parse(c.id, 2).letters
        assert abs(freq.get(key, 0.0) - c.weight) < 0.01


def test_harmonic_needs_nearest_neighbor():
    m = StepDistribution.from_pairs([("a b", 0.5), ("b^-1 a^-1", 0.5)], 2)
    with pytest.raises(MalformedInputError):
        harmonic_boundary(m)


def test_harmonic_needs_full_support():
    m = StepDistribution.from_pairs([("a", 0.5), ("b", 0.5)], 2)
    with pytest.raises(MalformedInputError):
        harmonic_boundary(m)


def test_harmonic_needs_rank_two():
    with pytest.raises(MalformedInputError):
        harmonic_boundary(StepDistribution.uniform(1))


def test_exactness_flag(boundary2):
    from furstat import word_transport
    from furstat.words import GroupWord
    assert word_transport(boundary2, GroupWord.parse("a b", 2)).exact
    assert not word_transport(boundary2, GroupWord.parse("a b a", 2)).exact


def test_image_cylinders_partition_measure():
    bd = harmonic_boundary(StepDistribution.nearest_neighbor(BIASED, 2))
    for g in [(1,), (1, 2), (-2, -1, -1)]:
        total = math.fsum(bd.measure(z) for c in bd.cells(2) for z in bd.image(g, c))
        # images of a partition partition the boundary (F is iterative, so 1e-10)
        assert total == pytest.approx(1.0, abs=1e-10)
