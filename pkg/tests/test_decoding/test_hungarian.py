"""Tests for the Hungarian solvers and the disjoint-set forest."""

import itertools

import numpy as np
import pytest

from src.decoding.hungarian import hungarian
from src.decoding.union_find import DisjointSet
from src.errors import ContractViolation

SOLVERS = ["textbook", "augmenting"]


def _brute_force(cost: np.ndarray) -> dict[int, int]:
    """Cheapest permutation; ties go to the lexicographically smallest."""
    n = cost.shape[0]
    best = min(
        itertools.permutations(range(n)),
        key=lambda perm: (sum(cost[i, perm[i]] for i in range(n)), perm),
    )
    return dict(enumerate(best))


def matching_cost(cost, assignment: dict[int, int]) -> float:
    matrix = np.asarray(cost, dtype=float)
    return float(sum(matrix[r, c] for r, c in assignment.items()))


# ---------------------------------------------------------------------------
# hungarian
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("solver", SOLVERS)
class TestHungarian:
    def test_worked_example(self, solver) -> None:
        cost = [[1, 2, 3], [2, 4, 6], [3, 6, 9]]
        assignment = hungarian(cost, solver)
        assert assignment == {0: 2, 1: 1, 2: 0}
        assert matching_cost(cost, assignment) == 10.0

    def test_single_cell(self, solver) -> None:
        assert hungarian([[5.0]], solver) == {0: 0}

    def test_empty_matrix(self, solver) -> None:
        assert hungarian(np.zeros((0, 0)), solver) == {}

    def test_all_equal_is_identity(self, solver) -> None:
        assert hungarian(np.ones((4, 4)), solver) == {0: 0, 1: 1, 2: 2, 3: 3}

    def test_lexicographic_tie_break(self, solver) -> None:
        # (0->1, 1->0) and (0->0, 1->1) both cost 2
        cost = [[1, 1, 9], [1, 1, 9], [9, 9, 0]]
        assert hungarian(cost, solver) == {0: 0, 1: 1, 2: 2}

    def test_tie_break_needs_rerouting(self, solver) -> None:
        # optimum 3 reachable as (0->1, 1->2, 2->0) and (0->1, 1->0, 2->2)
        cost = [[5, 1, 5], [1, 5, 1], [1, 5, 1]]
        assignment = hungarian(cost, solver)
        assert matching_cost(cost, assignment) == 3.0
        assert assignment == {0: 1, 1: 0, 2: 2}

    def test_float_costs(self, solver) -> None:
        cost = -np.log(np.array([[0.9, 0.1], [0.6, 0.4]]))
        assert hungarian(cost, solver) == {0: 0, 1: 1}

    def test_matches_brute_force(self, solver) -> None:
        rng = np.random.default_rng(20240611)
        for _ in range(200):
            n = int(rng.integers(2, 8))
            cost = rng.integers(0, 10, size=(n, n)).astype(float)
            assert hungarian(cost, solver) == _brute_force(cost)

    def test_result_is_a_permutation(self, solver) -> None:
        rng = np.random.default_rng(3)
        cost = rng.random((30, 30)) * 27.0
        assignment = hungarian(cost, solver)
        assert sorted(assignment) == list(range(30))
        assert sorted(assignment.values()) == list(range(30))


class TestHungarianSolversAgree:
    def test_same_optimum_on_large_random_matrix(self) -> None:
        rng = np.random.default_rng(11)
        cost = rng.integers(0, 50, size=(60, 60)).astype(float)
        textbook = hungarian(cost, "textbook")
        augmenting = hungarian(cost, "augmenting")
        assert matching_cost(cost, textbook) == matching_cost(cost, augmenting)
        assert textbook == augmenting


class TestHungarianContract:
    def test_non_square(self) -> None:
        with pytest.raises(ContractViolation):
            hungarian([[1, 2, 3], [4, 5, 6]])

    def test_one_dimensional(self) -> None:
        with pytest.raises(ContractViolation):
            hungarian([1, 2])

    def test_negative_cost(self) -> None:
        with pytest.raises(ContractViolation):
            hungarian([[1, -1], [0, 0]])

    def test_non_finite_cost(self) -> None:
        with pytest.raises(ContractViolation):
            hungarian([[1, np.inf], [0, 0]])

    def test_nan_cost(self) -> None:
        with pytest.raises(ContractViolation):
            hungarian([[1, np.nan], [0, 0]])


# ---------------------------------------------------------------------------
# DisjointSet
# ---------------------------------------------------------------------------


class TestDisjointSet:
    def test_singletons(self) -> None:
        forest = DisjointSet(["a", "b"])
        assert forest.find("a") == "a"
        assert len(forest) == 2
        assert forest.groups() == [["a"], ["b"]]

    def test_union_and_groups(self) -> None:
        forest = DisjointSet(["a", "b", "c", "d"])
        assert forest.union("a", "b") is True
        assert forest.union("c", "d") is True
        assert forest.union("b", "a") is False
        assert forest.find("a") == forest.find("b")
        assert forest.find("a") != forest.find("c")
        assert forest.groups() == [["a", "b"], ["c", "d"]]

    def test_long_chain_is_one_group(self) -> None:
        forest: DisjointSet[int] = DisjointSet(range(1000))
        for i in range(999):
            forest.union(i, i + 1)
        assert len(forest.groups()) == 1
        assert len({forest.find(i) for i in range(1000)}) == 1

    def test_unknown_item(self) -> None:
        forest = DisjointSet(["a"])
        assert "z" not in forest
        with pytest.raises(KeyError):
            forest.find("z")

    def test_add_is_idempotent(self) -> None:
        forest = DisjointSet(["a", "b"])
        forest.union("a", "b")
        forest.add("a")
        assert forest.find("a") == forest.find("b")
