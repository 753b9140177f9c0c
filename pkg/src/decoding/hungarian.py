"""Hungarian algorithm for square, non-negative cost matrices.

Two solvers share one contract:

``textbook`` (default) follows the classic four steps:
    1. subtract each row's minimum from the row;
    2. subtract each column's minimum from the column;
    3. cover all zeros with the minimum number of lines; N lines means an
       optimal assignment exists among the zeros;
    4. otherwise subtract the smallest uncovered value from every uncovered
       cell, add it to every doubly covered cell and go back to step 3.
The minimum line cover is read off a maximum matching on the zero cells
(Koenig's theorem); the matching is kept between iterations.

``augmenting`` grows the assignment one row at a time along shortest
augmenting paths with row/column potentials, O(N^3).

Among equal-cost optimal assignments both return the lexicographically
smallest one by (row, col). Every optimal assignment uses only cells with
zero reduced cost under the final potentials, so the tie-break is a
search over the zero cells.

Usage:
    from src.decoding.hungarian import hungarian

    assignment = hungarian([[1, 2, 3], [2, 4, 6], [3, 6, 9]])
    # {0: 2, 1: 1, 2: 0}
"""

import logging
from collections import deque
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike

from src.errors import ContractViolation

logger = logging.getLogger(__name__)

Solver = Literal["textbook", "augmenting"]

_ZERO_TOL = 1e-9


# ---------------------------------------------------------------------------
# Zero-cell matching helpers
# ---------------------------------------------------------------------------


def _zero_adjacency(zeros: np.ndarray) -> list[list[int]]:
    return [np.flatnonzero(row).tolist() for row in zeros]


def _augment(adjacency: list[list[int]], row_match: list[int], col_match: list[int]):
    """Grow the matching on zero cells to a maximum one."""
    for root in range(len(row_match)):
        if row_match[root] >= 0:
            continue
        parent: dict[int, int] = {}
        seen = {root}
        queue = deque([root])
        free_col = -1
        while queue and free_col < 0:
            r = queue.popleft()
            for c in adjacency[r]:
                if c in parent:
                    continue
                parent[c] = r
                owner = col_match[c]
                if owner < 0:
                    free_col = c
                    break
                if owner not in seen:
                    seen.add(owner)
                    queue.append(owner)
        if free_col < 0:
            continue
        c = free_col
        while True:
            r = parent[c]
            previous = row_match[r]
            row_match[r] = c
            col_match[c] = r
            if r == root:
                break
            c = previous


def _reachable(
    adjacency: list[list[int]], row_match: list[int], col_match: list[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Rows and columns reachable by alternating paths from unmatched rows."""
    n = len(row_match)
    rows = np.zeros(n, dtype=bool)
    cols = np.zeros(n, dtype=bool)
    queue = deque(r for r in range(n) if row_match[r] < 0)
    rows[list(queue)] = True
    while queue:
        r = queue.popleft()
        for c in adjacency[r]:
            if cols[c]:
                continue
            cols[c] = True
            owner = col_match[c]
            if owner >= 0 and not rows[owner]:
                rows[owner] = True
                queue.append(owner)
    return rows, cols


def _lexicographic(adjacency: list[list[int]], row_match: list[int]) -> list[int]:
    """Rewrite a perfect zero matching into the lexicographically smallest one."""
    n = len(row_match)
    row_match = list(row_match)
    col_match = [0] * n
    for r, c in enumerate(row_match):
        col_match[c] = r
    fixed_rows = [False] * n
    fixed_cols = [False] * n

    def reroute(i: int, j: int) -> bool:
        # Move the owner of column j elsewhere so that row i can take j and
        # i's current column is handed down an alternating path.
        owner, target = col_match[j], row_match[i]
        parent: dict[int, int] = {}
        queue = deque([owner])
        seen = {owner}
        while queue:
            r = queue.popleft()
            for c in adjacency[r]:
                if fixed_cols[c] or c == j or c in parent:
                    continue
                parent[c] = r
                if c == target:
                    while True:
                        r = parent[c]
                        previous = row_match[r]
                        row_match[r] = c
                        col_match[c] = r
                        if r == owner:
                            break
                        c = previous
                    row_match[i] = j
                    col_match[j] = i
                    return True
                nxt = col_match[c]
                if nxt not in seen and not fixed_rows[nxt]:
                    seen.add(nxt)
                    queue.append(nxt)
        return False

    for i in range(n):
        for j in adjacency[i]:
            if fixed_cols[j]:
                continue
            if j == row_match[i] or reroute(i, j):
                break
        fixed_rows[i] = True
        fixed_cols[row_match[i]] = True
    return row_match


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------


def _solve_textbook(cost: np.ndarray) -> list[int]:
    n = cost.shape[0]
    reduced = cost - cost.min(axis=1, keepdims=True)
    reduced -= reduced.min(axis=0, keepdims=True)

    row_match = [-1] * n
    col_match = [-1] * n
    guard = n * n + n
    adjustments = 0
    while True:
        adjacency = _zero_adjacency(reduced <= _ZERO_TOL)
        _augment(adjacency, row_match, col_match)
        if min(row_match) >= 0:
            break
        rows, cols = _reachable(adjacency, row_match, col_match)
        # covering lines: rows outside the reachable set, reachable columns
        uncovered = rows[:, None] & ~cols[None, :]
        smallest = reduced[uncovered].min()
        reduced[uncovered] -= smallest
        reduced[~rows[:, None] & cols[None, :]] += smallest
        adjustments += 1
        if adjustments > guard:
            raise RuntimeError(f"Hungarian did not converge after {guard} steps")

    logger.debug("Textbook Hungarian: n=%d, %d adjustments", n, adjustments)
    return _lexicographic(_zero_adjacency(reduced <= _ZERO_TOL), row_match)


def _solve_augmenting(cost: np.ndarray) -> list[int]:
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j] = row matched to column j (1-based)
    way = np.zeros(n + 1, dtype=int)

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = np.flatnonzero(~used[1:]) + 1
            current = cost[i0 - 1, free - 1] - u[i0] - v[free]
            better = current < minv[free]
            minv[free[better]] = current[better]
            way[free[better]] = j0
            j1 = int(free[np.argmin(minv[free])])
            delta = minv[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break

    row_match = [0] * n
    for j in range(1, n + 1):
        row_match[p[j] - 1] = j - 1
    reduced = cost - u[1:, None] - v[None, 1:]
    return _lexicographic(_zero_adjacency(reduced <= _ZERO_TOL), row_match)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------


def hungarian(cost: ArrayLike, solver: Solver = "textbook") -> dict[int, int]:
    """Minimum-cost perfect matching of a square cost matrix.

    Args:
        cost: N x N finite, non-negative costs.
        solver: ``"textbook"`` (four-step) or ``"augmenting"``.

    Returns:
        Mapping row index -> column index.

    Raises:
        ContractViolation: Non-square, non-finite or negative input.
    """
    matrix = np.array(cost, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ContractViolation(f"cost matrix must be square, got {matrix.shape}")
    if matrix.size == 0:
        return {}
    if not np.isfinite(matrix).all():
        raise ContractViolation("cost matrix must be finite")
    if (matrix < 0).any():
        raise ContractViolation("cost matrix must be non-negative")

    if solver == "augmenting":
        row_match = _solve_augmenting(matrix)
    else:
        row_match = _solve_textbook(matrix)
    return dict(enumerate(row_match))
