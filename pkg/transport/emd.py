from collections import deque
from dataclasses import dataclass

import numpy as np


MAX_SUPPORT = 128
_REDUCED_COST_TOL = 1e-12


@dataclass
class Histogram:
    """
    Normalized mass over a support of embedding rows.

    Attributes:
        weights (np.ndarray): Non-negative masses summing to 1.
        support (list[int]): Distinct row indices carrying the masses.
    """

    weights: np.ndarray
    support: list[int]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if np.any(self.weights < 0):
            raise ValueError("histogram weights must be non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"histogram weights must sum to 1, got {self.weights.sum()}")
        if len(set(self.support)) != len(self.support) or len(self.support) != len(self.weights):
            raise ValueError("histogram support must be distinct and match the weights")


@dataclass
class TransportPlan:
    flow: np.ndarray
    cost: float


def _as_weights(h) -> np.ndarray:
    return h.weights if isinstance(h, Histogram) else np.asarray(h, dtype=np.float64)


def _northwest_corner(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, list[tuple[int, int]]]:
    m, n = len(a), len(b)
    flow = np.zeros((m, n))
    basis = []
    ra, rb = a.copy(), b.copy()
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        flow[i, j] = x
        basis.append((i, j))
        ra[i] -= x
        rb[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1 or (i < m - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1
    return flow, basis


def _potentials(cost: np.ndarray, basis: list[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    m, n = cost.shape
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    rows: list[list[int]] = [[] for _ in range(m)]
    cols: list[list[int]] = [[] for _ in range(n)]
    for i, j in basis:
        rows[i].append(j)
        cols[j].append(i)

    u[0] = 0.0
    queue = deque([("r", 0)])
    while queue:
        kind, k = queue.popleft()
        if kind == "r":
            for j in rows[k]:
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    queue.append(("c", j))
        else:
            for i in cols[k]:
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    queue.append(("r", i))
    return u, v


def _tree_path(m: int, basis: list[tuple[int, int]], start_row: int, end_col: int) -> list[tuple[int, int]]:
    """Basic cells on the tree path from row node `start_row` to column node `end_col`."""
    adjacency: dict[int, list[tuple[int, tuple[int, int]]]] = {}
    for i, j in basis:
        adjacency.setdefault(i, []).append((m + j, (i, j)))
        adjacency.setdefault(m + j, []).append((i, (i, j)))

    parent: dict[int, tuple[int, tuple[int, int]] | None] = {start_row: None}
    queue = deque([start_row])
    target = m + end_col
    while queue:
        node = queue.popleft()
        if node == target:
            break
        for nxt, cell in adjacency.get(node, []):
            if nxt not in parent:
                parent[nxt] = (node, cell)
                queue.append(nxt)

    path = []
    node = target
    while parent[node] is not None:
        prev, cell = parent[node]
        path.append(cell)
        node = prev
    path.reverse()
    return path


def emd(a, b, cost: np.ndarray, max_iters: int = 100_000) -> tuple[float, TransportPlan]:
    """
    Exact earth mover's distance by the transportation (network) simplex.

    Starts from the north-west corner basis and pivots with Bland's rule: the entering
    cell is the first cell in row-major order with negative reduced cost, and the leaving
    cell is the lowest-index cell among those that reach zero flow.

    Args:
        a (Histogram | array): Source masses.
        b (Histogram | array): Target masses.
        cost (np.ndarray): Non-negative, finite |a| x |b| cost matrix.
        max_iters (int, optional): Pivot limit. Defaults to 100000.

    Returns:
        tuple[float, TransportPlan]: The optimal cost and plan.

    Raises:
        ValueError: On unbalanced masses, bad costs, or supports larger than 128.
    """
    a, b = _as_weights(a), _as_weights(b)
    cost = np.asarray(cost, dtype=np.float64)
    m, n = len(a), len(b)

    if cost.shape != (m, n):
        raise ValueError(f"cost shape {cost.shape} does not match histograms ({m}, {n})")
    if max(m, n) > MAX_SUPPORT:
        raise ValueError(f"support too large: {m}x{n} exceeds {MAX_SUPPORT}")
    if not np.all(np.isfinite(cost)) or np.any(cost < 0):
        raise ValueError("cost entries must be finite and non-negative")
    if abs(a.sum() - b.sum()) > 1e-6:
        raise ValueError(f"unbalanced histograms: masses {a.sum()} vs {b.sum()}")

    b = b * (a.sum() / b.sum())
    flow, basis = _northwest_corner(a, b)
    in_basis = np.zeros((m, n), dtype=bool)
    for cell in basis:
        in_basis[cell] = True

    for _ in range(max_iters):
        u, v = _potentials(cost, basis)
        reduced = cost - u[:, None] - v[None, :]
        reduced[in_basis] = 0.0
        candidates = np.flatnonzero(reduced < -_REDUCED_COST_TOL)
        if candidates.size == 0:
            break

        enter = divmod(int(candidates[0]), n)
        path = _tree_path(m, basis, enter[0], enter[1])
        # the path has odd length; cells alternate -, +, -, ... walking back from the column end
        minus = [cell for k, cell in enumerate(reversed(path)) if k % 2 == 0]
        plus = [cell for k, cell in enumerate(reversed(path)) if k % 2 == 1]

        theta = min(flow[cell] for cell in minus)
        leave = min((cell for cell in minus if flow[cell] == theta), key=lambda c: c[0] * n + c[1])

        flow[enter] += theta
        for cell in plus:
            flow[cell] += theta
        for cell in minus:
            flow[cell] -= theta
        flow[leave] = 0.0

        basis.remove(leave)
        basis.append(enter)
        in_basis[leave] = False
        in_basis[enter] = True
    else:
        raise RuntimeError(f"network simplex did not converge in {max_iters} pivots")

    flow = np.maximum(flow, 0.0)
    total = float(np.sum(flow * cost))
    return total, TransportPlan(flow=flow, cost=total)
