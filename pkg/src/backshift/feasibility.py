"""Cycle products and the permute-and-scale projection.

Edge orientation: ``B[i, j] != 0`` is an edge from node ``j`` to node ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    ContractViolation,
    Infeasible,
    ModelAssumptionsViolated,
    ShapeError,
    TooLargeForExact,
)

ZERO_EPS = 1e-12
BORDERLINE_EPS = 1e-9
EXACT_LIMIT = 12


@dataclass
class CycleProductReport:
    feasible: bool
    exact_value: float | None = None
    witness_cycle: list[int] | None = None
    borderline: bool = False
    # max simple-cycle product, known exactly whenever the graph is feasible
    value_bound: float | None = None


@dataclass
class FeasibleDiagonalizer:
    D_hat: np.ndarray
    permutation: np.ndarray
    row_scales: np.ndarray


def _square(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {B.shape}")
    return B


def _check_zero_diagonal(B: np.ndarray) -> None:
    if not np.all(np.isfinite(B)):
        raise ContractViolation("matrix has non-finite entries")
    if np.any(np.diag(B) != 0):
        raise ContractViolation("cycle products are defined for zero-diagonal matrices")


def cycle_product_feasible(B) -> CycleProductReport:
    """Test CP(B) < 1 in O(p^3).

    Shortest closed walks under the weights ``-log|B|`` are found with
    Floyd-Warshall. Every closed walk splits into simple cycles, so a closed
    walk with product >= 1 exists exactly when some simple cycle has one.
    Without such a cycle the shortest closed walks are simple cycles and
    ``exp(-min_i dist[i, i])`` is the cycle product itself.
    """
    B = _square(B)
    _check_zero_diagonal(B)
    absB = np.abs(B)
    with np.errstate(divide="ignore"):
        dist = np.where(absB > 0, -np.log(absB), np.inf)
    np.fill_diagonal(dist, np.inf)
    for k in range(B.shape[0]):
        dist = np.minimum(dist, dist[:, k, None] + dist[None, k, :])
    best = float(np.min(np.diag(dist))) if B.size else math.inf
    if math.isinf(best):
        return CycleProductReport(True, value_bound=0.0)
    borderline = bool(abs(best) <= BORDERLINE_EPS)
    feasible = bool(best > BORDERLINE_EPS)
    return CycleProductReport(
        feasible, borderline=borderline, value_bound=math.exp(-best) if feasible else None
    )


def _simple_cycles(adj: list[list[int]]):
    """Each directed simple cycle once, rooted at its smallest node."""
    p = len(adj)
    for start in range(p):
        path = [start]
        on_path = [False] * p
        on_path[start] = True
        stack = [iter(adj[start])]
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                stack.pop()
                on_path[path.pop()] = False
                continue
            if nxt == start:
                yield list(path)
            elif nxt > start and not on_path[nxt]:
                path.append(nxt)
                on_path[nxt] = True
                stack.append(iter(adj[nxt]))


def cycle_product_exact(B, limit: int = EXACT_LIMIT) -> CycleProductReport:
    """Maximum absolute product over all simple directed cycles, by enumeration."""
    B = _square(B)
    _check_zero_diagonal(B)
    p = B.shape[0]
    if p > limit:
        raise TooLargeForExact(f"p={p} exceeds the enumeration limit {limit}")
    # successors of j are the i with an edge j -> i
    adj = [[i for i in range(p) if B[i, j] != 0] for j in range(p)]
    best, witness = 0.0, None
    for cycle in _simple_cycles(adj):
        prod = 1.0
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            prod *= abs(float(B[b, a]))
        if prod > best:
            best, witness = prod, cycle
    return CycleProductReport(bool(best < 1.0), exact_value=best, witness_cycle=witness, value_bound=best)


def cycle_product(B) -> float:
    """CP(B): exact when p is small, otherwise the Floyd-Warshall value (inf if CP >= 1)."""
    B = _square(B)
    if B.shape[0] <= EXACT_LIMIT:
        return cycle_product_exact(B).exact_value
    report = cycle_product_feasible(B)
    return report.value_bound if report.feasible else math.inf


def lap_solve(cost) -> np.ndarray:
    """Assignment ``sigma`` minimizing ``sum_k cost[k, sigma[k]]``; entries may be +inf."""
    cost = _square(cost)
    if np.any(np.isnan(cost)) or np.any(cost == -np.inf):
        raise ContractViolation("cost matrix must not contain NaN or -inf")
    try:
        rows, cols = linear_sum_assignment(cost)
    except ValueError as exc:
        raise Infeasible(str(exc)) from exc
    sigma = np.empty(cost.shape[0], dtype=int)
    sigma[rows] = cols
    if not np.all(np.isfinite(cost[rows, cols])):
        raise Infeasible("no finite-cost perfect assignment")
    return sigma


def permute_and_scale(D_tilde) -> FeasibleDiagonalizer:
    """Reorder and rescale rows so the result has unit diagonal and CP(I - D) < 1.

    Row ``k`` moves to position ``sigma[k]`` where ``sigma`` minimizes
    ``sum_k -log|D_tilde[k, sigma[k]]|``, then every row is divided by its new
    diagonal entry.

    Raises:
        ModelAssumptionsViolated: no valid assignment, or the rescaled matrix
            still has a cycle product of at least one.
    """
    D = _square(D_tilde)
    if not np.all(np.isfinite(D)):
        raise ContractViolation("diagonalizer has non-finite entries")
    absD = np.abs(D)
    with np.errstate(divide="ignore"):
        cost = np.where(absD >= ZERO_EPS, -np.log(np.where(absD > 0, absD, 1.0)), np.inf)
    try:
        sigma = lap_solve(cost)
    except Infeasible as exc:
        raise ModelAssumptionsViolated(f"no admissible row permutation: {exc}") from exc
    p = D.shape[0]
    permuted = np.empty_like(D)
    permuted[sigma] = D
    scales = np.diag(permuted).copy()
    D_hat = permuted / scales[:, None]
    np.fill_diagonal(D_hat, 1.0)
    report = cycle_product_feasible(np.eye(p) - D_hat)
    if not report.feasible:
        raise ModelAssumptionsViolated(
            "cycle product of I - D_hat is not below one"
            + (" (borderline)" if report.borderline else "")
        )
    return FeasibleDiagonalizer(D_hat, sigma, scales)
