import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backshift.errors import ContractViolation, Infeasible, ModelAssumptionsViolated, TooLargeForExact
from backshift.feasibility import (
    cycle_product,
    cycle_product_exact,
    cycle_product_feasible,
    lap_solve,
    permute_and_scale,
)


def nx_cycle_product(B):
    g = nx.DiGraph()
    p = B.shape[0]
    g.add_nodes_from(range(p))
    for i in range(p):
        for j in range(p):
            if B[i, j] != 0:
                g.add_edge(j, i)
    best = 0.0
    for cyc in nx.simple_cycles(g):
        prod = 1.0
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            prod *= abs(B[b, a])
        best = max(best, prod)
    return best


def brute_force_assignment(cost):
    p = cost.shape[0]
    return min(sum(cost[k, s[k]] for k in range(p)) for s in itertools.permutations(range(p)))


def random_graph(rng, p, prob=0.3, lo=0.2, hi=1.5):
    B = np.where(rng.random((p, p)) < prob, rng.uniform(lo, hi, (p, p)) * rng.choice([-1, 1], (p, p)), 0.0)
    np.fill_diagonal(B, 0.0)
    return B


def cycle(nodes, weights, p):
    B = np.zeros((p, p))
    for a, b, w in zip(nodes, nodes[1:] + nodes[:1], weights):
        B[b, a] = w
    return B


def test_acyclic_is_feasible():
    B = np.triu(np.random.default_rng(0).uniform(0.5, 5, (5, 5)), 1)
    assert cycle_product_feasible(B).feasible
    assert cycle_product_exact(B).exact_value == 0.0
    assert cycle_product_exact(B).witness_cycle is None


def test_three_cycle_product():
    B = cycle([0, 1, 2], [0.5, 0.5, 0.5], 3)
    assert cycle_product_feasible(B).feasible
    r = cycle_product_exact(B)
    assert r.exact_value == pytest.approx(0.125) and r.feasible


def test_two_cycle_over_one():
    B = cycle([0, 1], [2.0, 0.6], 2)
    assert not cycle_product_feasible(B).feasible
    assert cycle_product_exact(B).exact_value == pytest.approx(1.2)


def test_two_disjoint_cycles():
    B = cycle([0, 1], [0.5, 0.6], 5) + cycle([2, 3, 4], [-1.0, 0.8, 1.0], 5)
    r = cycle_product_exact(B)
    assert r.exact_value == pytest.approx(0.8)
    assert sorted(r.witness_cycle) == [2, 3, 4]
    w = r.witness_cycle
    assert len(w) == len(set(w)) >= 2
    assert math.prod(abs(B[b, a]) for a, b in zip(w, w[1:] + w[:1])) == pytest.approx(0.8)


def test_feasibility_value_equals_exact_when_feasible():
    rng = np.random.default_rng(1)
    for _ in range(50):
        B = random_graph(rng, 6, 0.4, 0.1, 0.9)
        r = cycle_product_feasible(B)
        assert r.feasible
        assert r.value_bound == pytest.approx(cycle_product_exact(B).exact_value, rel=1e-12, abs=1e-300)


def test_borderline_reported_infeasible():
    B = cycle([0, 1], [2.0, 0.5], 2)
    r = cycle_product_feasible(B)
    assert not r.feasible and r.borderline


def test_nonzero_diagonal_rejected():
    with pytest.raises(ContractViolation):
        cycle_product_feasible(np.eye(2))
    with pytest.raises(ContractViolation):
        cycle_product_exact(np.eye(2))


def test_exact_limit():
    with pytest.raises(TooLargeForExact):
        cycle_product_exact(np.zeros((13, 13)))
    assert cycle_product_exact(np.zeros((13, 13)), limit=20).exact_value == 0.0


def test_cycle_product_large_p_uses_closed_walks():
    B = cycle(list(range(14)), [0.9] * 14, 14)
    assert cycle_product(B) == pytest.approx(0.9 ** 14)
    assert cycle_product(cycle([0, 1], [3.0, 3.0], 14)) == math.inf


def test_enumerator_matches_networkx():
    rng = np.random.default_rng(2)
    for _ in range(100):
        B = random_graph(rng, int(rng.integers(2, 8)), 0.4)
        assert cycle_product_exact(B).exact_value == pytest.approx(nx_cycle_product(B), rel=1e-12)


def test_feasibility_agrees_with_enumeration_sparse_p8():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        B = random_graph(rng, 8, 0.2, 0.3, 1.6)
        assert cycle_product_feasible(B).feasible == (cycle_product_exact(B).exact_value < 1)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 10), st.floats(0.05, 0.6), st.integers(0, 10**6))
def test_feasibility_agrees_with_enumeration(p, prob, seed):
    B = random_graph(np.random.default_rng(seed), p, prob)
    assert cycle_product_feasible(B).feasible == cycle_product_exact(B).feasible


def test_lap_identity():
    cost = np.ones((4, 4)) - np.eye(4)
    np.testing.assert_array_equal(lap_solve(cost), np.arange(4))


def test_lap_three_by_three():
    cost = np.array([[4.0, 1, 3], [2, 0, 5], [3, 2, 2]])
    s = lap_solve(cost)
    assert sum(cost[k, s[k]] for k in range(3)) == brute_force_assignment(cost) == 5.0


def test_lap_infeasible_row():
    cost = np.zeros((3, 3))
    cost[1] = np.inf
    with pytest.raises(Infeasible):
        lap_solve(cost)


def test_lap_with_forbidden_entries():
    cost = np.array([[np.inf, 1.0], [2.0, np.inf]])
    np.testing.assert_array_equal(lap_solve(cost), [1, 0])


def test_lap_matches_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(500):
        p = int(rng.integers(1, 8))
        cost = rng.normal(size=(p, p))
        s = lap_solve(cost)
        assert sorted(s) == list(range(p))
        assert sum(cost[k, s[k]] for k in range(p)) == pytest.approx(brute_force_assignment(cost), abs=1e-12)


def dense_unit_diagonal(rng, p):
    D = rng.uniform(0.05, 0.9, (p, p)) * rng.choice([-1, 1], (p, p))
    np.fill_diagonal(D, 1.0)
    return D


def scramble(rng, D):
    p = D.shape[0]
    perm = rng.permutation(p)
    scales = rng.uniform(0.3, 3.0, p) * rng.choice([-1, 1], p)
    return (D * scales[:, None])[perm]


def test_fixed_point():
    D = dense_unit_diagonal(np.random.default_rng(5), 4)
    out = permute_and_scale(D)
    np.testing.assert_array_equal(out.permutation, np.arange(4))
    np.testing.assert_allclose(out.D_hat, D, rtol=0, atol=1e-15)


def test_undoes_permutation_and_scaling():
    rng = np.random.default_rng(6)
    for _ in range(100):
        D = dense_unit_diagonal(rng, int(rng.integers(2, 7)))
        out = permute_and_scale(scramble(rng, D))
        np.testing.assert_allclose(out.D_hat, D, rtol=0, atol=1e-12)
        assert np.all(np.diag(out.D_hat) == 1.0)


def test_idempotent():
    rng = np.random.default_rng(7)
    for _ in range(20):
        once = permute_and_scale(scramble(rng, dense_unit_diagonal(rng, 5))).D_hat
        twice = permute_and_scale(once)
        np.testing.assert_array_equal(twice.D_hat, once)
        np.testing.assert_array_equal(twice.permutation, np.arange(5))


def test_strong_two_cycles_violate():
    D = np.eye(3) + 3.0 * (np.ones((3, 3)) - np.eye(3))
    # every row permutation with unit-diagonal rescaling keeps a cycle product above one
    for perm in itertools.permutations(range(3)):
        P = np.empty_like(D)
        P[list(perm)] = D
        if np.any(np.diag(P) == 0):
            continue
        B = np.eye(3) - P / np.diag(P)[:, None]
        np.fill_diagonal(B, 0.0)
        assert cycle_product_exact(B).exact_value >= 1
    with pytest.raises(ModelAssumptionsViolated):
        permute_and_scale(D)


def test_zero_column_has_no_assignment():
    D = np.eye(3)
    D[:, 1] = 0.0
    with pytest.raises(ModelAssumptionsViolated):
        permute_and_scale(D)


def product_of_abs(D):
    return float(np.prod(np.abs(D)))


def test_output_minimizes_entry_product():
    rng = np.random.default_rng(8)
    for _ in range(30):
        p = int(rng.integers(2, 7))
        D_hat = permute_and_scale(scramble(rng, dense_unit_diagonal(rng, p))).D_hat
        best = product_of_abs(D_hat)
        for perm in itertools.permutations(range(p)):
            alt = D_hat[list(perm)]
            alt = alt / np.diag(alt)[:, None]
            assert best <= product_of_abs(alt) * (1 + 1e-9)
