import numpy as np
import pytest

from backshift.errors import StabilityFailed
from backshift.simulator import InterventionSpec, generate_network, simulate
from backshift.stability import StabilityConfig, default_q, stability_select, top_q_mask


@pytest.fixture(scope="module")
def chain_data():
    m = generate_network(4, [(0, 1, 0.7), (1, 2, -0.6), (2, 3, 0.5)])
    return m, simulate(m, InterventionSpec(2.0), [4000] * 5, seed=3)


@pytest.mark.parametrize("ev,pi,p", [(2, 0.75, 10), (1, 0.9, 20), (0.5, 0.6, 5), (3, 1.0, 7)])
def test_default_q_respects_bound(ev, pi, p):
    q = default_q(ev, pi, p)
    bound = ev * (2 * pi - 1) * p * (p - 1)
    assert q * q <= max(bound, 1) and (q + 1) ** 2 > bound


def test_default_q_reference_value():
    assert default_q(2, 0.75, 10) == 9


def test_top_q_mask_ordering_and_ties():
    B = np.array([[0.0, 0.5, 0.5], [0.9, 0.0, 0.1], [0.5, 0.0, 0.0]])
    mask = top_q_mask(B, 2)
    assert mask.sum() == 2 and mask[1, 0] and mask[0, 1] and not mask[2, 0]
    assert top_q_mask(np.eye(3) * 5, 3).sum() == 0
    assert top_q_mask(B, 100).sum() == 5


def test_config_validation():
    for kwargs in ({"pi_thr": 0.5}, {"pi_thr": 1.1}, {"n_subsamples": 1},
                   {"subsample_fraction": 1.0}, {"ev_bound": 0}):
        with pytest.raises(ValueError):
            StabilityConfig(**kwargs)


def test_recovers_chain_and_is_deterministic(chain_data):
    m, ds = chain_data
    cfg = StabilityConfig(n_subsamples=20, q=3, seed=5)
    a = stability_select(ds, cfg)
    b = stability_select(ds, cfg)
    np.testing.assert_array_equal(a.frequencies, b.frequencies)
    assert {(e.source, e.target) for e in a.selected} == {(0, 1), (1, 2), (2, 3)}
    assert a.n_failed == 0 and a.q_used == 3
    assert np.all(np.diag(a.frequencies) == 0)


def test_selection_shrinks_with_threshold(chain_data):
    _, ds = chain_data
    res = stability_select(ds, StabilityConfig(n_subsamples=10, q=5, seed=1))
    sizes = [len(res.selected_at(t)) for t in (0.55, 0.7, 0.85, 1.0)]
    assert sizes == sorted(sizes, reverse=True)


def test_threaded_matches_serial(chain_data):
    _, ds = chain_data
    a = stability_select(ds, StabilityConfig(n_subsamples=6, q=3, seed=2))
    b = stability_select(ds, StabilityConfig(n_subsamples=6, q=3, seed=2, n_jobs=3))
    np.testing.assert_array_equal(a.frequencies, b.frequencies)


def test_no_interventions_fail():
    m = generate_network(6, edge_prob=0.3, seed=1)
    ds = simulate(m, InterventionSpec(0.0), [1000] * 4, seed=0)
    with pytest.raises(StabilityFailed):
        stability_select(ds, StabilityConfig(n_subsamples=6, seed=0))
