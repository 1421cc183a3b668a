import numpy as np
import pytest

from backshift.simulator import generate_network

ACCEPTANCE_LINES = []


def loo(values):
    """Leave-one-out differences of per-environment variance rows (naive loop)."""
    values = np.asarray(values, dtype=float)
    J = values.shape[0]
    out = np.zeros_like(values)
    for j in range(J):
        others = [values[i] for i in range(J) if i != j]
        out[j] = values[j] - sum(others) / (J - 1)
    return out


def population_instance(p, n_env=3, seed=0, B=None, edge_prob=0.3):
    """Exact difference matrices generated from a known B and diagonal intervention variances."""
    rng = np.random.default_rng(seed)
    if B is None:
        B = generate_network(p, edge_prob=edge_prob, weight_range=(0.2, 0.9), seed=seed).B
    variances = rng.uniform(0.2, 3.0, (n_env, p))
    eta = loo(variances)
    A_inv = np.linalg.inv(np.eye(p) - B)
    deltas = [A_inv @ np.diag(e) @ A_inv.T for e in eta]
    return B, eta, deltas


@pytest.fixture
def acceptance_report():
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
