"""Stability selection of edges by repeated estimation on half-samples."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BackShiftError, StabilityFailed
from .pipeline import Edge, EstimateConfig, estimate
from .scatter import MultiEnvDataset

log = logging.getLogger(__name__)


@dataclass
class StabilityConfig:
    ev_bound: float = 2.0
    pi_thr: float = 0.75
    n_subsamples: int = 100
    subsample_fraction: float = 0.5
    q: int | None = None
    seed: int | None = 0
    n_jobs: int = 1

    def __post_init__(self):
        if not 0.5 < self.pi_thr <= 1.0:
            raise ValueError("pi_thr must lie in (0.5, 1]")
        if self.n_subsamples < 2:
            raise ValueError("n_subsamples must be at least 2")
        if not 0.0 < self.subsample_fraction < 1.0:
            raise ValueError("subsample_fraction must lie in (0, 1)")
        if self.ev_bound <= 0:
            raise ValueError("ev_bound must be positive")


@dataclass
class StabilityResult:
    frequencies: np.ndarray
    selected: list[Edge]
    q_used: int
    n_runs: int
    n_failed: int = 0
    failures: list[str] = field(default_factory=list)

    def selected_at(self, pi_thr: float) -> list[Edge]:
        return _select(self.frequencies, pi_thr)


def default_q(ev_bound: float, pi_thr: float, p: int) -> int:
    """Largest q with ``q^2 / ((2 pi_thr - 1) p (p - 1)) <= ev_bound``."""
    bound = ev_bound * (2.0 * pi_thr - 1.0) * p * (p - 1)
    return max(1, math.isqrt(int(math.floor(bound + 1e-9))))


def _select(freq: np.ndarray, pi_thr: float) -> list[Edge]:
    rows, cols = np.nonzero(freq >= pi_thr - 1e-12)
    return [Edge(int(j), int(i), float(freq[i, j])) for i, j in zip(rows, cols) if i != j]


def top_q_mask(B: np.ndarray, q: int) -> np.ndarray:
    """The q largest off-diagonal ``|B|`` entries; ties go to the smaller (row, col)."""
    p = B.shape[0]
    mag = np.abs(B).ravel()
    idx = np.arange(p * p)
    off = idx // p != idx % p
    candidates = idx[off & (mag > 0)]
    # lexsort: last key is primary
    order = candidates[np.lexsort((candidates, -mag[candidates]))]
    mask = np.zeros(p * p, dtype=bool)
    mask[order[:q]] = True
    return mask.reshape(p, p)


def _subsample(dataset: MultiEnvDataset, fraction: float, rng: np.random.Generator) -> MultiEnvDataset:
    envs = []
    for label, data in dataset.environments:
        n = data.shape[0]
        m = int(math.floor(fraction * n))
        if m < 2:
            raise ValueError(f"environment {label!r} keeps fewer than 2 rows after subsampling")
        idx = np.sort(rng.choice(n, size=m, replace=False))
        envs.append((label, data[idx]))
    return MultiEnvDataset(envs, list(dataset.variable_names))


def stability_select(
    dataset: MultiEnvDataset,
    config: StabilityConfig | None = None,
    estimator: EstimateConfig | None = None,
) -> StabilityResult:
    """Selection frequency of every edge over stratified subsamples.

    Each run keeps ``subsample_fraction`` of the rows of every environment,
    estimates the connectivity matrix and retains its q largest edges. Runs
    that fail or return the empty graph retain nothing and count as failures.

    Raises:
        StabilityFailed: more than half of the runs failed.
    """
    config = config or StabilityConfig()
    estimator = estimator or EstimateConfig()
    p = dataset.p
    q = config.q if config.q is not None else default_q(config.ev_bound, config.pi_thr, p)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_subsamples)

    def run(seq):
        rng = np.random.default_rng(seq)
        sub = _subsample(dataset, config.subsample_fraction, rng)
        try:
            est = estimate(sub, estimator)
        except BackShiftError as exc:
            return None, f"{type(exc).__name__}: {exc}"
        if est.empty:
            return None, "; ".join(est.warnings) or "empty estimate"
        return top_q_mask(est.B_hat, q), None

    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            outcomes = list(pool.map(run, seeds))
    else:
        outcomes = [run(seq) for seq in seeds]

    counts = np.zeros((p, p))
    failures = []
    for mask, err in outcomes:
        if mask is None:
            failures.append(err)
        else:
            counts += mask
    freq = counts / config.n_subsamples
    result = StabilityResult(
        freq, _select(freq, config.pi_thr), q, config.n_subsamples, len(failures), failures
    )
    if len(failures) * 2 > config.n_subsamples:
        raise StabilityFailed(
            f"{len(failures)} of {config.n_subsamples} subsample runs failed"
        )
    return result
