"""Synthetic multi-environment data from a linear cyclic model with shift interventions.

Each environment ``j`` draws observations at equilibrium,
``x = (I - B)^{-1} (c + e)``, with ``c_k = beta[j, k] * I_k`` (``I_k`` standard
normal per observation) and Laplace(0, 1) noise ``e``. With hidden variables the
noise is a single Laplace variable loaded onto every node through ``gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GenerationFailed, ShapeError
from .feasibility import cycle_product_feasible
from .scatter import MultiEnvDataset

# (source, target, weight), 0-based; the reference graph used by the
# experiment replicas. Contains the 3-cycle 0 -> 1 -> 2 -> 0 and the
# 2-cycle 3 <-> 4; 5 -> 9 is deliberately the weakest edge.
REFERENCE_EDGES = (
    (0, 1, 0.8),
    (1, 2, 0.7),
    (2, 0, -0.6),
    (3, 4, 0.8),
    (4, 3, -0.7),
    (2, 3, 0.6),
    (4, 6, -0.8),
    (6, 7, 0.7),
    (7, 8, -0.6),
    (5, 9, 0.5),
)


@dataclass
class GroundTruthModel:
    B: np.ndarray
    hidden: bool = False
    gamma: np.ndarray | None = None
    noise_scale: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        p = self.B.shape[0]
        if self.B.shape != (p, p):
            raise ShapeError(f"B must be square, got {self.B.shape}")
        report = cycle_product_feasible(self.B)
        if not report.feasible:
            raise GenerationFailed("cycle product of B is not below one")
        if self.hidden and self.gamma is None:
            self.gamma = np.random.default_rng(self.seed).standard_normal(p)
        if self.gamma is not None:
            self.gamma = np.asarray(self.gamma, dtype=float)

    @property
    def p(self) -> int:
        return self.B.shape[0]

    def edges(self) -> list[tuple[int, int, float]]:
        rows, cols = np.nonzero(self.B)
        return [(int(j), int(i), float(self.B[i, j])) for i, j in zip(rows, cols)]


@dataclass
class InterventionSpec:
    """Shift interventions; ``m_I`` is the mean of the exponential strength draw."""

    m_I: float = 1.0
    targets: list[int] | None = None
    beta_per_observation: bool = False
    beta: np.ndarray | None = None

    def __post_init__(self):
        if self.m_I < 0:
            raise ValueError("m_I must be nonnegative")


@dataclass
class ScoreReport:
    shd: int
    precision: float | None
    recall: float
    threshold: float
    true_positives: int = 0
    false_positives: int = 0
    false_negatives: int = 0


@dataclass
class SimulationRecord:
    """What was drawn, for checking the equilibrium equation."""

    beta: np.ndarray
    shifts: list[np.ndarray] = field(default_factory=list)
    noise: list[np.ndarray] = field(default_factory=list)


def _matrix_from_edges(p: int, edges) -> np.ndarray:
    B = np.zeros((p, p))
    for src, dst, w in edges:
        if src == dst:
            raise ValueError("self-loops are not allowed")
        B[dst, src] = w
    return B


def generate_network(
    p: int,
    edges=None,
    *,
    edge_prob: float = 0.15,
    weight_range: tuple[float, float] = (0.3, 0.8),
    hidden: bool = False,
    seed: int | None = None,
    max_attempts: int = 1000,
) -> GroundTruthModel:
    """Build a connectivity matrix with CP(B) < 1.

    Explicit ``edges`` are ``(source, target, weight)`` triples and are
    rejected outright if infeasible. Otherwise each ordered pair is an edge
    with probability ``edge_prob`` and weight ``+-U(weight_range)``; draws
    are repeated until the cycle product is below one.
    """
    if p < 2:
        raise ValueError("p must be at least 2")
    if edges is not None:
        B = _matrix_from_edges(p, edges)
        if not cycle_product_feasible(B).feasible:
            raise GenerationFailed("explicit edge list has cycle product >= 1")
        return GroundTruthModel(B, hidden=hidden, seed=seed)
    rng = np.random.default_rng(seed)
    lo, hi = weight_range
    for _ in range(max_attempts):
        mask = rng.random((p, p)) < edge_prob
        np.fill_diagonal(mask, False)
        weights = rng.uniform(lo, hi, (p, p)) * rng.choice([-1.0, 1.0], (p, p))
        B = np.where(mask, weights, 0.0)
        if cycle_product_feasible(B).feasible:
            return GroundTruthModel(B, hidden=hidden, seed=seed)
    raise GenerationFailed(f"no graph with CP < 1 after {max_attempts} attempts")


def reference_network(hidden: bool = False, seed: int | None = 0) -> GroundTruthModel:
    return generate_network(10, REFERENCE_EDGES, hidden=hidden, seed=seed)


def draw_beta(spec: InterventionSpec, n_env: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """Intervention strengths, one per (environment, variable)."""
    if spec.beta is not None:
        beta = np.asarray(spec.beta, dtype=float)
        if beta.shape != (n_env, p):
            raise ShapeError(f"beta must have shape {(n_env, p)}, got {beta.shape}")
        return beta
    beta = rng.exponential(spec.m_I, (n_env, p)) if spec.m_I > 0 else np.zeros((n_env, p))
    if spec.targets is not None:
        mask = np.zeros(p, dtype=bool)
        mask[list(spec.targets)] = True
        beta[:, ~mask] = 0.0
    return beta


def simulate(
    model: GroundTruthModel,
    spec: InterventionSpec,
    n_per_env,
    seed: int | None = None,
    *,
    B_per_env=None,
    record: SimulationRecord | None = None,
) -> MultiEnvDataset:
    """Draw equilibrium observations for every environment.

    Seeds: the master seed's ``SeedSequence`` spawns one child for the
    intervention strengths and one per environment, so each environment's
    stream does not depend on the others.

    Args:
        model: generating model.
        spec: intervention parameters.
        n_per_env: observations per environment; its length sets |J|.
        seed: master seed.
        B_per_env: optional per-environment connectivity overrides (used to
            plant mechanism changes); ``None`` entries use ``model.B``.
        record: if given, filled with beta and the drawn shifts and noise.
    """
    sizes = [int(n) for n in n_per_env]
    if not sizes:
        raise ValueError("need at least one environment")
    p = model.p
    root = np.random.SeedSequence(seed)
    beta_seq, *env_seqs = root.spawn(len(sizes) + 1)
    beta = draw_beta(spec, len(sizes), p, np.random.default_rng(beta_seq))
    if record is not None:
        record.beta = beta
    envs = []
    for j, (n, seq) in enumerate(zip(sizes, env_seqs)):
        rng = np.random.default_rng(seq)
        if spec.beta_per_observation and spec.m_I > 0:
            strength = rng.exponential(spec.m_I, (n, p))
            if spec.targets is not None:
                off = np.setdiff1d(np.arange(p), spec.targets)
                strength[:, off] = 0.0
        else:
            strength = beta[j]
        shifts = strength * rng.standard_normal((n, p))
        if model.hidden:
            w = rng.laplace(0.0, model.noise_scale, (n, 1))
            noise = w * model.gamma[None, :]
        else:
            noise = rng.laplace(0.0, model.noise_scale, (n, p))
        B = model.B if B_per_env is None or B_per_env[j] is None else np.asarray(B_per_env[j])
        x = np.linalg.solve(np.eye(p) - B, (shifts + noise).T).T
        if record is not None:
            record.shifts.append(shifts)
            record.noise.append(noise)
        envs.append((j + 1, x))
    return MultiEnvDataset(envs, [f"X{k + 1}" for k in range(p)])


def _edge_mask(B, threshold: float) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    mask = np.abs(B) > threshold
    np.fill_diagonal(mask, False)
    return mask


def score(estimate, truth, threshold: float = 0.25) -> ScoreReport:
    """SHD, precision and recall of a thresholded estimate against the true graph.

    ``estimate`` is a p x p matrix or a list of ``(source, target, ...)`` edges.
    A reversed edge costs 2 (one missing plus one extra).
    """
    B_true = truth.B if isinstance(truth, GroundTruthModel) else np.asarray(truth, dtype=float)
    p = B_true.shape[0]
    if isinstance(estimate, np.ndarray) or (
        isinstance(estimate, (list, tuple)) and estimate and np.ndim(estimate[0]) == 1
        and len(estimate) == p and len(estimate[0]) == p
    ):
        est = np.asarray(estimate, dtype=float)
        if est.shape != (p, p):
            raise ShapeError(f"estimate has shape {est.shape}, truth is {p}x{p}")
        pred = _edge_mask(est, threshold)
    else:
        pred = np.zeros((p, p), dtype=bool)
        for edge in estimate:
            src, dst = int(edge[0]), int(edge[1])
            if not (0 <= src < p and 0 <= dst < p):
                raise ShapeError(f"edge {src}->{dst} outside a {p}-node graph")
            pred[dst, src] = True
    true = _edge_mask(B_true, 0.0)
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    return ScoreReport(fp + fn, precision, recall, threshold, tp, fp, fn)


def strongest_targets(beta: np.ndarray) -> np.ndarray:
    """Per environment, the variable whose baseline-anchored intervention variance is largest."""
    var = np.asarray(beta, dtype=float) ** 2
    return np.argmax(var - var.min(axis=0, keepdims=True), axis=1)


def laplace_variance(scale: float = 1.0) -> float:
    return 2.0 * scale * scale


__all__ = [
    "REFERENCE_EDGES",
    "GroundTruthModel",
    "InterventionSpec",
    "ScoreReport",
    "SimulationRecord",
    "generate_network",
    "reference_network",
    "simulate",
    "score",
    "strongest_targets",
]
