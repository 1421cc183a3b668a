"""End-to-end estimation of the connectivity matrix and the quantities derived from it."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import EstimateUnavailable, ModelAssumptionsViolated, NeedMultipleEnvironments
from .feasibility import FeasibleDiagonalizer, permute_and_scale
from .jointdiag import DiagonalizerOptions, DiagonalizerResult, joint_diagonalize
from .scatter import MultiEnvDataset, ScatterSet, build_scatter_set

log = logging.getLogger(__name__)

ETA_RTOL = 1e-8

NOT_CONVERGED = "joint diagonalization did not converge; returning the empty graph"
FEWER_THAN_THREE = "fewer than three environments: the connectivity matrix is not identifiable"


@dataclass
class EstimateConfig:
    mode: str = "covariance"
    diag: DiagonalizerOptions = field(default_factory=DiagonalizerOptions)


@dataclass
class ConnectivityEstimate:
    """Result of one estimation run.

    ``B_hat[i, j]`` is the estimated effect of variable ``j`` on variable ``i``.
    ``empty`` is set when no graph could be produced (non-convergence or
    violated model assumptions); ``B_hat`` is then all zeros.
    """

    B_hat: np.ndarray
    D_hat: FeasibleDiagonalizer | None
    converged: bool
    empty: bool
    final_loss: float
    assumptions_violated: bool = False
    identifiable: bool = True
    warnings: list[str] = field(default_factory=list)
    diagonalizer: DiagonalizerResult | None = None
    scatter: ScatterSet | None = None

    @property
    def p(self) -> int:
        return self.B_hat.shape[0]


@dataclass
class Edge:
    source: int
    target: int
    weight: float


@dataclass
class InterventionProfile:
    labels: list
    delta_variances: np.ndarray
    absolute_variances: np.ndarray
    baseline: object


@dataclass
class Violation:
    pair: tuple[int, int]
    magnitude: float


@dataclass
class DiagnosticsReport:
    labels: list
    residuals: list[np.ndarray]
    top_violation: list[Violation]


@dataclass
class IdentifiabilityResult:
    identifiable: bool
    violating_pairs: list[tuple[int, int]]


def estimate_from_deltas(deltas, config: EstimateConfig | None = None) -> ConnectivityEstimate:
    """Diagonalize the difference matrices and project onto the feasible set."""
    config = config or EstimateConfig()
    deltas = [np.asarray(d, dtype=float) for d in deltas]
    if len(deltas) < 2:
        raise NeedMultipleEnvironments(f"need at least 2 environments, got {len(deltas)}")
    p = deltas[0].shape[0]
    warnings = []
    identifiable = len(deltas) >= 3
    if not identifiable:
        warnings.append(FEWER_THAN_THREE)
        log.warning(FEWER_THAN_THREE)
    result = joint_diagonalize(deltas, config.diag)
    empty_B = np.zeros((p, p))
    if not result.converged:
        warnings.append(NOT_CONVERGED)
        log.warning(NOT_CONVERGED)
        return ConnectivityEstimate(
            empty_B, None, False, True, result.final_loss,
            identifiable=identifiable, warnings=warnings, diagonalizer=result,
        )
    try:
        feasible = permute_and_scale(result.D_tilde)
    except ModelAssumptionsViolated as exc:
        msg = f"model assumptions are not met: {exc}"
        warnings.append(msg)
        log.warning(msg)
        return ConnectivityEstimate(
            empty_B, None, True, True, result.final_loss, assumptions_violated=True,
            identifiable=identifiable, warnings=warnings, diagonalizer=result,
        )
    B_hat = np.eye(p) - feasible.D_hat
    np.fill_diagonal(B_hat, 0.0)
    return ConnectivityEstimate(
        B_hat, feasible, True, False, result.final_loss,
        identifiable=identifiable, warnings=warnings, diagonalizer=result,
    )


def estimate(dataset: MultiEnvDataset, config: EstimateConfig | None = None) -> ConnectivityEstimate:
    """Estimate the connectivity matrix from multi-environment data."""
    config = config or EstimateConfig()
    scatter = build_scatter_set(dataset, config.mode)
    est = estimate_from_deltas(scatter.deltas, config)
    est.scatter = scatter
    return est


def threshold_edges(B_hat, t: float) -> list[Edge]:
    """Edges ``j -> i`` with ``|B_hat[i, j]| > t``, ordered by (target, source)."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    B = np.asarray(B_hat.B_hat if isinstance(B_hat, ConnectivityEstimate) else B_hat, dtype=float)
    edges = []
    for i, j in zip(*np.nonzero(np.abs(B) > t)):
        if i != j:
            edges.append(Edge(int(j), int(i), float(B[i, j])))
    return edges


def _matrix(B_hat) -> np.ndarray:
    if isinstance(B_hat, ConnectivityEstimate):
        if B_hat.empty:
            raise EstimateUnavailable("the estimate is empty")
        return B_hat.B_hat
    return np.asarray(B_hat, dtype=float)


def _transformed(B: np.ndarray, scatter: ScatterSet) -> list[np.ndarray]:
    if scatter.deltas is None:
        raise NeedMultipleEnvironments("scatter set has no difference matrices")
    A = np.eye(B.shape[0]) - B
    return [A @ d @ A.T for d in scatter.deltas]


def intervention_variances(B_hat, scatter: ScatterSet, baseline="min_zero") -> InterventionProfile:
    """Intervention variance differences and their baseline-anchored values.

    ``baseline="min_zero"`` shifts each variable so its smallest value across
    environments is zero; any environment label makes that environment zero.
    """
    B = _matrix(B_hat)
    eta = np.array([np.diag(m) for m in _transformed(B, scatter)])
    if baseline == "min_zero":
        absolute = eta - eta.min(axis=0, keepdims=True)
    else:
        if baseline not in scatter.labels:
            matches = [lab for lab in scatter.labels if str(lab) == str(baseline)]
            if len(matches) != 1:
                raise KeyError(f"unknown baseline environment {baseline!r}")
            baseline = matches[0]
        absolute = eta - eta[scatter.labels.index(baseline)][None, :]
    return InterventionProfile(list(scatter.labels), eta, absolute, baseline)


def check_identifiability(eta) -> IdentifiabilityResult:
    """Test whether every pair of variables has environments with differing variance ratios.

    The pair ``(k, l)`` passes when some ``j, j'`` give
    ``eta[j, k] * eta[j', l] != eta[j, l] * eta[j', k]`` beyond a relative
    tolerance of 1e-8.
    """
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    if not np.all(np.isfinite(eta)):
        raise ValueError("eta must be finite")
    violating = []
    for k, l in combinations(range(eta.shape[1]), 2):
        a = np.outer(eta[:, k], eta[:, l])
        b = a.T
        scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1.0)
        if not np.any(np.abs(a - b) > ETA_RTOL * scale):
            violating.append((k, l))
    return IdentifiabilityResult(not violating, violating)


def diagnose(B_hat, scatter: ScatterSet) -> DiagnosticsReport:
    """Off-diagonal residuals of the transformed differences, per environment."""
    B = _matrix(B_hat)
    residuals, top = [], []
    p = B.shape[0]
    for m in _transformed(B, scatter):
        r = (m + m.T) / 2.0
        np.fill_diagonal(r, 0.0)
        residuals.append(r)
        if p < 2:
            top.append(Violation((0, 0), 0.0))
            continue
        upper = np.abs(np.triu(r, 1))
        k, l = np.unravel_index(np.argmax(upper), upper.shape)
        top.append(Violation((int(k), int(l)), float(upper[k, l])))
    return DiagnosticsReport(list(scatter.labels), residuals, top)
