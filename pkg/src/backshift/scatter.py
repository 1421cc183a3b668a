"""Per-environment second-moment matrices and their leave-one-out differences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Literal, Sequence

import numpy as np

from .errors import InsufficientData, NeedMultipleEnvironments, ShapeError

Mode = Literal["covariance", "gram"]
MODES = ("covariance", "gram")


@dataclass
class MultiEnvDataset:
    """Observations grouped by environment.

    Attributes:
        environments: ordered ``(label, data)`` pairs, ``data`` of shape (n_j, p).
        variable_names: one name per column.
    """

    environments: list[tuple[Hashable, np.ndarray]]
    variable_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.environments:
            raise InsufficientData("dataset needs at least one environment")
        envs = []
        p = None
        for label, data in self.environments:
            data = np.asarray(data, dtype=float)
            if data.ndim != 2:
                raise ShapeError(f"environment {label!r}: data must be 2-D, got shape {data.shape}")
            if p is None:
                p = data.shape[1]
            elif data.shape[1] != p:
                raise ShapeError(
                    f"environment {label!r} has {data.shape[1]} columns, expected {p}"
                )
            if data.shape[0] < 2:
                raise InsufficientData(
                    f"environment {label!r} has {data.shape[0]} rows; at least 2 are required"
                )
            if not np.all(np.isfinite(data)):
                raise ValueError(f"environment {label!r} contains non-finite entries")
            envs.append((label, data))
        labels = [label for label, _ in envs]
        if len(set(labels)) != len(labels):
            raise ValueError("environment labels must be unique")
        self.environments = envs
        if not self.variable_names:
            self.variable_names = [f"X{k + 1}" for k in range(p)]
        elif len(self.variable_names) != p:
            raise ShapeError(f"{len(self.variable_names)} variable names for {p} columns")

    @property
    def p(self) -> int:
        return self.environments[0][1].shape[1]

    @property
    def labels(self) -> list:
        return [label for label, _ in self.environments]

    @property
    def sizes(self) -> list[int]:
        return [data.shape[0] for _, data in self.environments]

    def __len__(self) -> int:
        return len(self.environments)


@dataclass
class ScatterSet:
    mode: str
    labels: list
    per_env: list[np.ndarray]
    deltas: list[np.ndarray] | None


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2.0


def covariance(data) -> np.ndarray:
    """Sample covariance with divisor ``n - 1``, computed in two passes."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise InsufficientData(f"covariance needs at least 2 rows, got {n}")
    centered = x - x.mean(axis=0)
    return _symmetrize(centered.T @ centered / (n - 1))


def gram(data) -> np.ndarray:
    """Uncentered second-moment matrix ``X^T X / n``."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {x.shape}")
    n = x.shape[0]
    if n < 1 or x.shape[1] < 1:
        raise InsufficientData("gram matrix of an empty matrix")
    return _symmetrize(x.T @ x / n)


def leave_one_out_deltas(per_env: Sequence[np.ndarray]) -> list[np.ndarray]:
    """``M_j`` minus the unweighted mean of the other environments' matrices."""
    k = len(per_env)
    if k < 2:
        raise NeedMultipleEnvironments(f"deltas need at least 2 environments, got {k}")
    # explicit sums over the others keep identical inputs exactly zero
    out = []
    for j, m in enumerate(per_env):
        others = sum(per_env[i] for i in range(k) if i != j)
        out.append(_symmetrize(m - others / (k - 1)))
    return out


def build_scatter_set(dataset: MultiEnvDataset, mode: Mode = "covariance") -> ScatterSet:
    if mode not in MODES:
        raise ValueError(f"unknown scatter mode {mode!r}; expected one of {MODES}")
    if len(dataset) < 2:
        raise NeedMultipleEnvironments(
            f"need at least 2 environments, dataset has {len(dataset)}"
        )
    fn = covariance if mode == "covariance" else gram
    per_env = [fn(data) for _, data in dataset.environments]
    return ScatterSet(mode, dataset.labels, per_env, leave_one_out_deltas(per_env))


def window_group(series, block_len: int, stride: int, variable_names=None) -> MultiEnvDataset:
    """Cut a (T, p) series into overlapping blocks, one environment per block.

    Block ``k`` holds rows ``[k * stride, k * stride + block_len)``.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 2:
        raise ShapeError(f"expected a (T, p) series, got shape {x.shape}")
    if block_len < 2:
        raise ValueError("block_len must be at least 2")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    t = x.shape[0]
    if t < block_len:
        raise InsufficientData(f"series has {t} rows, shorter than block_len={block_len}")
    count = (t - block_len) // stride + 1
    envs = [(k, x[k * stride : k * stride + block_len]) for k in range(count)]
    return MultiEnvDataset(envs, list(variable_names) if variable_names is not None else [])
