"""Non-orthogonal joint approximate diagonalization of symmetric matrices.

The solver follows the multiplicative scheme ``D <- (I + W) D`` where ``W`` has
a zero diagonal and each off-diagonal pair ``(W[k, l], W[l, k])`` minimizes the
first-order expansion of the off-diagonal loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NeedMultipleEnvironments, NumericalBreakdown, ShapeError

DET_EPS = 1e-12
INVERTIBILITY_EPS = 1e-12
MAX_HALVINGS = 20


@dataclass
class DiagonalizerOptions:
    tol: float = 1e-8
    max_iter: int = 500
    step_bound: float = 0.9
    line_search: bool = False


@dataclass
class DiagonalizerResult:
    D_tilde: np.ndarray
    final_loss: float
    iterations: int
    converged: bool
    loss_trace: list[float] = field(default_factory=list)
    stalled: bool = False


def _stack(matrices, p=None) -> np.ndarray:
    ms = [np.asarray(m, dtype=float) for m in matrices]
    if not ms:
        raise ShapeError("no matrices given")
    p = ms[0].shape[0] if p is None else p
    for m in ms:
        if m.shape != (p, p):
            raise ShapeError(f"expected {p}x{p} matrices, got {m.shape}")
    return np.stack(ms)


def _transform(D: np.ndarray, M: np.ndarray) -> np.ndarray:
    return D @ M @ D.T


def _loss(C: np.ndarray) -> float:
    off = C * (1.0 - np.eye(C.shape[-1]))
    return float(np.sum(off * off))


def offdiag_loss(matrices, D) -> float:
    """Sum over ``j`` of the squared off-diagonal entries of ``D M_j D^T``."""
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ShapeError(f"D must be square, got shape {D.shape}")
    M = _stack(matrices, D.shape[1])
    return _loss(_transform(D, M))


def ffdiag_update(C: np.ndarray) -> np.ndarray:
    """Zero-diagonal update ``W`` for the current transformed stack ``C``."""
    d = np.einsum("jkk->jk", C)
    z = d.T @ d
    y = np.einsum("jl,jkl->kl", d, C)
    zd = np.diag(z)
    det = np.outer(zd, zd) - z * z
    num = z * y.T - zd[:, None] * y
    scale = np.outer(zd, zd)
    ok = np.abs(det) > DET_EPS * np.maximum(scale, np.finfo(float).tiny)
    W = np.zeros_like(C[0])
    np.divide(num, det, out=W, where=ok)
    np.fill_diagonal(W, 0.0)
    return W


def _is_invertible(D: np.ndarray) -> bool:
    row_norms = np.prod(np.linalg.norm(D, axis=1))
    return bool(row_norms > 0 and abs(np.linalg.det(D)) >= INVERTIBILITY_EPS * row_norms)


def _check_invertible(D: np.ndarray) -> None:
    if not np.all(np.isfinite(D)):
        raise NumericalBreakdown("non-finite entries in the diagonalizer")
    if not _is_invertible(D):
        raise NumericalBreakdown("diagonalizer became numerically singular")


def _normalize_rows(D: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(D, axis=1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(norms)):
        raise NumericalBreakdown("diagonalizer has a zero or non-finite row")
    return D / norms


def _loss_gradient(D: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Gradient of the row-normalized loss w.r.t. a multiplicative step ``(I + G) D``."""
    off = C * (1.0 - np.eye(C.shape[-1]))
    H = 4.0 * np.einsum("jkm,jml->kl", off, C)
    return H - np.diag(H)[:, None] * (D @ D.T)


def joint_diagonalize(matrices, options: DiagonalizerOptions | None = None) -> DiagonalizerResult:
    """Find an invertible ``D`` making every ``D M_j D^T`` as diagonal as possible.

    Rows of ``D`` are kept at unit Euclidean norm, which removes the trivial
    shrink-to-zero direction of the loss. By default every update is taken
    (after bounding ``||W||_F``). With ``options.line_search`` the update is
    halved until the loss does not increase, falling back to a gradient step
    when the update is not a descent direction, so ``loss_trace`` is monotone.

    Args:
        matrices: at least two symmetric p x p matrices.
        options: tolerance, iteration cap, bound on ``||W||_F``, line search.

    Returns:
        DiagonalizerResult. Non-convergence is reported, not raised.

    Raises:
        NumericalBreakdown: NaN/Inf or a singular iterate.
    """
    opts = options or DiagonalizerOptions()
    M = _stack(matrices)
    if M.shape[0] < 2:
        raise NeedMultipleEnvironments("joint diagonalization needs at least 2 matrices")
    if not np.all(np.isfinite(M)):
        raise NumericalBreakdown("input matrices contain non-finite entries")
    M = (M + M.transpose(0, 2, 1)) / 2.0
    p = M.shape[1]
    eye = np.eye(p)

    D = eye.copy()
    C = M.copy()
    loss = _loss(C)
    trace = [loss]
    mass = float(np.sum(M * M))
    # roundoff floor: relative off-diagonal magnitude around 1e3 * eps
    floor = (1e3 * np.finfo(float).eps) ** 2 * max(mass, np.finfo(float).tiny)
    converged = loss <= floor
    stalled = False
    it = 0

    def attempt(step):
        D_new = _normalize_rows((eye + step) @ D)
        C_new = _transform(D_new, M)
        loss_new = _loss(C_new)
        if not np.isfinite(loss_new):
            raise NumericalBreakdown("loss became non-finite")
        if opts.line_search and not _is_invertible(D_new):
            loss_new = np.inf
        return D_new, C_new, loss_new

    while not converged and it < opts.max_iter:
        it += 1
        W = ffdiag_update(C)
        if not np.all(np.isfinite(W)):
            raise NumericalBreakdown("non-finite update")
        norm = np.linalg.norm(W)
        if norm > opts.step_bound:
            W *= opts.step_bound / norm
        D_new, C_new, loss_new = attempt(W)
        if opts.line_search and loss_new > loss:
            D_new, C_new, loss_new = _descend(attempt, W, loss)
            if loss_new > loss:
                G = _loss_gradient(D, C)
                gnorm = np.linalg.norm(G)
                step = -G * (min(opts.step_bound, loss / gnorm**2) if gnorm > 0 else 0.0)
                D_new, C_new, loss_new = _descend(attempt, step, loss)
            if loss_new > loss:
                stalled = True
                converged = loss - min(loss_new, loss) <= opts.tol * loss
                break
        _check_invertible(D_new)
        change = abs(loss - loss_new)
        D, C, loss = D_new, C_new, loss_new
        trace.append(loss)
        if loss <= floor or change <= opts.tol * trace[-2]:
            converged = True
    return DiagonalizerResult(D, loss, it, converged, trace, stalled)


def _descend(attempt, step, loss):
    for _ in range(MAX_HALVINGS + 1):
        D_new, C_new, loss_new = attempt(step)
        if loss_new <= loss:
            break
        step = step / 2.0
    return D_new, C_new, loss_new
