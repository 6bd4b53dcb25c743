"""Approximate joint diagonalization of symmetric matrices (uwedge-style)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError
from .linalg import check_symmetric, sym_eig


@dataclass(frozen=True)
class Diagonalizer:
    """Result of approximate joint diagonalization.

    Rows of ``v`` are demixing directions: ``v @ M_k @ v.T`` is approximately
    diagonal for every input matrix. Rows are scaled so that the transform of
    the first input matrix has unit diagonal.
    """

    v: np.ndarray
    iterations: int
    converged: bool
    final_cost: float


def _as_stack(mats) -> np.ndarray:
    ms = np.asarray(mats, dtype=float)
    if ms.ndim == 2:
        ms = ms[None, :, :]
    if ms.ndim != 3 or ms.shape[1] != ms.shape[2]:
        raise NumericalError(f"expected a list of square matrices, got shape {ms.shape}")
    if ms.shape[0] < 1:
        raise NumericalError("need at least one matrix")
    for k in range(ms.shape[0]):
        ms[k] = check_symmetric(ms[k], name=f"matrix {k}")
    return ms


def offdiag_cost(v, mats) -> float:
    """Mean squared off-diagonal mass of the transformed matrices.

    Zero if and only if every ``v @ M_k @ v.T`` is exactly diagonal.
    """
    ms = _as_stack(mats)
    v = np.asarray(v, dtype=float)
    t = np.einsum("ij,kjl,ml->kim", v, ms, v)
    diag = np.einsum("kii->ki", t)
    total = float(np.sum(t * t) - np.sum(diag * diag))
    return total / ms.shape[0]


def uwedge(mats, init=None, tol: float = 1e-9, max_iter: int = 1000) -> Diagonalizer:
    """Approximate joint diagonalizer of a set of symmetric matrices.

    The first matrix must be strictly positive definite; the default starting
    point is its whitening transform. Each sweep solves the per-pair 2x2
    normal equations (weighted by current diagonals) for a multiplicative
    update A, sets V <- A^{-1} V and rescales rows against the first matrix.
    Iteration stops when ||A - I||_F <= tol; running out of iterations is
    reported via ``converged=False``, not an error.
    """
    ms = _as_stack(mats)
    n_mats, p = ms.shape[0], ms.shape[1]
    m1 = ms[0]
    if init is None:
        eig = sym_eig(m1)
        if eig.values[-1] <= 0:
            raise NumericalError("first matrix must be strictly positive definite")
        v = (eig.vectors / np.sqrt(eig.values)).T
    else:
        v = np.array(init, dtype=float)
        if v.shape != (p, p):
            raise NumericalError(f"init must be {p}x{p}, got {v.shape}")

    eye = np.eye(p)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        c = np.einsum("ij,kjl,ml->kim", v, ms, v)
        d = np.einsum("kii->ki", c)
        r = d.T @ d
        rss = np.diag(r).copy()
        g = np.einsum("kij,kj->ij", c, d)
        den = np.outer(rss, rss) - r * r
        num = rss[:, None] * g - r * g.T
        floor = np.finfo(float).tiny + 1e-14 * np.outer(rss, rss)
        delta = np.where(den > floor, num / np.where(den > floor, den, 1.0), 0.0)
        np.fill_diagonal(delta, 0.0)
        step = float(np.linalg.norm(delta))
        if not np.isfinite(step):
            break
        try:
            v_new = np.linalg.solve(eye + delta, v)
        except np.linalg.LinAlgError:
            break
        scale = np.einsum("ij,jl,il->i", v_new, m1, v_new)
        if np.any(scale <= 0) or not np.all(np.isfinite(scale)):
            break
        v = v_new / np.sqrt(scale)[:, None]
        if step <= tol:
            converged = True
            break

    sign, logdet = np.linalg.slogdet(v)
    if sign == 0 or not np.isfinite(logdet):
        raise NumericalError("joint diagonalizer collapsed to a singular matrix")
    v = np.array(v)
    v.setflags(write=False)
    return Diagonalizer(
        v=v,
        iterations=iterations if n_mats else 0,
        converged=converged,
        final_cost=offdiag_cost(v, ms),
    )
