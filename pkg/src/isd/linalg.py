"""Dense symmetric-matrix kernels with fixed numerical contracts.

All routines are deterministic and meant for small matrices (p <= 64);
no sparse or randomized algorithms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError

SYM_TOL = 1e-10


def check_symmetric(a, name: str = "matrix", tol: float = SYM_TOL) -> np.ndarray:
    """Validate that ``a`` is square and symmetric to ``tol``; return the
    symmetrized copy ``(a + a.T) / 2``."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericalError(f"{name} must be square, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    if np.max(np.abs(a - a.T)) > tol * scale:
        raise NumericalError(f"{name} is not symmetric")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition of a symmetric matrix.

    ``values`` are sorted in descending order, ``vectors[:, i]`` is the
    orthonormal eigenvector paired with ``values[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray


def sym_eig(a) -> SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    a = check_symmetric(a)
    vals, vecs = np.linalg.eigh(a)
    order = np.argsort(-vals, kind="stable")
    return SymEig(values=vals[order], vectors=vecs[:, order])


def solve_spd(a, b) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive definite ``a``."""
    a = check_symmetric(a)
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("matrix is not positive definite") from exc
    return np.linalg.solve(a, np.asarray(b, dtype=float))


def qr_orthonormalize(b) -> np.ndarray:
    """Orthonormal basis (QR) for the column span of ``b``.

    Raises on rank-deficient input. Signs are fixed so the result is
    deterministic. A zero-column input returns a (p, 0) array.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 2:
        raise NumericalError(f"expected a 2-d array, got shape {b.shape}")
    if b.shape[1] == 0:
        return np.zeros((b.shape[0], 0))
    q, r = np.linalg.qr(b)
    diag = np.abs(np.diag(r))
    if diag.size and np.min(diag) <= b.shape[0] * np.finfo(float).eps * max(1.0, np.max(diag)):
        raise NumericalError("rank-deficient input to QR orthonormalization")
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def pinv_projected(sigma, u_block) -> np.ndarray:
    """``U (U^T Sigma U)^{-1} U^T`` for a matrix ``U`` with orthonormal columns.

    On block-compatible ``Sigma`` this equals the Moore-Penrose pseudoinverse
    of the projected covariance ``(U U^T) Sigma (U U^T)``.
    """
    sigma = check_symmetric(sigma, name="sigma")
    u = np.asarray(u_block, dtype=float)
    if u.ndim != 2 or u.shape[0] != sigma.shape[0]:
        raise NumericalError(
            f"basis shape {u.shape} incompatible with sigma shape {sigma.shape}"
        )
    if u.shape[1] == 0:
        return np.zeros_like(sigma)
    gram = u.T @ u
    if np.max(np.abs(gram - np.eye(u.shape[1]))) > 1e-8:
        raise NumericalError("basis columns are not orthonormal")
    reduced = u.T @ sigma @ u
    return u @ solve_spd(reduced, u.T)
