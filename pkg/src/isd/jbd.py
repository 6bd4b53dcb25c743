"""Joint block diagonalization on top of an AJD result.

The demixed matrices are scanned for residual off-diagonal correlation; a
penalized threshold search groups coordinates into common blocks and yields
an estimated irreducible joint block diagonalizer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ajd import Diagonalizer, _as_stack
from .exceptions import NumericalError


@dataclass(frozen=True)
class ResidualProfile:
    """Entrywise maximum of |V M_k V^T| over k; off-diagonal entries measure
    residual correlation between demixed coordinates."""

    sigma_max: np.ndarray


@dataclass(frozen=True)
class BlockDecomposition:
    """Estimated joint block diagonalizer.

    Columns of ``u_hat`` are permuted so each block occupies a contiguous
    index range; ``blocks`` lists those ranges as index tuples covering
    {0..p-1}.
    """

    u_hat: np.ndarray
    blocks: tuple
    tau_star: float
    objective: float

    @property
    def p(self) -> int:
        return self.u_hat.shape[0]

    @property
    def dims(self) -> tuple:
        return tuple(len(b) for b in self.blocks)

    def to_json(self) -> dict:
        return {
            "u_hat": self.u_hat.tolist(),
            "blocks": [list(b) for b in self.blocks],
            "tau_star": self.tau_star,
            "objective": self.objective,
        }

    @classmethod
    def from_json(cls, data: dict) -> "BlockDecomposition":
        return cls(
            u_hat=np.asarray(data["u_hat"], dtype=float),
            blocks=tuple(tuple(b) for b in data["blocks"]),
            tau_star=float(data["tau_star"]),
            objective=float(data["objective"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


class _UnionFind:
    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, u):
        while self.parent[u] != u:
            self.parent[u] = self.parent[self.parent[u]]
            u = self.parent[u]
        return u

    def union(self, u, v):
        ru, rv = self.find(u), self.find(v)
        if ru != rv:
            self.parent[max(ru, rv)] = min(ru, rv)


def residual_profile(diag: Diagonalizer, mats) -> ResidualProfile:
    """Entrywise max of the demixed absolute matrices, symmetrized."""
    ms = _as_stack(mats)
    t = np.abs(np.einsum("ij,kjl,ml->kim", diag.v, ms, diag.v))
    sm = t.max(axis=0)
    return ResidualProfile(sigma_max=0.5 * (sm + sm.T))


def blocks_at_threshold(profile: ResidualProfile, tau: float) -> list:
    """Connected components of the graph with an edge (i, j), i != j, wherever
    ``sigma_max[i, j] >= tau``. Components are sorted by smallest member."""
    if tau < 0:
        raise NumericalError(f"threshold must be nonnegative, got {tau}")
    sm = profile.sigma_max
    p = sm.shape[0]
    uf = _UnionFind(p)
    for i in range(p):
        for j in range(i + 1, p):
            if sm[i, j] >= tau:
                uf.union(i, j)
    groups = {}
    for i in range(p):
        groups.setdefault(uf.find(i), []).append(i)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def _labels(blocks, p):
    labels = np.empty(p, dtype=int)
    for j, block in enumerate(blocks):
        labels[list(block)] = j
    return labels


def select_blocks(diag: Diagonalizer, mats) -> BlockDecomposition:
    """Pick the block structure minimizing off-block mass plus a size penalty.

    Candidate thresholds are zero, every distinct off-diagonal entry of the
    residual profile, and one value above the largest entry (so the
    all-singleton partition is reachable). The objective is the mean absolute
    off-block entry of the demixed matrices plus ``nu * p_bd / p^2``, where
    ``p_bd`` counts in-block entries and ``nu`` is the mean smallest
    eigenvalue of the inputs. Ties prefer the larger threshold, i.e. the
    finer partition.
    """
    ms = _as_stack(mats)
    p = ms.shape[1]
    lam_min = np.array([np.linalg.eigvalsh(m)[0] for m in ms])
    if np.any(lam_min <= 0):
        bad = int(np.argmin(lam_min))
        raise NumericalError(
            f"input matrix {bad} is not positive definite (lambda_min = {lam_min[bad]:.3e})"
        )
    nu = float(lam_min.mean())
    t_abs = np.abs(np.einsum("ij,kjl,ml->kim", diag.v, ms, diag.v))
    profile = residual_profile(diag, ms)
    sm = profile.sigma_max
    iu = np.triu_indices(p, k=1)
    off_values = np.unique(sm[iu]) if p > 1 else np.array([])
    candidates = np.unique(np.concatenate([[0.0], off_values]))
    if off_values.size:
        candidates = np.append(candidates, np.nextafter(candidates[-1], np.inf))

    best = None
    for tau in candidates:
        blocks = blocks_at_threshold(profile, float(tau))
        labels = _labels(blocks, p)
        off_mask = labels[:, None] != labels[None, :]
        obd = float(t_abs[:, off_mask].mean()) if off_mask.any() else 0.0
        p_bd = sum(len(b) ** 2 for b in blocks)
        objective = obd + nu * p_bd / p**2
        if best is None or objective <= best[0]:
            best = (objective, float(tau), blocks)

    objective, tau_star, blocks = best
    perm = [i for block in blocks for i in block]
    u_hat = diag.v.T[:, perm]
    grouped = []
    offset = 0
    for block in blocks:
        grouped.append(tuple(range(offset, offset + len(block))))
        offset += len(block)
    return BlockDecomposition(
        u_hat=u_hat,
        blocks=tuple(grouped),
        tau_star=tau_star,
        objective=objective,
    )


def is_decorrelating(blocks, basis, mats, tol: float) -> bool:
    """True iff the given column blocks of ``basis`` mutually decorrelate all
    matrices: every cross-block product ``(U^Si)^T M_k U^Sj`` has max
    magnitude at most ``tol``."""
    ms = _as_stack(mats)
    basis = np.asarray(basis, dtype=float)
    cols = sorted(i for block in blocks for i in block)
    if cols != list(range(basis.shape[1])):
        raise NumericalError("blocks must partition the basis columns")
    for a in range(len(blocks)):
        ua = basis[:, list(blocks[a])]
        for b in range(a + 1, len(blocks)):
            ub = basis[:, list(blocks[b])]
            cross = np.einsum("ia,kij,jb->kab", ua, ms, ub)
            if np.max(np.abs(cross)) > tol:
                return False
    return True
