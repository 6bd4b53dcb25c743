"""Classify estimated blocks as invariant vs residual and select the
invariance threshold by cross-validation."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeries, WindowPlan
from .exceptions import DataError, NumericalError
from .jbd import BlockDecomposition
from .linalg import qr_orthonormalize

_VAR_FLOOR = 1e-30


@dataclass(frozen=True)
class InvarianceScores:
    """Per-window, per-block correlation magnitudes between the residual and
    the fitted part of the block-projected pooled coefficient.

    ``c[k, j]`` is in [0, 1]; ``mean_abs[j]`` averages column j over windows.
    """

    c: np.ndarray
    mean_abs: np.ndarray


@dataclass(frozen=True)
class SubspaceSplit:
    """Partition of the estimated basis columns into an invariant and a
    residual side.

    Each side's columns are orthonormal and the two sides are exact
    orthogonal complements, so the derived projectors satisfy the projector
    algebra identities to machine precision.
    """

    u_hat: np.ndarray
    inv_columns: tuple
    res_columns: tuple
    lam: float | None
    dims: tuple

    @property
    def p(self) -> int:
        return self.u_hat.shape[0]

    @property
    def u_inv(self) -> np.ndarray:
        return self.u_hat[:, list(self.inv_columns)]

    @property
    def u_res(self) -> np.ndarray:
        return self.u_hat[:, list(self.res_columns)]

    @property
    def proj_inv(self) -> np.ndarray:
        return self.u_inv @ self.u_inv.T

    @property
    def proj_res(self) -> np.ndarray:
        return self.u_res @ self.u_res.T

    def to_json(self) -> dict:
        return {
            "u_hat": self.u_hat.tolist(),
            "inv_columns": list(self.inv_columns),
            "res_columns": list(self.res_columns),
            "lambda": self.lam,
            "dims": list(self.dims),
        }

    @classmethod
    def from_json(cls, data: dict) -> "SubspaceSplit":
        return cls(
            u_hat=np.asarray(data["u_hat"], dtype=float),
            inv_columns=tuple(data["inv_columns"]),
            res_columns=tuple(data["res_columns"]),
            lam=data["lambda"],
            dims=tuple(data["dims"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def block_projector(bd: BlockDecomposition, j: int) -> np.ndarray:
    """Orthogonal projector onto the span of block j's columns."""
    q = qr_orthonormalize(bd.u_hat[:, list(bd.blocks[j])])
    return q @ q.T


def invariance_scores(
    ts: TimeSeries, plan: WindowPlan, bd: BlockDecomposition, gamma_bar
) -> InvarianceScores:
    """Correlation between residual and fitted part, per window and block.

    For block j, the candidate coefficient is the projection of ``gamma_bar``
    onto the block span; within window k the score is
    |corr(Y - X b, X b)| on window-centered data. A block whose fitted part
    has zero variance scores 0 (it explains nothing, so it cannot violate
    invariance).
    """
    gamma_bar = np.asarray(gamma_bar, dtype=float)
    if gamma_bar.shape != (ts.p,) or not np.all(np.isfinite(gamma_bar)):
        raise DataError("gamma_bar must be a finite p-vector")
    q = len(bd.blocks)
    bs = [block_projector(bd, j) @ gamma_bar for j in range(q)]
    c = np.zeros((len(plan.windows), q))
    for k, (start, end) in enumerate(plan.windows):
        xs = ts.x[start:end]
        ys = ts.y[start:end]
        yc = ys - ys.mean()
        if float(yc @ yc) <= _VAR_FLOOR:
            raise DataError(f"window {k} has zero response variance")
        for j in range(q):
            fitted = xs @ bs[j]
            fitted = fitted - fitted.mean()
            resid = ys - xs @ bs[j]
            resid = resid - resid.mean()
            vf = float(fitted @ fitted)
            vr = float(resid @ resid)
            if vf <= _VAR_FLOOR or vr <= _VAR_FLOOR:
                c[k, j] = 0.0
            else:
                c[k, j] = min(1.0, abs(float(fitted @ resid)) / np.sqrt(vf * vr))
    return InvarianceScores(c=c, mean_abs=c.mean(axis=0))


def _orthonormal_sides(u_hat, inv_cols, res_cols):
    """Orthonormalize the invariant side in place, then the residual side
    against it, so the two spans are exact orthogonal complements."""
    p = u_hat.shape[0]
    out = np.array(u_hat, dtype=float)
    q_inv = qr_orthonormalize(u_hat[:, inv_cols]) if inv_cols else np.zeros((p, 0))
    if res_cols:
        res_raw = u_hat[:, res_cols]
        if q_inv.shape[1]:
            res_raw = res_raw - q_inv @ (q_inv.T @ res_raw)
        q_res = qr_orthonormalize(res_raw)
    else:
        q_res = np.zeros((p, 0))
    if inv_cols:
        out[:, inv_cols] = q_inv
    if res_cols:
        out[:, res_cols] = q_res
    return out


def build_split(bd: BlockDecomposition, inv_blocks, lam=None) -> SubspaceSplit:
    """Assemble a subspace split from a block decomposition and the set of
    invariant block indices."""
    inv_blocks = set(inv_blocks)
    inv_cols, res_cols = [], []
    for j, block in enumerate(bd.blocks):
        (inv_cols if j in inv_blocks else res_cols).extend(block)
    u_hat = _orthonormal_sides(bd.u_hat, inv_cols, res_cols)
    return SubspaceSplit(
        u_hat=u_hat,
        inv_columns=tuple(inv_cols),
        res_columns=tuple(res_cols),
        lam=lam,
        dims=(len(inv_cols), len(res_cols)),
    )


def split_subspaces(scores: InvarianceScores, bd: BlockDecomposition, lam: float) -> SubspaceSplit:
    """Blocks with mean score <= lam form the invariant side; an empty
    invariant side is a legal outcome."""
    if not 0.0 <= lam <= 1.0:
        raise DataError(f"lambda must be in [0, 1], got {lam}")
    inv_blocks = [j for j in range(len(bd.blocks)) if scores.mean_abs[j] <= lam]
    return build_split(bd, inv_blocks, lam=float(lam))


def _beta_from_rows(x, y, u_inv):
    """Invariant-side pooled OLS coefficient on centered rows."""
    if u_inv.shape[1] == 0:
        return np.zeros(x.shape[1])
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    z = xc @ u_inv
    gram = z.T @ z
    try:
        coef = np.linalg.solve(gram, z.T @ yc)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular reduced Gram matrix") from exc
    return u_inv @ coef


def _rolling_one_step_scores(x, y, beta, u_res, d):
    """One-step-ahead explained-variance scores for a rolling fit of the
    residual component.

    For every position t in [d, len(y)), the residual coefficient is fit on
    rows [t - d, t) (window-centered, with the window's adaptive intercept)
    and scored on row t as y^2 - (y - prediction)^2.
    """
    f = len(y)
    r = u_res.shape[1]
    resid = y - x @ beta
    z = x @ u_res
    ones = np.arange(d, f)
    starts = ones - d
    # rolling sums via cumulative arrays
    z_cum = np.vstack([np.zeros((1, r)), np.cumsum(z, axis=0)])
    zz = z[:, :, None] * z[:, None, :]
    zz_cum = np.concatenate([np.zeros((1, r, r)), np.cumsum(zz, axis=0)])
    zy_cum = np.vstack([np.zeros((1, r)), np.cumsum(z * resid[:, None], axis=0)])
    r_cum = np.concatenate([[0.0], np.cumsum(resid)])

    z_sum = z_cum[ones] - z_cum[starts]
    z_bar = z_sum / d
    r_bar = (r_cum[ones] - r_cum[starts]) / d
    if r:
        gram = zz_cum[ones] - zz_cum[starts] - d * z_bar[:, :, None] * z_bar[:, None, :]
        cross = zy_cum[ones] - zy_cum[starts] - z_sum * r_bar[:, None]
        try:
            delta = np.linalg.solve(gram, cross[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular rolling-window Gram matrix") from exc
        intercepts = r_bar - np.einsum("ti,ti->t", z_bar, delta)
        preds = intercepts + x[ones] @ beta + np.einsum("ti,ti->t", z[ones], delta)
    else:
        preds = r_bar + x[ones] @ beta
    actual = y[ones]
    return actual**2 - (actual - preds) ** 2


def _one_se_select(grid, means, ses, t_se):
    """Smallest grid value whose mean is within t_se standard errors of the
    best mean (ties included, so exact ties degenerate to the minimum)."""
    best = int(np.argmax(means))
    cutoff = means[best] - t_se * ses[best]
    for lam, mean in zip(grid, means):
        if mean >= cutoff:
            return float(lam)
    return float(grid[best])


def cross_validate_lambda(
    ts: TimeSeries,
    plan: WindowPlan,
    bd: BlockDecomposition,
    scores: InvarianceScores,
    folds: int = 10,
    d: int | None = None,
    t_se: float = 1.0,
) -> float:
    """Choose the invariance threshold by time-ordered cross-validation.

    The historical data is cut into ``folds`` contiguous blocks. For each
    candidate threshold, the invariant coefficient is refit on the complement
    of each fold and combined with a rolling residual fit of length ``d``
    (default 2p) inside the fold; the fold score is the average one-step
    explained variance. The reported threshold is the smallest one whose mean
    fold score is within ``t_se`` standard errors of the best.
    """
    if folds < 2:
        raise DataError(f"need at least 2 folds, got {folds}")
    p = ts.p
    if d is None:
        d = 2 * p
    grid = np.unique(np.concatenate([[0.0], np.asarray(scores.mean_abs, dtype=float)]))
    grid = np.clip(grid, 0.0, 1.0)
    splits = [split_subspaces(scores, bd, float(lam)) for lam in grid]
    max_res = max(s.dims[1] for s in splits)
    if d < max_res + 2:
        raise DataError(
            f"rolling window d={d} too short for dim_res={max_res} (need d >= dim_res + 2)"
        )
    fold_len = ts.n // folds
    if fold_len < d + 1:
        raise DataError(
            f"insufficient data for the fold geometry: fold length {fold_len} <= d={d}"
        )
    bounds = [(i * ts.n // folds, (i + 1) * ts.n // folds) for i in range(folds)]

    means = np.zeros(len(grid))
    ses = np.zeros(len(grid))
    all_rows = np.arange(ts.n)
    for gi, split in enumerate(splits):
        fold_scores = np.zeros(folds)
        for fi, (start, end) in enumerate(bounds):
            train = np.concatenate([all_rows[:start], all_rows[end:]])
            beta = _beta_from_rows(ts.x[train], ts.y[train], split.u_inv)
            s = _rolling_one_step_scores(
                ts.x[start:end], ts.y[start:end], beta, split.u_res, d
            )
            fold_scores[fi] = float(s.mean())
        means[gi] = fold_scores.mean()
        ses[gi] = np.sqrt(np.sum((fold_scores - means[gi]) ** 2)) / folds
    return _one_se_select(grid, means, ses, t_se)
