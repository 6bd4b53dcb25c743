"""Population and empirical estimators plus baselines (pooled OLS, rolling
OLS, maximin aggregation)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ajd import uwedge
from .dataset import TimeSeries, WindowPlan
from .decomposition import SubspaceSplit, build_split
from .exceptions import DataError, NumericalError
from .jbd import select_blocks
from .linalg import pinv_projected, qr_orthonormalize, sym_eig
from .moments import PooledMoments, pooled_moments, window_moments

_CONST_TOL = 1e-9


@dataclass(frozen=True)
class IsdModel:
    """Fitted invariant component with its subspace split.

    ``beta_inv`` lies in the invariant subspace. ``gamma0`` is the historical
    intercept estimate; ``intercept_mode`` records whether the per-window
    intercepts looked constant ("constant") or drifting ("adaptive").
    """

    split: SubspaceSplit
    beta_inv: np.ndarray
    intercept_mode: str
    gamma0: float
    pooled: PooledMoments

    def to_json(self) -> dict:
        return {
            "split": self.split.to_json(),
            "beta_inv": self.beta_inv.tolist(),
            "intercept_mode": self.intercept_mode,
            "gamma0": self.gamma0,
            "pooled": {
                "var_x_bar": self.pooled.var_x_bar.tolist(),
                "cov_xy_bar": self.pooled.cov_xy_bar.tolist(),
                "mean_x": self.pooled.mean_x.tolist(),
                "mean_y": self.pooled.mean_y,
                "n": self.pooled.n,
                "singular": self.pooled.singular,
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "IsdModel":
        pooled = data["pooled"]
        return cls(
            split=SubspaceSplit.from_json(data["split"]),
            beta_inv=np.asarray(data["beta_inv"], dtype=float),
            intercept_mode=data["intercept_mode"],
            gamma0=float(data["gamma0"]),
            pooled=PooledMoments(
                var_x_bar=np.asarray(pooled["var_x_bar"], dtype=float),
                cov_xy_bar=np.asarray(pooled["cov_xy_bar"], dtype=float),
                mean_x=np.asarray(pooled["mean_x"], dtype=float),
                mean_y=float(pooled["mean_y"]),
                n=int(pooled["n"]),
                singular=bool(pooled["singular"]),
            ),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass(frozen=True)
class AdaptationFit:
    """Residual component fit on an adaptation window.

    ``gamma_isd`` is exactly ``beta_inv + delta_res``; ``delta_res`` lies in
    the residual subspace.
    """

    delta_res: np.ndarray
    gamma_isd: np.ndarray
    intercept: float
    window: tuple


def population_isd(sigmas, gammas):
    """Exact decomposition from population covariances and coefficients.

    Runs the joint block diagonalization on the exact covariance family,
    marks a block invariant when its projection of the coefficient path is
    constant over time, and evaluates the invariant component and the
    last-period residual component in closed form.

    Returns ``(beta_inv, delta_res_last, split)``.
    """
    sigmas = [np.asarray(s, dtype=float) for s in sigmas]
    gammas = [np.asarray(g, dtype=float) for g in gammas]
    if len(sigmas) != len(gammas) or not sigmas:
        raise DataError("need equal, nonempty lists of covariances and coefficients")
    diag = uwedge(sigmas)
    bd = select_blocks(diag, sigmas)

    inv_blocks = []
    for j, block in enumerate(bd.blocks):
        q = qr_orthonormalize(bd.u_hat[:, list(block)])
        proj = q @ q.T
        projected = np.stack([proj @ g for g in gammas])
        if np.max(np.abs(projected - projected[0])) <= _CONST_TOL:
            inv_blocks.append(j)
    split = build_split(bd, inv_blocks)

    sigma_bar = np.mean(sigmas, axis=0)
    cov_bar = np.mean([s @ g for s, g in zip(sigmas, gammas)], axis=0)
    p = sigma_bar.shape[0]
    if split.dims[0]:
        beta_inv = pinv_projected(sigma_bar, split.u_inv) @ cov_bar
    else:
        beta_inv = np.zeros(p)
    if split.dims[1]:
        u_res = split.u_res
        sigma_last, gamma_last = sigmas[-1], gammas[-1]
        cov_resid = sigma_last @ (gamma_last - beta_inv)
        delta = u_res @ np.linalg.solve(u_res.T @ sigma_last @ u_res, u_res.T @ cov_resid)
    else:
        delta = np.zeros(p)
    return beta_inv, delta, split


def fit_invariant(
    ts: TimeSeries,
    split: SubspaceSplit,
    plan: WindowPlan | None = None,
    moments=None,
    intercept_tol: float = 0.1,
) -> IsdModel:
    """Pooled plug-in fit of the invariant component on centered data.

    If ``plan`` (or a precomputed ``moments`` list) is given, the intercept
    follows the per-window estimates: their mean is used, and the mode is
    "constant" when their sample standard deviation is at most
    ``intercept_tol * (1 + |mean|)``, "adaptive" otherwise. Without windows
    the intercept is estimated jointly with the invariant component.
    """
    dim_inv = split.dims[0]
    if ts.n < dim_inv + 2:
        raise DataError(f"need n >= dim_inv + 2, got n={ts.n}, dim_inv={dim_inv}")
    pooled = pooled_moments(ts)
    if dim_inv:
        beta_inv = pinv_projected(pooled.var_x_bar, split.u_inv) @ pooled.cov_xy_bar
    else:
        beta_inv = np.zeros(ts.p)

    if moments is None and plan is not None:
        moments = window_moments(ts, plan)
    if moments:
        intercepts = np.array([m.gamma0_hat for m in moments])
        mean0 = float(intercepts.mean())
        sd0 = float(intercepts.std(ddof=1)) if len(intercepts) > 1 else 0.0
        mode = "constant" if sd0 <= intercept_tol * (1.0 + abs(mean0)) else "adaptive"
        gamma0 = mean0
    else:
        mode = "constant"
        gamma0 = pooled.mean_y - float(pooled.mean_x @ beta_inv)
    return IsdModel(
        split=split,
        beta_inv=beta_inv,
        intercept_mode=mode,
        gamma0=gamma0,
        pooled=pooled,
    )


def fit_adaptation(adapt: TimeSeries, model: IsdModel) -> AdaptationFit:
    """Fit the residual component on a recent window and assemble the
    time-adapted coefficient."""
    split = model.split
    dim_res = split.dims[1]
    m = adapt.n
    if m < dim_res + 2:
        raise DataError(
            f"adaptation window too short: m={m} < dim_res + 2 = {dim_res + 2}"
        )
    beta = model.beta_inv
    target = adapt.y - adapt.x @ beta
    if dim_res:
        u_res = split.u_res
        z = adapt.x @ u_res
        zc = z - z.mean(axis=0)
        tc = target - target.mean()
        gram = zc.T @ zc
        try:
            coef = np.linalg.solve(gram, zc.T @ tc)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular reduced Gram matrix in adaptation window") from exc
        delta = u_res @ coef
        adaptive_intercept = float(target.mean() - z.mean(axis=0) @ coef)
    else:
        delta = np.zeros(adapt.p)
        adaptive_intercept = float(target.mean())
    intercept = model.gamma0 if model.intercept_mode == "constant" else adaptive_intercept
    return AdaptationFit(
        delta_res=delta,
        gamma_isd=beta + delta,
        intercept=intercept,
        window=(adapt.t0, adapt.t0 + m),
    )


def predict(coeffs, intercept: float, x):
    """Linear prediction ``intercept + x @ coeffs`` (row-wise for matrices)."""
    return intercept + np.asarray(x, dtype=float) @ np.asarray(coeffs, dtype=float)


def pooled_ols(ts: TimeSeries):
    """Full-space OLS slope and intercept on centered data.

    Raises if the window is underdetermined (fewer than p + 2 rows) or the
    centered Gram matrix is singular.
    """
    if ts.n < ts.p + 2:
        raise DataError(
            f"underdetermined least squares: n={ts.n} rows for p={ts.p} covariates"
        )
    mu = ts.x.mean(axis=0)
    xc = ts.x - mu
    yc = ts.y - ts.y.mean()
    gram = xc.T @ xc
    eigvals = np.linalg.eigvalsh(gram)
    if eigvals[0] <= max(eigvals[-1], 0.0) * 1e-12 or eigvals[-1] <= 0:
        raise NumericalError("singular Gram matrix in pooled OLS")
    coef = np.linalg.solve(gram, xc.T @ yc)
    intercept = float(ts.y.mean() - mu @ coef)
    return coef, intercept


def rolling_ols(adapt: TimeSeries):
    """OLS on an adaptation window; same contract as ``pooled_ols``."""
    return pooled_ols(adapt)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    sorted_desc = -np.sort(-v)
    cumulative = (np.cumsum(sorted_desc) - 1.0) / np.arange(1, len(v) + 1)
    k = np.nonzero(sorted_desc > cumulative)[0][-1]
    return np.maximum(v - cumulative[k], 0.0)


def magging(gammas, pooled_var, tol: float = 1e-8, max_iter: int = 10000) -> np.ndarray:
    """Convex aggregation of per-window slopes minimizing the pooled-variance
    weighted norm over the simplex (projected gradient, fixed step)."""
    gammas = [np.asarray(g, dtype=float) for g in gammas]
    if not gammas:
        raise DataError("need at least one slope")
    if len(gammas) == 1:
        return gammas[0].copy()
    b = np.column_stack(gammas)
    h = b.T @ np.asarray(pooled_var, dtype=float) @ b
    h = 0.5 * (h + h.T)
    k = h.shape[0]
    lip = float(sym_eig(h).values[0])
    w = np.full(k, 1.0 / k)
    if lip <= 0:
        return b @ w
    for _ in range(max_iter):
        w_new = _project_simplex(w - (h @ w) / lip)
        if np.max(np.abs(w_new - w)) <= tol:
            w = w_new
            break
        w = w_new
    return b @ w
