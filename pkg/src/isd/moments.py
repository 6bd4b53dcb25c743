"""Per-window and pooled second-moment / regression estimates.

Covariances are always computed on centered data; the intercept is tracked
explicitly instead of augmenting X with a constant column. Sample covariances
use the unbiased (n - 1) normalization throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeries, WindowPlan
from .exceptions import DataError, NumericalError

_COND_FLOOR = 1e-12


@dataclass(frozen=True)
class WindowMoments:
    """Second moments and regression estimates for one window.

    ``sigma_hat`` is the sample covariance of the covariates, ``gamma_hat``
    and ``gamma0_hat`` the within-window OLS slope and intercept,
    ``noise_var`` the residual variance estimate and ``coef_cov`` the
    estimated covariance of the slope estimate.
    """

    sigma_hat: np.ndarray
    mu_hat: np.ndarray
    gamma_hat: np.ndarray
    gamma0_hat: float
    noise_var: float
    coef_cov: np.ndarray
    window: tuple


@dataclass(frozen=True)
class PooledMoments:
    """Centered second moments pooled over the whole series."""

    var_x_bar: np.ndarray
    cov_xy_bar: np.ndarray
    mean_x: np.ndarray
    mean_y: float
    n: int
    singular: bool


def _gram_is_singular(gram: np.ndarray) -> bool:
    eigvals = np.linalg.eigvalsh(gram)
    top = max(float(eigvals[-1]), 0.0)
    return eigvals[0] <= top * _COND_FLOOR or top == 0.0


def window_moments(ts: TimeSeries, plan: WindowPlan) -> list[WindowMoments]:
    """Per-window covariance and OLS estimates (intercept included)."""
    p = ts.p
    out = []
    for idx, (start, end) in enumerate(plan.windows):
        if end > ts.n:
            raise DataError(f"window {idx} [{start}, {end}) exceeds series length {ts.n}")
        w = end - start
        if w < p + 2:
            raise DataError(
                f"window {idx} has length {w} < p + 2 = {p + 2}"
            )
        xs = ts.x[start:end]
        ys = ts.y[start:end]
        mu = xs.mean(axis=0)
        xc = xs - mu
        yc = ys - ys.mean()
        gram = xc.T @ xc
        if _gram_is_singular(gram):
            raise NumericalError(
                f"singular within-window Gram matrix in window {idx} [{start}, {end})"
            )
        sigma = gram / (w - 1)
        coef = np.linalg.solve(gram, xc.T @ yc)
        resid = yc - xc @ coef
        noise_var = float(resid @ resid) / (w - p - 1)
        gram_inv = np.linalg.inv(gram)
        coef_cov = noise_var * 0.5 * (gram_inv + gram_inv.T)
        out.append(
            WindowMoments(
                sigma_hat=0.5 * (sigma + sigma.T),
                mu_hat=mu,
                gamma_hat=coef,
                gamma0_hat=float(ys.mean() - mu @ coef),
                noise_var=noise_var,
                coef_cov=coef_cov,
                window=(start, end),
            )
        )
    return out


def pooled_moments(ts: TimeSeries) -> PooledMoments:
    """Centered covariance of X and cross-covariance with Y over all rows."""
    if ts.n < ts.p + 2:
        raise DataError(f"need n >= p + 2 rows, got n={ts.n}, p={ts.p}")
    mu = ts.x.mean(axis=0)
    xc = ts.x - mu
    yc = ts.y - ts.y.mean()
    var = xc.T @ xc / (ts.n - 1)
    var = 0.5 * (var + var.T)
    cov = xc.T @ yc / (ts.n - 1)
    return PooledMoments(
        var_x_bar=var,
        cov_xy_bar=cov,
        mean_x=mu,
        mean_y=float(ts.y.mean()),
        n=ts.n,
        singular=bool(ts.n <= ts.p or _gram_is_singular(var)),
    )


def weighted_gamma(moments, mode: str = "plain") -> np.ndarray:
    """Aggregate per-window slopes.

    ``plain`` takes the arithmetic mean; ``variance_weighted`` weights each
    slope by the inverse of its estimated covariance.
    """
    if not moments:
        raise DataError("need at least one window")
    gammas = np.stack([m.gamma_hat for m in moments])
    if mode == "plain":
        return gammas.mean(axis=0)
    if mode != "variance_weighted":
        raise DataError(f"unknown mode {mode!r}")
    p = gammas.shape[1]
    weight_sum = np.zeros((p, p))
    weighted = np.zeros(p)
    for idx, m in enumerate(moments):
        if _gram_is_singular(m.coef_cov):
            raise NumericalError(f"singular coefficient covariance in window {idx}")
        w = np.linalg.inv(m.coef_cov)
        weight_sum += w
        weighted += w @ m.gamma_hat
    return np.linalg.solve(weight_sum, weighted)


def window_moments_to_json(moments) -> list[dict]:
    """JSON-friendly dump of a window-moments list (debug / benchmark capture)."""
    return [
        {
            "window": list(m.window),
            "sigma_hat": m.sigma_hat.tolist(),
            "mu_hat": m.mu_hat.tolist(),
            "gamma_hat": m.gamma_hat.tolist(),
            "gamma0_hat": m.gamma0_hat,
            "noise_var": m.noise_var,
            "coef_cov": m.coef_cov.tolist(),
        }
        for m in moments
    ]
