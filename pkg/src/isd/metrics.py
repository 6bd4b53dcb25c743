"""Evaluation metrics: explained variance, R^2, MSPE, cumulative curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeries, WindowPlan
from .exceptions import DataError


@dataclass(frozen=True)
class EvalReport:
    """Bundle of evaluation metrics for one estimator on one dataset."""

    r2: float | None = None
    cum_xv: np.ndarray | None = None
    mspe: float | None = None
    per_seed: list | None = None

    def __post_init__(self):
        if self.r2 is not None and self.r2 > 1.0 + 1e-12:
            raise DataError(f"r2 cannot exceed 1, got {self.r2}")

    def to_json(self) -> dict:
        return {
            "r2": self.r2,
            "cum_xv": None if self.cum_xv is None else np.asarray(self.cum_xv).tolist(),
            "mspe": self.mspe,
            "per_seed": self.per_seed,
        }


def r_squared(coeffs, intercept: float, ts: TimeSeries, plan: WindowPlan) -> float:
    """Fraction of per-window response variance explained by a fixed linear
    predictor; can be negative."""
    coeffs = np.asarray(coeffs, dtype=float)
    resid = ts.y - (intercept + ts.x @ coeffs)
    var_y_total = 0.0
    var_r_total = 0.0
    for start, end in plan.windows:
        if end > ts.n:
            raise DataError(f"window [{start}, {end}) exceeds series length {ts.n}")
        var_y_total += float(np.var(ts.y[start:end], ddof=1))
        var_r_total += float(np.var(resid[start:end], ddof=1))
    if var_y_total <= 0:
        raise DataError("zero total response variance")
    return (var_y_total - var_r_total) / var_y_total


def population_delta_var(beta, sigma, gamma0, noise_var: float = 0.0) -> float:
    """Population explained variance ``2 gamma0' Sigma beta - beta' Sigma beta``
    (the noise variance cancels and is accepted only for signature symmetry)."""
    beta = np.asarray(beta, dtype=float)
    gamma0 = np.asarray(gamma0, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return float(2.0 * gamma0 @ sigma @ beta - beta @ sigma @ beta)


def mspe(gamma_hat, gamma0, sigma) -> float:
    """Closed-form mean squared prediction error ``(g - g0)' Sigma (g - g0)``."""
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    gamma0 = np.asarray(gamma0, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if gamma_hat.shape != gamma0.shape or sigma.shape != (len(gamma0), len(gamma0)):
        raise DataError("shape mismatch in mspe")
    diff = gamma_hat - gamma0
    return float(diff @ sigma @ diff)


def mspe_mc(estimator, generator, m: int, reps: int, seed: int) -> float:
    """Monte-Carlo mean squared prediction error with refitting.

    Each repetition calls ``generator(m, rng)`` for a fresh window
    ``(x_window, y_window, gamma0, x_eval)``, refits ``estimator(x_window,
    y_window)``, and scores ``(x_eval @ (coef - gamma0))**2``. Per-rep seeds
    derive from the master seed.
    """
    if reps < 1:
        raise DataError(f"need reps >= 1, got {reps}")
    children = np.random.SeedSequence(int(seed)).spawn(reps)
    total = 0.0
    for child in children:
        rng = np.random.Generator(np.random.Philox(child))
        x_window, y_window, gamma0, x_eval = generator(m, rng)
        coef = np.asarray(estimator(x_window, y_window), dtype=float)
        err = float(np.asarray(x_eval, dtype=float) @ (coef - np.asarray(gamma0, dtype=float)))
        total += err * err
    return total / reps


def cumulative_xv(predictions, responses) -> np.ndarray:
    """Running sum of one-step explained variance ``y^2 - (y - yhat)^2``.

    Responses are expected to be centered by the caller.
    """
    predictions = np.asarray(predictions, dtype=float)
    responses = np.asarray(responses, dtype=float)
    if predictions.shape != responses.shape:
        raise DataError("predictions and responses must have the same length")
    return np.cumsum(responses**2 - (responses - predictions) ** 2)
