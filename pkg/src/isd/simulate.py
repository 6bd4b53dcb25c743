"""Seeded generators for the synthetic settings, with ground truth exposed.

All randomness flows through the counter-based Philox bit generator so that
identical (generator, n, seed) inputs reproduce datasets bit for bit across
platforms. Each generator splits its seed into independent child streams
(basis, covariance regimes, covariates, noise) so that paired historical and
test datasets generated from the same seed share the same rotation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeries
from .decomposition import SubspaceSplit, build_split
from .exceptions import DataError
from .jbd import BlockDecomposition

ROT30 = np.array([[0.5 * math.sqrt(3.0), 0.5], [-0.5, 0.5 * math.sqrt(3.0)]])

MAIN_P = 10
MAIN_BLOCK_DIMS = (2, 4, 3, 1)
# time-varying coordinates sit in the blocks of sizes 2 and 1
MAIN_RES_COORDS = (0, 1, 9)
MAIN_INV_COORDS = (2, 3, 4, 5, 6, 7, 8)
MAIN_CONST_VALUE = 0.2
# per-coordinate frequency/phase indices for the sinusoidal schedules
MAIN_SIN_INDICES = (2, 5, 8)
# variance calibration: covariance blocks carrying drifting coordinates are
# scaled down so the invariant and drifting parts of the signal are on
# comparable footing (the block law is otherwise a free choice)
MAIN_RES_BLOCK_SCALE = 0.4


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def random_orthogonal(p: int, seed) -> np.ndarray:
    """Haar-ish random orthogonal matrix: QR of a Gaussian matrix with the R
    diagonal signs fixed for determinism."""
    rng = _generator(seed)
    a = rng.standard_normal((p, p))
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def random_spd_block(dim: int, seed) -> np.ndarray:
    """Random SPD matrix ``A A^T + 0.1 I`` rescaled to unit mean diagonal."""
    rng = _generator(seed)
    a = rng.standard_normal((dim, dim))
    m = a @ a.T + 0.1 * np.eye(dim)
    m *= dim / np.trace(m)
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class GroundTruth:
    """Generator-side truth used by oracle tests and benchmark baselines."""

    u_true: np.ndarray
    gamma0_t: np.ndarray
    sigmas: tuple
    regimes: tuple
    noise_var: np.ndarray
    dims: tuple
    beta_inv_true: np.ndarray
    inv_coords: tuple
    res_coords: tuple

    def sigma_at(self, row: int) -> np.ndarray:
        """Covariance in force at a 0-based row index."""
        for (start, end), sigma in zip(self.regimes, self.sigmas):
            if start <= row < end:
                return sigma
        raise DataError(f"row {row} outside every regime")

    def to_json(self) -> dict:
        return {
            "u_true": self.u_true.tolist(),
            "gamma0_t": self.gamma0_t.tolist(),
            "sigmas": [s.tolist() for s in self.sigmas],
            "regimes": [list(r) for r in self.regimes],
            "noise_var": self.noise_var.tolist(),
            "dims": list(self.dims),
            "beta_inv": self.beta_inv_true.tolist(),
            "inv_coords": list(self.inv_coords),
            "res_coords": list(self.res_coords),
        }

    @classmethod
    def from_json(cls, data: dict) -> "GroundTruth":
        return cls(
            u_true=np.asarray(data["u_true"], dtype=float),
            gamma0_t=np.asarray(data["gamma0_t"], dtype=float),
            sigmas=tuple(np.asarray(s, dtype=float) for s in data["sigmas"]),
            regimes=tuple(tuple(r) for r in data["regimes"]),
            noise_var=np.asarray(data["noise_var"], dtype=float),
            dims=tuple(data["dims"]),
            beta_inv_true=np.asarray(data["beta_inv"], dtype=float),
            inv_coords=tuple(data["inv_coords"]),
            res_coords=tuple(data["res_coords"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def oracle_split(gt: GroundTruth) -> SubspaceSplit:
    """Subspace split built from the true rotation and coordinate masks."""
    p = gt.u_true.shape[0]
    blocks = tuple((i,) for i in range(p))
    bd = BlockDecomposition(
        u_hat=gt.u_true, blocks=blocks, tau_star=0.0, objective=0.0
    )
    return build_split(bd, set(gt.inv_coords))


def _segment_bounds(total: int, segments: int):
    return [(i * total // segments, (i + 1) * total // segments) for i in range(segments)]


def _draw_series(rng_x, rng_eps, regimes, sigmas, gamma0_t, noise_var):
    total = gamma0_t.shape[0]
    p = gamma0_t.shape[1]
    x = np.empty((total, p))
    for (start, end), sigma in zip(regimes, sigmas):
        chol = np.linalg.cholesky(sigma)
        x[start:end] = rng_x.standard_normal((end - start, p)) @ chol.T
    eps = rng_eps.standard_normal(total) * np.sqrt(noise_var)
    y = np.einsum("ij,ij->i", x, gamma0_t) + eps
    return TimeSeries(x, y)


def gen_example2d(
    n: int,
    seed: int,
    noise_var: float = 0.25,
    n_regimes: int = 10,
    adapt_len: int = 0,
) -> tuple:
    """Two-dimensional rotated model with a one-dimensional drifting component.

    The covariate covariance has eigenvalues drawn uniformly from [0, 1]
    (piecewise constant over ``n_regimes`` segments) in a basis rotated
    clockwise by 30 degrees; the true coefficient drifts along one rotated
    axis and is constant along the other. If ``adapt_len`` > 0, a test
    segment with a sinusoidal drift (disjoint from the historical range)
    is appended; the ground truth covers all rows.
    """
    if n < 4:
        raise DataError(f"need n >= 4, got {n}")
    ss = np.random.SeedSequence(int(seed))
    ch_regime, ch_x, ch_eps = (np.random.Generator(np.random.Philox(c)) for c in ss.spawn(3))
    u = ROT30
    total = n + adapt_len
    regimes = tuple(_segment_bounds(total, min(n_regimes, total)))
    eigs = ch_regime.uniform(0.0, 1.0, size=(len(regimes), 2))
    sigmas = tuple(u @ np.diag(e) @ u.T for e in eigs)

    t = np.arange(1, n + 1, dtype=float)
    hist = np.column_stack(
        [
            1.5 * math.sqrt(3.0) + 1.0 - math.sqrt(3.0) * t / n,
            t / n - 1.5 + math.sqrt(3.0),
        ]
    )
    if adapt_len:
        s = np.arange(1, adapt_len + 1, dtype=float) / adapt_len
        wave = 1.5 * s * np.sin(s + 1.0) ** 2
        test = np.column_stack(
            [
                1.0 + 0.5 * math.sqrt(3.0) - math.sqrt(3.0) * wave,
                math.sqrt(3.0) - 0.5 + wave,
            ]
        )
        gamma0_t = np.vstack([hist, test])
    else:
        gamma0_t = hist
    nv = np.full(total, float(noise_var))
    ts = _draw_series(ch_x, ch_eps, regimes, sigmas, gamma0_t, nv)
    gt = GroundTruth(
        u_true=u,
        gamma0_t=gamma0_t,
        sigmas=sigmas,
        regimes=regimes,
        noise_var=nv,
        dims=(1, 1),
        beta_inv_true=np.array([1.0, math.sqrt(3.0)]),
        inv_coords=(1,),
        res_coords=(0,),
    )
    return ts, gt


def _parse_schedule(schedule: str):
    if schedule in ("sin", "sin-low"):
        return schedule, None
    if schedule.startswith("const:"):
        try:
            values = [float(v) for v in schedule[len("const:") :].split(",") if v != ""]
        except ValueError:
            raise DataError(f"bad schedule {schedule!r}") from None
        if not values:
            raise DataError(f"bad schedule {schedule!r}: no values")
        return "const", values
    raise DataError(
        f"unknown schedule {schedule!r} (expected 'sin', 'sin-low' or 'const:v1,v2,...')"
    )


def _varying_path(kind, values, n):
    """Per-time values of the drifting coordinates, one column per coordinate."""
    out = np.empty((n, len(MAIN_RES_COORDS)))
    if kind == "const":
        bounds = _segment_bounds(n, len(values))
        for (start, end), value in zip(bounds, values):
            out[start:end] = value
        return out
    s = np.arange(1, n + 1, dtype=float) / n
    for col, idx in enumerate(MAIN_SIN_INDICES):
        wave = np.sin(idx * s + idx) ** 2
        if kind == "sin":
            out[:, col] = 1.0 - 1.5 * s * wave
        else:  # sin-low
            out[:, col] = 0.5 - s * wave
    return out


def _main_like(
    n: int,
    seed: int,
    schedule: str,
    noise_var: float,
    n_regimes: int,
    quick: bool = False,
    n_center_changes: int = 20,
) -> tuple:
    if n < 100:
        raise DataError(f"need n >= 100, got {n}")
    kind, values = _parse_schedule(schedule)
    ss = np.random.SeedSequence(int(seed))
    ch_basis, ch_regime, ch_x, ch_eps, ch_coef = (
        np.random.Generator(np.random.Philox(c)) for c in ss.spawn(5)
    )
    u = random_orthogonal(MAIN_P, ch_basis)

    if kind == "const":
        segments = len(values)
    else:
        segments = n_regimes
    regimes = tuple(_segment_bounds(n, segments))
    res_set = set(MAIN_RES_COORDS)
    sigmas = []
    for _ in regimes:
        tilde = np.zeros((MAIN_P, MAIN_P))
        offset = 0
        for dim in MAIN_BLOCK_DIMS:
            block = random_spd_block(dim, ch_regime)
            if offset in res_set:
                block = block * MAIN_RES_BLOCK_SCALE
            tilde[offset : offset + dim, offset : offset + dim] = block
            offset += dim
        sigmas.append(u @ tilde @ u.T)
    sigmas = tuple(0.5 * (s + s.T) for s in sigmas)

    coords = np.full((n, MAIN_P), MAIN_CONST_VALUE)
    if quick:
        centers = ch_coef.uniform(0.0, 1.2, size=(n_center_changes, len(MAIN_RES_COORDS)))
        bounds = _segment_bounds(n, n_center_changes)
        path = np.empty((n, len(MAIN_RES_COORDS)))
        for (start, end), center in zip(bounds, centers):
            path[start:end] = center + ch_coef.uniform(
                -0.5, 0.5, size=(end - start, len(MAIN_RES_COORDS))
            )
    else:
        path = _varying_path(kind, values, n)
    coords[:, list(MAIN_RES_COORDS)] = path
    gamma0_t = coords @ u.T

    nv = np.full(n, float(noise_var))
    ts = _draw_series(ch_x, ch_eps, regimes, sigmas, gamma0_t, nv)
    mask = np.zeros(MAIN_P)
    mask[list(MAIN_INV_COORDS)] = MAIN_CONST_VALUE
    gt = GroundTruth(
        u_true=u,
        gamma0_t=gamma0_t,
        sigmas=sigmas,
        regimes=regimes,
        noise_var=nv,
        dims=(len(MAIN_INV_COORDS), len(MAIN_RES_COORDS)),
        beta_inv_true=u @ mask,
        inv_coords=MAIN_INV_COORDS,
        res_coords=MAIN_RES_COORDS,
    )
    return ts, gt


def gen_main(
    n: int,
    seed: int,
    schedule: str = "sin",
    noise_var: float = 0.64,
    n_regimes: int = 10,
) -> tuple:
    """Ten-dimensional block model: four hidden blocks of sizes 2, 4, 3, 1
    under a random rotation, covariances redrawn over ``n_regimes`` segments.

    Seven coordinates of the (unrotated) coefficient stay at 0.2; the three
    coordinates in the size-2 and size-1 blocks follow the schedule:
    ``"sin"`` (slow sinusoidal drift, values within [-0.25, 1]), ``"sin-low"``
    (a lower-amplitude variant), or ``"const:v1,...,vk"`` (piecewise constant
    over k equal segments, one covariance regime per segment). The same seed
    yields the same rotation across schedules, so historical and test
    segments pair up.
    """
    return _main_like(n, seed, schedule, noise_var, n_regimes)


def gen_quick_varying(
    n: int,
    seed: int,
    noise_var: float = 0.64,
    n_regimes: int = 10,
    n_center_changes: int = 20,
) -> tuple:
    """Like ``gen_main`` but the three drifting coordinates are redrawn at
    every time step: uniform in a width-1 interval around centers sampled in
    [0, 1.2] that change ``n_center_changes`` times over the horizon."""
    return _main_like(
        n,
        seed,
        "sin",
        noise_var,
        n_regimes,
        quick=True,
        n_center_changes=n_center_changes,
    )
