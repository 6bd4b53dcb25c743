"""Command-line surface: simulate | fit | adapt | benchmark.

Every output embeds the exact run configuration and the package version, and
reruns with an identical configuration reproduce identical numeric content.
Exit codes: 0 success, 2 configuration/data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager

import numpy as np

from . import __version__
from .ajd import uwedge
from .dataset import TimeSeries, load_csv, make_windows, write_csv
from .decomposition import (
    cross_validate_lambda,
    invariance_scores,
    split_subspaces,
)
from .estimators import (
    IsdModel,
    fit_adaptation,
    fit_invariant,
    magging,
    pooled_ols,
    predict,
    rolling_ols,
)
from .exceptions import DataError, IsdError, NumericalError
from .jbd import select_blocks
from .metrics import cumulative_xv, mspe, r_squared
from .moments import weighted_gamma, window_moments
from .simulate import gen_example2d, gen_main, gen_quick_varying, oracle_split

GENERATORS = {
    "example2d": gen_example2d,
    "main": gen_main,
    "quick": gen_quick_varying,
}

TIDY_COLUMNS = ("estimator", "seed", "n", "m", "metric", "value")


@contextmanager
def _stage(name):
    """Tag package errors with the pipeline stage they came from."""
    try:
        yield
    except IsdError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc


def _json_dump(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_tidy_csv(path, rows, config):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(TIDY_COLUMNS)
        for row in rows:
            writer.writerow(row)


def _fmt(value):
    return repr(float(value))


def _parse_seeds(spec: str):
    if "," in spec:
        return [int(s) for s in spec.split(",") if s != ""]
    count = int(spec)
    if count < 1:
        raise DataError(f"need at least one seed, got {spec!r}")
    return list(range(count))


def _parse_int_list(spec: str):
    values = [int(s) for s in spec.split(",") if s != ""]
    if not values:
        raise DataError(f"empty sweep list: {spec!r}")
    return values


def run_fit_pipeline(
    ts: TimeSeries,
    k: int = 25,
    w: int | None = None,
    scheme: str = "equally_spaced",
    lam: float | None = None,
    use_cv: bool = False,
    folds: int = 10,
    d: int | None = None,
    t_se: float = 1.0,
    gamma_mode: str = "plain",
    intercept_tol: float = 0.1,
    split_override=None,
):
    """Full estimation pipeline: windows -> moments -> joint diagonalization
    -> block selection -> invariance scores -> threshold -> invariant fit.

    Returns ``(model, info)`` where ``info`` carries the intermediate
    artifacts and diagnostics. ``split_override`` skips the subspace
    estimation and fits on the provided split (oracle runs).
    """
    if w is None:
        w = max(ts.p + 2, ts.n // 8)
    with _stage("windows"):
        plan = make_windows(ts.n, k, w=w if scheme == "equally_spaced" else None, scheme=scheme)
    with _stage("moments"):
        moments = window_moments(ts, plan)
    info = {"plan": plan, "moments": moments}
    if split_override is not None:
        split = split_override
        info.update(bd=None, scores=None, lam=split.lam)
    else:
        sigmas = [m.sigma_hat for m in moments]
        with _stage("ajd"):
            # normalize the demixer against the mean window covariance so the
            # residual-profile entries are scale-comparable across windows
            diag = uwedge([np.mean(sigmas, axis=0)] + sigmas)
        with _stage("block-selection"):
            bd = select_blocks(diag, sigmas)
        with _stage("invariance-scores"):
            gamma_bar = weighted_gamma(moments, mode=gamma_mode)
            scores = invariance_scores(ts, plan, bd, gamma_bar)
        with _stage("lambda-selection"):
            if use_cv:
                lam = cross_validate_lambda(
                    ts, plan, bd, scores, folds=folds, d=d, t_se=t_se
                )
            elif lam is None:
                raise DataError("provide --lambda or enable --cv")
        split = split_subspaces(scores, bd, lam)
        info.update(bd=bd, scores=scores, lam=lam)
    with _stage("invariant-fit"):
        model = fit_invariant(ts, split, moments=moments, intercept_tol=intercept_tol)
    return model, info


def _pipeline_kwargs(args, ts):
    return dict(
        k=args.k,
        w=args.w,
        scheme=args.scheme,
        lam=args.lam,
        use_cv=args.cv,
        folds=args.folds,
        d=args.d,
        t_se=args.t_se,
        gamma_mode=args.gamma_mode,
    )


def _generate(generator, n, seed, schedule, noise_var, adapt_len=0):
    gen = GENERATORS[generator]
    if generator == "example2d":
        kwargs = {"adapt_len": adapt_len}
        if noise_var is not None:
            kwargs["noise_var"] = noise_var
        return gen(n, seed, **kwargs)
    kwargs = {}
    if noise_var is not None:
        kwargs["noise_var"] = noise_var
    if generator == "main":
        kwargs["schedule"] = schedule
    return gen(n, seed, **kwargs)


def cmd_simulate(args) -> int:
    config = {
        "command": "simulate",
        "generator": args.generator,
        "n": args.n,
        "seed": args.seed,
        "schedule": args.schedule,
        "noise_var": args.noise_var,
        "adapt_len": args.adapt_len,
    }
    with _stage("simulate"):
        ts, gt = _generate(
            args.generator, args.n, args.seed, args.schedule, args.noise_var, args.adapt_len
        )
    csv_path = args.out + ".csv"
    truth_path = args.out + ".truth.json"
    write_csv(ts, csv_path)
    _json_dump(truth_path, {"version": __version__, "config": config, "truth": gt.to_json()})
    print(f"wrote {csv_path} ({ts.n} rows, p={ts.p}) and {truth_path}")
    return 0


def _load_dataset(args):
    x_cols = args.x_cols.split(",") if args.x_cols else None
    with _stage("load"):
        if x_cols is None:
            with open(args.data, encoding="utf-8") as fh:
                header = fh.readline().strip()
            if not header:
                raise DataError(f"empty file: {args.data}")
            names = [h.strip() for h in header.split(",")]
            if args.y_col not in names:
                raise DataError(f"missing column(s) [{args.y_col!r}] in {args.data}")
            x_cols = [c for c in names if c != args.y_col]
        return load_csv(args.data, x_cols, args.y_col)


def _load_truth(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    from .simulate import GroundTruth

    return GroundTruth.from_json(payload["truth"])


def cmd_fit(args) -> int:
    config = {
        "command": "fit",
        "data": args.data,
        "K": args.k,
        "w": args.w,
        "scheme": args.scheme,
        "lambda": args.lam,
        "cv": args.cv,
        "folds": args.folds,
        "d": args.d,
        "t_se": args.t_se,
        "gamma_mode": args.gamma_mode,
        "oracle_split": args.oracle_split,
    }
    ts = _load_dataset(args)
    split_override = None
    if args.oracle_split:
        if not args.truth:
            raise DataError("--oracle-split requires --truth")
        split_override = oracle_split(_load_truth(args.truth))
    model, info = run_fit_pipeline(ts, split_override=split_override, **_pipeline_kwargs(args, ts))
    diagnostics = {
        "lambda": info["lam"],
        "dims": list(model.split.dims),
    }
    if info["bd"] is not None:
        diagnostics.update(
            block_dims=list(info["bd"].dims),
            tau_star=info["bd"].tau_star,
            objective=info["bd"].objective,
            mean_abs=info["scores"].mean_abs.tolist(),
        )
    payload = {
        "version": __version__,
        "config": config,
        "model": model.to_json(),
        "diagnostics": diagnostics,
    }
    _json_dump(args.out, payload)
    print(
        f"wrote {args.out}: dims={model.split.dims}, lambda={info['lam']}, "
        f"intercept_mode={model.intercept_mode}"
    )
    return 0


def cmd_adapt(args) -> int:
    config = {
        "command": "adapt",
        "data": args.data,
        "model": args.model,
        "m": args.m,
    }
    ts = _load_dataset(args)
    with _stage("model"):
        with open(args.model, encoding="utf-8") as fh:
            model = IsdModel.from_json(json.load(fh)["model"])
    m = args.m
    dim_res = model.split.dims[1]
    if m < dim_res + 2:
        raise DataError(f"m={m} < dim_res + 2 = {dim_res + 2}")
    if ts.n <= m:
        raise DataError(f"test series has {ts.n} rows; need more than m={m}")

    gt = _load_truth(args.truth) if args.truth else None
    beta_for_isd = model.beta_inv
    if args.oracle_beta:
        if gt is None:
            raise DataError("--oracle-beta requires --truth")
        beta_for_isd = gt.beta_inv_true
        model = IsdModel(
            split=model.split,
            beta_inv=beta_for_isd,
            intercept_mode=model.intercept_mode,
            gamma0=model.gamma0,
            pooled=model.pooled,
        )

    rows = []
    preds_isd, preds_ols, actual = [], [], []
    mspe_isd, mspe_ols = [], []
    p = ts.p
    for t_star in range(m, ts.n):
        window = ts.window(t_star - m, t_star)
        with _stage("adaptation"):
            fit = fit_adaptation(window, model)
        x_star = ts.x[t_star]
        y_star = float(ts.y[t_star])
        pred_isd = float(predict(fit.gamma_isd, fit.intercept, x_star))
        try:
            coef_ols, b0_ols = rolling_ols(window)
            pred_ols = float(predict(coef_ols, b0_ols, x_star))
            feasible = 1
        except (DataError, NumericalError):
            coef_ols = np.full(p, np.nan)
            pred_ols = float("nan")
            feasible = 0
        row = [
            t_star,
            _fmt(y_star),
            _fmt(pred_isd),
            _fmt((y_star - pred_isd) ** 2),
            feasible,
            _fmt(pred_ols),
            _fmt((y_star - pred_ols) ** 2),
        ]
        row += [_fmt(v) for v in fit.gamma_isd] + [_fmt(v) for v in coef_ols]
        rows.append(row)
        preds_isd.append(pred_isd)
        preds_ols.append(pred_ols)
        actual.append(y_star)
        if gt is not None:
            sigma = gt.sigma_at(t_star)
            gamma0_t = gt.gamma0_t[t_star]
            mspe_isd.append(mspe(fit.gamma_isd, gamma0_t, sigma))
            if feasible:
                mspe_ols.append(mspe(coef_ols, gamma0_t, sigma))

    header = (
        ["t_star", "y", "pred_isd", "se_isd", "ols_feasible", "pred_ols", "se_ols"]
        + [f"gamma_isd_{j}" for j in range(p)]
        + [f"gamma_ols_{j}" for j in range(p)]
    )
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)

    actual = np.asarray(actual)
    centered = actual - actual.mean()
    summary = {
        "version": __version__,
        "config": config,
        "steps": len(rows),
        "cum_xv_isd": float(cumulative_xv(np.asarray(preds_isd) - actual.mean(), centered)[-1]),
        "mean_se_isd": float(np.mean((actual - np.asarray(preds_isd)) ** 2)),
    }
    finite_ols = np.isfinite(preds_ols)
    if np.all(finite_ols):
        summary["cum_xv_ols"] = float(
            cumulative_xv(np.asarray(preds_ols) - actual.mean(), centered)[-1]
        )
        summary["mean_se_ols"] = float(np.mean((actual - np.asarray(preds_ols)) ** 2))
    else:
        summary["ols_infeasible_steps"] = int(np.sum(~finite_ols))
    if gt is not None:
        summary["mean_mspe_isd"] = float(np.mean(mspe_isd))
        if mspe_ols:
            summary["mean_mspe_ols"] = float(np.mean(mspe_ols))
    _json_dump(args.out + ".summary.json", summary)
    print(f"wrote {args.out} ({len(rows)} steps) and {args.out}.summary.json")
    return 0


def _bench_fit(ts, cfg):
    model, info = run_fit_pipeline(
        ts,
        k=cfg["K"],
        w=cfg["w"],
        scheme=cfg["scheme"],
        lam=cfg["lambda"],
        use_cv=cfg["cv"],
        folds=cfg["folds"],
        d=cfg["d"],
        t_se=cfg["t_se"],
    )
    return model, info


def _gen_for_bench(cfg, n, seed, schedule=None):
    return _generate(
        cfg["generator"], n, seed, schedule or cfg["schedule"], cfg["noise_var"]
    )


def _cell_invariant_error(payload):
    cfg, n, seed = payload
    ts, gt = _gen_for_bench(cfg, n, seed)
    rows = []
    model, info = _bench_fit(ts, cfg)
    err = float(np.sum((model.beta_inv - gt.beta_inv_true) ** 2))
    rows.append(("isd", seed, n, "", "mse_beta_inv", err))
    rows.append(("isd", seed, n, "", "dim_inv", float(model.split.dims[0])))
    dims_ok = sorted(info["bd"].dims) == sorted((2, 4, 3, 1)) if info["bd"] else False
    rows.append(("isd", seed, n, "", "block_dims_match", float(dims_ok)))
    rows.append(("isd", seed, n, "", "lambda", float(info["lam"])))
    oracle = fit_invariant(ts, oracle_split(gt))
    err_o = float(np.sum((oracle.beta_inv - gt.beta_inv_true) ** 2))
    rows.append(("isd_oracle_split", seed, n, "", "mse_beta_inv", err_o))
    return rows


def _cell_zero_shot(payload):
    cfg, n, seed = payload
    ts, gt = _gen_for_bench(cfg, n, seed)
    test_ts, test_gt = _gen_for_bench(cfg, cfg["test_len"], seed, schedule="const:-1")
    model, info = _bench_fit(ts, cfg)
    plan_test = make_windows(test_ts.n, 5, scheme="contiguous")
    moments = info["moments"]
    pooled = model.pooled
    coef_ols, b0_ols = pooled_ols(ts)
    beta_mm = magging([m.gamma_hat for m in moments], pooled.var_x_bar)
    b0_mm = pooled.mean_y - float(pooled.mean_x @ beta_mm)
    b0_oracle = pooled.mean_y - float(pooled.mean_x @ gt.beta_inv_true)
    rows = []
    for name, coef, b0 in (
        ("isd", model.beta_inv, model.gamma0),
        ("pooled_ols", coef_ols, b0_ols),
        ("magging", beta_mm, b0_mm),
        ("oracle_beta", gt.beta_inv_true, b0_oracle),
    ):
        rows.append((name, seed, n, "", "r2_test", r_squared(coef, b0, test_ts, plan_test)))
    return rows


def _cell_adaptation(payload):
    cfg, m, seed = payload
    n = cfg["n"]
    ts, gt = _gen_for_bench(cfg, n, seed)
    test_ts, test_gt = _gen_for_bench(cfg, cfg["test_len"], seed, schedule="const:-0.5,-2")
    model, _ = _bench_fit(ts, cfg)
    oracle_model = fit_invariant(ts, oracle_split(gt))
    rows = []
    errs = {"isd": [], "rolling_ols": [], "isd_oracle_split": []}
    for t_star in range(m, test_ts.n):
        window = test_ts.window(t_star - m, t_star)
        sigma = test_gt.sigma_at(t_star)
        gamma0_t = test_gt.gamma0_t[t_star]
        fit = fit_adaptation(window, model)
        errs["isd"].append(mspe(fit.gamma_isd, gamma0_t, sigma))
        fit_o = fit_adaptation(window, oracle_model)
        errs["isd_oracle_split"].append(mspe(fit_o.gamma_isd, gamma0_t, sigma))
        try:
            coef, _b0 = rolling_ols(window)
            errs["rolling_ols"].append(mspe(coef, gamma0_t, sigma))
        except (DataError, NumericalError):
            pass
    for name, values in errs.items():
        if values:
            rows.append((name, seed, n, m, "mspe", float(np.mean(values))))
        else:
            rows.append((name, seed, n, m, "mspe", float("nan")))
    return rows


_CELL_RUNNERS = {
    "invariant-error": _cell_invariant_error,
    "zero-shot": _cell_zero_shot,
    "adaptation-mspe": _cell_adaptation,
}


def cmd_benchmark(args) -> int:
    cfg = {
        "command": "benchmark",
        "task": args.task,
        "generator": args.generator,
        "schedule": args.schedule,
        "noise_var": args.noise_var,
        "n": args.n,
        "K": args.k,
        "w": args.w,
        "scheme": args.scheme,
        "lambda": args.lam,
        "cv": args.cv,
        "folds": args.folds,
        "d": args.d,
        "t_se": args.t_se,
        "test_len": args.test_len,
        "seeds": args.seeds,
        "jobs": args.jobs,
    }
    seeds = _parse_seeds(args.seeds)
    if args.task == "adaptation-mspe":
        if not args.m:
            raise DataError("adaptation-mspe sweeps --m (comma-separated list)")
        sweep = _parse_int_list(args.m)
    else:
        if not args.n:
            raise DataError(f"{args.task} sweeps --n (comma-separated list)")
        sweep = _parse_int_list(args.n)
        cfg["n"] = None
    if args.task == "adaptation-mspe":
        cfg["n"] = int(args.n) if args.n else 6000

    payloads = [(cfg, value, seed) for value in sweep for seed in seeds]
    runner = _CELL_RUNNERS[args.task]
    rows = []
    failures = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(runner, payloads))
        for payload, result in zip(payloads, results):
            rows.extend(result)
    else:
        for payload in payloads:
            try:
                rows.extend(runner(payload))
            except IsdError as exc:
                failures.append((payload[1], payload[2], str(exc)))
                rows.append(("failed", payload[2], payload[1], "", "error", float("nan")))
    rows.sort(key=lambda r: (str(r[4]), str(r[2]), str(r[3]), int(r[1]), str(r[0])))
    _write_tidy_csv(args.out, rows, cfg)
    print(f"wrote {args.out} ({len(rows)} rows, {len(failures)} failed cells)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isd",
        description="Invariant/residual subspace estimation for time-varying linear models",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset + ground truth")
    sim.add_argument("--generator", choices=sorted(GENERATORS), required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--schedule", default="sin", help="main generator: sin | sin-low | const:v1,v2,...")
    sim.add_argument("--noise-var", dest="noise_var", type=float, default=None)
    sim.add_argument("--adapt-len", dest="adapt_len", type=int, default=0)
    sim.add_argument("--out", required=True, help="output path prefix")
    sim.set_defaults(func=cmd_simulate)

    def add_fit_options(p):
        p.add_argument("--K", dest="k", type=int, default=25)
        p.add_argument("--w", type=int, default=None)
        p.add_argument("--scheme", choices=("contiguous", "equally_spaced"), default="equally_spaced")
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--cv", action="store_true")
        p.add_argument("--folds", type=int, default=10)
        p.add_argument("--d", type=int, default=None)
        p.add_argument("--t-se", dest="t_se", type=float, default=1.0)
        p.add_argument("--gamma-mode", dest="gamma_mode", choices=("plain", "variance_weighted"), default="plain")

    fit = sub.add_parser("fit", help="estimate the subspace split and invariant component")
    fit.add_argument("--data", required=True)
    fit.add_argument("--x-cols", dest="x_cols", default=None, help="comma-separated covariate columns")
    fit.add_argument("--y-col", dest="y_col", default="y")
    add_fit_options(fit)
    fit.add_argument("--oracle-split", dest="oracle_split", action="store_true")
    fit.add_argument("--truth", default=None, help="ground-truth sidecar for oracle modes")
    fit.add_argument("--out", required=True)
    fit.set_defaults(func=cmd_fit)

    adapt = sub.add_parser("adapt", help="slide an adaptation window through test data")
    adapt.add_argument("--data", required=True)
    adapt.add_argument("--x-cols", dest="x_cols", default=None)
    adapt.add_argument("--y-col", dest="y_col", default="y")
    adapt.add_argument("--model", required=True)
    adapt.add_argument("--m", type=int, required=True)
    adapt.add_argument("--truth", default=None)
    adapt.add_argument("--oracle-beta", dest="oracle_beta", action="store_true")
    adapt.add_argument("--out", required=True)
    adapt.set_defaults(func=cmd_adapt)

    bench = sub.add_parser("benchmark", help="sweep (n or m) x seeds into a tidy CSV")
    bench.add_argument("--task", choices=sorted(_CELL_RUNNERS), required=True)
    bench.add_argument("--generator", choices=("main", "quick"), default="main")
    bench.add_argument("--schedule", default="sin")
    bench.add_argument("--noise-var", dest="noise_var", type=float, default=None)
    bench.add_argument("--n", default=None, help="n sweep list, or historical n for adaptation-mspe")
    bench.add_argument("--m", default=None, help="m sweep list (adaptation-mspe)")
    bench.add_argument("--seeds", default="20", help="seed count or comma-separated list")
    bench.add_argument("--test-len", dest="test_len", type=int, default=None)
    add_fit_options(bench)
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("--out", required=True)
    bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "benchmark" and args.test_len is None:
        args.test_len = 250 if args.task == "zero-shot" else 2000
    if getattr(args, "command", None) == "fit" and not args.cv and args.lam is None and not args.oracle_split:
        parser.error("fit requires --lambda, --cv, or --oracle-split")
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
