"""Command-line entry point ``ksos``.

Exit codes: 0 success, 1 usage or input error, 2 solver not converged in
strict mode, 3 a self-check (``gradcheck``) exceeded its tolerance.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import artifacts as io
from .conformal import calibrate
from .config import parse_int_list, resolve_config
from .datasets import generate_case
from .dual import ProblemTemplate, build_problem, dual_gradient, dual_objective, solve_dual
from .exceptions import ConfigError, KsosError, NotConverged
from .gp import baseline_constant_band, gp_fit, mean_kernel_and_radius
from .hsic import default_folds, tune_lengthscale
from .kernels import KernelSpec
from .metrics import evaluate_metrics
from .pipeline import (evaluate_methods, fixed_theta, run_pipeline, solver_config,
                       split_data, theta_bounds, tuning_solver_config)

log = logging.getLogger("ksoscp")

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_CHECK_FAILED = 0, 1, 2, 3

BENCH_COLUMNS = ["case", "seed", "method", "status", "mean_width", "mi", "r2_sqi",
                 "marginal_cov", "mean_local_cov", "local_cov_dev", "theta_f",
                 "solve_seconds", "iterations", "converged", "q_hat"]

# CLI flag -> dotted config key
_FLAG_KEYS = {
    "case": "case_id", "n": "n", "m": "m", "d": "d", "seed": "seed", "out": "output",
    "a": "hyper.a", "b": "hyper.b", "lambda1": "hyper.lambda1", "lambda2": "hyper.lambda2",
    "lr": "solver.learning_rate", "momentum": "solver.momentum",
    "max_iter": "solver.max_iter", "tol": "solver.tol",
    "folds": "tuning.folds", "budget": "tuning.budget", "theta_f": "tuning.theta_f",
    "alpha": "metrics.alpha", "n_X": "metrics.n_X", "n_Y": "metrics.n_Y",
    "n_test": "metrics.n_test", "seeds": "bench.seeds", "cases": "bench.cases",
    "methods": "bench.methods", "jobs": "bench.jobs",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p):
    p.add_argument("--config", help="flat 'section.key = value' config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. solver.tol=1e-3")
    p.add_argument("--case", type=int)
    p.add_argument("--n", type=int, help="pre-training size")
    p.add_argument("--m", type=int, help="calibration size")
    p.add_argument("--d", type=int, help="input dimension")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--lr", type=float, help="solver learning rate")
    p.add_argument("--momentum", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--tol", type=float, help="solver tolerance")
    p.add_argument("--strict", action="store_true", default=None,
                   help="exit 2 when the solver does not converge")
    p.add_argument("--folds", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--theta-f", dest="theta_f", help="fixed scale lengthscales (comma list)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--n-X", dest="n_X", type=int)
    p.add_argument("--n-Y", dest="n_Y", type=int)
    p.add_argument("--n-test", dest="n_test", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="ksos", allow_abbrev=False,
                     description="Split conformal prediction with kernel "
                                 "sum-of-squares scale functions.")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("simulate", allow_abbrev=False,
                       help="write a synthetic dataset CSV and meta JSON")
    _common(p)
    p.add_argument("--output-csv", help="dataset path (default OUT/data.csv)")

    p = sub.add_parser("tune", allow_abbrev=False,
                       help="HSIC tuning of the scale lengthscales")
    _common(p)
    p.add_argument("--data", help="pre-training CSV (default: generated)")

    p = sub.add_parser("fit", allow_abbrev=False,
                       help="GP pre-training plus dual solve; writes model.json")
    _common(p)
    p.add_argument("--data", help="pre-training CSV (default: generated)")
    p.add_argument("--tuned", help="tune.json from the tune command")

    p = sub.add_parser("calibrate", allow_abbrev=False,
                       help="compute q_hat on a calibration set")
    _common(p)
    p.add_argument("--model", required=True, help="model.json")
    p.add_argument("--calib", help="calibration CSV (default: generated)")
    p.add_argument("--method", choices=["ksos", "gp"], default="ksos")

    p = sub.add_parser("evaluate", allow_abbrev=False,
                       help="metrics JSON and band CSV for a calibrated model")
    _common(p)
    p.add_argument("--calibrated", required=True, help="calibrated.json")
    p.add_argument("--test", help="test CSV (default: generated)")

    p = sub.add_parser("pipeline", allow_abbrev=False,
                       help="GP fit, tuning, solve, calibration, evaluation")
    _common(p)

    p = sub.add_parser("bench", allow_abbrev=False,
                       help="pipeline over seeds x cases, aggregated CSV")
    _common(p)
    p.add_argument("--seeds", help="e.g. 0-19 or 0,3,5")
    p.add_argument("--cases", help="e.g. 1,2")
    p.add_argument("--methods", help="subset of ksos,gp")
    p.add_argument("--jobs", type=int, help="worker processes (fallback KSOS_JOBS)")

    p = sub.add_parser("gradcheck", allow_abbrev=False,
                       help="finite-difference check of the dual gradient")
    _common(p)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--check-tol", dest="check_tol", type=float, default=1e-5)
    return parser


def _resolve(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    for flag, key in _FLAG_KEYS.items():
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "strict", None):
        overrides["solver.strict"] = True
    if args.command in ("tune", "fit", "pipeline", "bench") and args.theta_f:
        overrides["tuning.enabled"] = False
    cfg = resolve_config(args.config, overrides)
    if cfg.case_id not in (1, 2, 3, 4, 5):
        raise ConfigError(f"unsupported case {cfg.case_id}")
    return cfg


def _out(cfg, name):
    return os.path.join(cfg.output, name)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg, args):
    data = generate_case(cfg.case_id, cfg.n, cfg.d, cfg.seed)
    path = args.output_csv or _out(cfg, "data.csv")
    io.write_dataset(path, data)
    meta_path = os.path.splitext(path)[0] + ".meta.json"
    io.write_json(meta_path, {"meta": data.meta, "config": cfg.to_dict()})
    print(f"wrote {path} ({data.n} rows) and {meta_path}")
    return EXIT_OK


def _train_data(cfg, args):
    if getattr(args, "data", None):
        return io.read_dataset(args.data)
    return split_data(cfg)[0]


def _template(cfg, train):
    gp = gp_fit(train, seed=cfg.seed)
    kernel_m, s = mean_kernel_and_radius(gp)
    h = cfg.hyper
    return gp, ProblemTemplate(kernel_m, s, h.a, h.b, h.lambda1, h.lambda2)


def cmd_tune(cfg, args):
    train = _train_data(cfg, args)
    gp, template = _template(cfg, train)
    res = tune_lengthscale(train, template, theta_bounds(cfg, train),
                           cfg.tuning.folds or default_folds(train.n), cfg.tuning.budget,
                           cfg.seed, tuning_solver_config(cfg), cfg.tuning.n_boot)
    res.write_csv(_out(cfg, "tune_curve.csv"))
    io.write_json(_out(cfg, "tune.json"), {**res.to_dict(), "config": cfg.to_dict()})
    print(f"theta_f = {', '.join(repr(t) for t in res.best_lengthscale)} "
          f"(HSIC {res.best_hsic:.6g}, {res.evaluations} evaluations)")
    return EXIT_OK


def _choose_theta(cfg, args, train, template):
    if getattr(args, "tuned", None):
        return tuple(io.read_json(args.tuned)["best_lengthscale"])
    if cfg.tuning.enabled and not cfg.tuning.theta_f:
        res = tune_lengthscale(train, template, theta_bounds(cfg, train),
                               cfg.tuning.folds or default_folds(train.n),
                               cfg.tuning.budget, cfg.seed, tuning_solver_config(cfg),
                               cfg.tuning.n_boot)
        return res.best_lengthscale
    return fixed_theta(cfg, train)


def _report_solve(model):
    d = model.diagnostics
    print(f"solve: {d['status']} after {d['iterations']} iterations, "
          f"gap {d['final_gap']:.3g}, max violation {d['max_violation']:.3g}, "
          f"{d['solve_seconds']:.3f}s")


def cmd_fit(cfg, args):
    train = _train_data(cfg, args)
    gp, template = _template(cfg, train)
    theta_f = _choose_theta(cfg, args, train, template)
    _, model = solve_dual(template.build(train, theta_f), solver_config(cfg))
    _report_solve(model)
    io.write_json(_out(cfg, "model.json"),
                  io.model_artifact(model, gp, theta_f, cfg.to_dict()))
    print(f"wrote {_out(cfg, 'model.json')}")
    return EXIT_OK


def cmd_calibrate(cfg, args):
    art = io.read_json(args.model)
    model, gp, _ = io.load_model_artifact(art)
    calib = io.read_dataset(args.calib) if args.calib else split_data(cfg)[1]
    if args.method == "ksos":
        cal = calibrate(model, calib, cfg.metrics.alpha)
    else:
        cal = baseline_constant_band(gp, calib, cfg.metrics.alpha)
    io.write_json(_out(cfg, "calibrated.json"),
                  io.calibrated_artifact(cal, args.method, art, cfg.to_dict()))
    print(f"q_hat = {cal.q_hat!r} ({args.method}, m = {cal.calib_size})")
    return EXIT_OK


def _band_rows(cal, X):
    order = np.lexsort(X.T[::-1])
    X = X[order]
    mu = cal.base.predict_mean(X)
    lo, hi = cal.predict_interval(X)
    return [list(x) + [m, a, b] for x, m, a, b in zip(X, mu, lo, hi)]


def _write_band(path, cal, X):
    d = X.shape[1]
    header = ["x"] if d == 1 else [f"x_{j + 1}" for j in range(d)]
    io.write_csv(path, header + ["m_hat", "lo", "hi"], _band_rows(cal, X))


def cmd_evaluate(cfg, args):
    cal, method, _ = io.load_calibrated(args.calibrated)
    test = io.read_dataset(args.test) if args.test else split_data(cfg)[2]
    m = cfg.metrics
    report = evaluate_metrics(cal, cfg.case_id, test, m.n_X, m.n_Y, m.mi_k,
                              m.sqi_bins, cfg.seed)
    io.write_json(_out(cfg, "metrics.json"),
                  {"method": method, **report.to_dict(), "config": cfg.to_dict()})
    _write_band(_out(cfg, "band.csv"), cal, test.X)
    print(f"{method}: mean width {report.mean_width:.4g}, marginal coverage "
          f"{report.marginal_coverage:.4g}, mean local coverage "
          f"{report.mean_local_coverage:.4g}")
    return EXIT_OK


def cmd_pipeline(cfg, args):
    train, calib, test = split_data(cfg)
    res = run_pipeline(cfg, (train, calib))
    _report_solve(res.model)
    io.write_dataset(_out(cfg, "train.csv"), train)
    io.write_dataset(_out(cfg, "calib.csv"), calib)
    if res.tune is not None:
        res.tune.write_csv(_out(cfg, "tune_curve.csv"))
    art = io.model_artifact(res.model, res.gp, res.theta_f, cfg.to_dict())
    io.write_json(_out(cfg, "model.json"), art)
    io.write_json(_out(cfg, "calibrated.json"),
                  io.calibrated_artifact(res.calibrated, "ksos", art, cfg.to_dict()))
    reports = evaluate_methods(cfg, res, test)
    io.write_json(_out(cfg, "metrics.json"), {
        "theta_f": list(res.theta_f), "q_hat": res.calibrated.q_hat,
        "baseline_q_hat": res.baseline.q_hat, "timings": res.timings,
        "diagnostics": res.model.diagnostics,
        "methods": {k: v.to_dict() for k, v in reports.items()},
        "config": cfg.to_dict()})
    _write_band(_out(cfg, "band.csv"), res.calibrated, train.X)
    print(f"theta_f = {', '.join(repr(t) for t in res.theta_f)}; "
          f"q_hat = {res.calibrated.q_hat!r}")
    for k, v in reports.items():
        print(f"{k}: mean width {v.mean_width:.4g}, marginal coverage "
              f"{v.marginal_coverage:.4g}, mean local coverage {v.mean_local_coverage:.4g}")
    return EXIT_OK


def _bench_job(job):
    """One (seed, case) pipeline; never raises, failures become status rows."""
    cfg, methods = job
    base = {"case": cfg.case_id, "seed": cfg.seed}
    try:
        train, calib, test = split_data(cfg)
        res = run_pipeline(cfg, (train, calib))
        reports = evaluate_methods(cfg, res, test, methods)
    except (KsosError, ValueError, np.linalg.LinAlgError) as exc:
        status = f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")
        return [dict(base, method=m, status=status) for m in methods], [], []
    diag = res.model.diagnostics
    rows, local = [], []
    for name in methods:
        r = reports[name]
        cal = res.calibrated if name == "ksos" else res.baseline
        rows.append(dict(
            base, method=name, status="ok", mean_width=r.mean_width,
            mi=r.mutual_information, r2_sqi=r.r2_sqi, marginal_cov=r.marginal_coverage,
            mean_local_cov=r.mean_local_coverage,
            local_cov_dev=r.local_coverage_deviation(1.0 - cfg.metrics.alpha),
            theta_f=";".join(repr(t) for t in res.theta_f) if name == "ksos" else None,
            solve_seconds=diag["solve_seconds"] if name == "ksos" else None,
            iterations=diag["iterations"] if name == "ksos" else None,
            converged=diag["converged"] if name == "ksos" else None, q_hat=cal.q_hat))
        local.extend([cfg.case_id, cfg.seed, name, j, c]
                     for j, c in enumerate(r.local_coverage_samples))
    timing = [[cfg.case_id, cfg.seed, cfg.n, diag["solve_seconds"], diag["iterations"],
               diag["converged"], res.timings.get("gp_seconds"),
               res.timings.get("tune_seconds")]]
    return rows, local, timing


def _jobs(cfg):
    if cfg.bench.jobs > 0:
        return cfg.bench.jobs
    env = os.environ.get("KSOS_JOBS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError as exc:
            raise ConfigError(f"KSOS_JOBS must be an integer, got {env!r}") from exc
    return 1


def run_bench(cfg):
    """Rows for every (seed, case, method), in seed-major, case, method order."""
    from .config import apply_overrides
    seeds = parse_int_list(cfg.bench.seeds)
    cases = parse_int_list(cfg.bench.cases)
    methods = [m.strip() for m in cfg.bench.methods.split(",") if m.strip()]
    for m in methods:
        if m not in ("ksos", "gp"):
            raise ConfigError(f"unknown method {m!r}")
    jobs = [(apply_overrides(cfg, {"seed": s, "case_id": c}), methods)
            for s in seeds for c in cases]
    workers = _jobs(cfg)
    if workers == 1 or len(jobs) == 1:
        results = [_bench_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_bench_job, jobs))
    rows, local, timing = [], [], []
    for r, lc, t in results:
        rows.extend(r)
        local.extend(lc)
        timing.extend(t)
    return rows, local, timing


def cmd_bench(cfg, args):
    t0 = time.perf_counter()
    rows, local, timing = run_bench(cfg)
    io.write_csv(_out(cfg, "bench.csv"), BENCH_COLUMNS,
                 ([r.get(c) for c in BENCH_COLUMNS] for r in rows))
    io.write_csv(_out(cfg, "local_coverage.csv"),
                 ["case", "seed", "method", "location", "coverage"], local)
    io.write_csv(_out(cfg, "timings.csv"),
                 ["case", "seed", "n", "solve_seconds", "iterations", "converged",
                  "gp_seconds", "tune_seconds"], timing)
    io.write_json(_out(cfg, "bench.meta.json"), {"config": cfg.to_dict()})
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"bench: {len(rows)} rows ({failed} failed) in "
          f"{time.perf_counter() - t0:.1f}s -> {_out(cfg, 'bench.csv')}")
    return EXIT_OK


def _central_difference(fun, z, rel_step=1e-6):
    g = np.empty_like(z)
    for i in range(z.size):
        h = rel_step * (1.0 + abs(z[i]))
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (fun(z + e) - fun(z - e)) / (2.0 * h)
    return g


def gradient_check(n=20, seed=0, points=50, case_id=1, a=0.0, b=10.0):
    """Worst relative error of the analytic dual gradient over random interior points."""
    data = generate_case(case_id, n, 1, seed, stream="gradcheck")
    prob = build_problem(data, KernelSpec((0.5,)), KernelSpec((0.4,)), s=1.0, a=a, b=b)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        z = np.r_[rng.uniform(0.05, 1.0, n) / n * 10, rng.uniform(0.1, 2.0)]
        g = dual_gradient(z, prob)
        fd = _central_difference(lambda v: dual_objective(v, prob), z)
        worst = max(worst, float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-300)))
    return worst


def cmd_gradcheck(cfg, args):
    err = gradient_check(cfg.n if args.n is not None else 20, cfg.seed, args.points,
                         cfg.case_id, cfg.hyper.a, cfg.hyper.b)
    ok = err <= args.check_tol
    print(f"max relative error {err:.3e} over {args.points} points "
          f"({'PASS' if ok else 'FAIL'} at {args.check_tol:g})")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


COMMANDS = {
    "simulate": cmd_simulate, "tune": cmd_tune, "fit": cmd_fit,
    "calibrate": cmd_calibrate, "evaluate": cmd_evaluate, "pipeline": cmd_pipeline,
    "bench": cmd_bench, "gradcheck": cmd_gradcheck,
}


def run_command(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg, args)
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (ConfigError, ValueError, KsosError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run_command())
