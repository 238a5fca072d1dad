"""End-to-end split-conformal procedure with a learned kernel SoS scale.

1. fit a homoscedastic GP on the pre-training set to get the mean lengthscales
   and the RKHS radius ``s``;
2. tune the scale lengthscales by cross-validated HSIC (or take them fixed);
3. solve the dual on the whole pre-training set and recover ``(m, f)``;
4. calibrate ``q_hat`` on a disjoint calibration set.

Pre-training, calibration and test sets come from independent named streams
of the same root seed.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .conformal import CalibratedModel, calibrate
from .config import RunConfig, parse_float_list
from .datasets import generate_case
from .dual import ProblemTemplate, SolverConfig, solve_dual
from .gp import baseline_constant_band, gp_fit, mean_kernel_and_radius
from .hsic import default_folds, default_theta_bounds, tune_lengthscale
from .metrics import evaluate_metrics

log = logging.getLogger(__name__)

__all__ = [
    "PipelineResult",
    "split_data",
    "solver_config",
    "tuning_solver_config",
    "theta_bounds",
    "fixed_theta",
    "run_pipeline",
    "evaluate_methods",
]


@dataclass
class PipelineResult:
    train: object
    calib: object
    gp: object
    template: ProblemTemplate
    theta_f: tuple
    model: object
    calibrated: CalibratedModel
    baseline: CalibratedModel
    tune: object = None
    timings: dict = field(default_factory=dict)


def split_data(cfg):
    """Independent pre-training, calibration and test draws."""
    train = generate_case(cfg.case_id, cfg.n, cfg.d, cfg.seed, stream="train")
    calib = generate_case(cfg.case_id, cfg.m, cfg.d, cfg.seed, stream="calib")
    test = generate_case(cfg.case_id, cfg.metrics.n_test, cfg.d, cfg.seed, stream="test")
    return train, calib, test


def solver_config(cfg):
    s = cfg.solver
    return SolverConfig(learning_rate=s.learning_rate, momentum=s.momentum,
                        max_iter=s.max_iter, tol_constraints=s.tol, tol_gap=s.tol,
                        check_every=s.check_every, strict=s.strict, seed=cfg.seed)


def tuning_solver_config(cfg):
    s, t = cfg.solver, cfg.tuning
    return SolverConfig(learning_rate=s.learning_rate, momentum=s.momentum,
                        max_iter=t.max_iter, tol_constraints=t.tol, tol_gap=t.tol,
                        check_every=s.check_every, seed=cfg.seed)


def theta_bounds(cfg, train):
    lo, hi = default_theta_bounds(train)
    if cfg.tuning.theta_lo:
        lo = np.broadcast_to(parse_float_list(cfg.tuning.theta_lo), lo.shape)
    if cfg.tuning.theta_hi:
        hi = np.broadcast_to(parse_float_list(cfg.tuning.theta_hi), hi.shape)
    return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


def fixed_theta(cfg, train):
    if cfg.tuning.theta_f:
        vals = parse_float_list(cfg.tuning.theta_f)
        return tuple(float(v) for v in np.broadcast_to(vals, (train.d,)))
    # tuning disabled without explicit values: geometric centre of the box
    lo, hi = theta_bounds(cfg, train)
    return tuple(float(v) for v in np.sqrt(lo * hi))


def run_pipeline(cfg: RunConfig, data=None):
    """Fit, tune, solve and calibrate on one seed.

    ``data`` may supply ``(train, calib)``; otherwise both are generated.
    """
    timings = {}
    if data is None:
        train, calib, _ = split_data(cfg)
    else:
        train, calib = data
    t = time.perf_counter()
    gp = gp_fit(train, seed=cfg.seed)
    timings["gp_seconds"] = time.perf_counter() - t
    kernel_m, s = mean_kernel_and_radius(gp)
    h = cfg.hyper
    template = ProblemTemplate(kernel_m, s, h.a, h.b, h.lambda1, h.lambda2)

    tune = None
    if cfg.tuning.enabled and not cfg.tuning.theta_f:
        t = time.perf_counter()
        tune = tune_lengthscale(train, template, theta_bounds(cfg, train),
                                cfg.tuning.folds or default_folds(train.n),
                                cfg.tuning.budget, cfg.seed, tuning_solver_config(cfg),
                                cfg.tuning.n_boot)
        timings["tune_seconds"] = time.perf_counter() - t
        theta_f = tune.best_lengthscale
    else:
        theta_f = fixed_theta(cfg, train)

    prob = template.build(train, theta_f)
    _, model = solve_dual(prob, solver_config(cfg))
    timings["solve_seconds"] = model.diagnostics["solve_seconds"]
    alpha = cfg.metrics.alpha
    cal = calibrate(model, calib, alpha)
    base = baseline_constant_band(gp, calib, alpha)
    log.info("case %d seed %d: theta_f=%s q_hat=%.4g converged=%s", cfg.case_id,
             cfg.seed, theta_f, cal.q_hat, model.diagnostics["converged"])
    return PipelineResult(train, calib, gp, template, tuple(theta_f), model, cal, base,
                          tune, timings)


def evaluate_methods(cfg, result, test, methods=("ksos", "gp")):
    """Metrics for each requested method on ``test``; keyed by method name."""
    m = cfg.metrics
    cals = {"ksos": result.calibrated, "gp": result.baseline}
    out = {}
    for name in methods:
        if name not in cals:
            raise ValueError(f"unknown method {name!r}")
        out[name] = evaluate_metrics(cals[name], cfg.case_id, test, m.n_X, m.n_Y,
                                     m.mi_k, m.sqi_bins, cfg.seed)
    return out
