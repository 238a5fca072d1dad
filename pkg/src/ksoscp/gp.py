"""Homoscedastic Gaussian-process pre-training and the constant-width baseline.

The GP supplies the mean-kernel lengthscales and the RKHS radius ``s`` used
by the kernel SoS problem, and doubles as the split-conformal baseline with
absolute-residual scores.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.stats import qmc

from .conformal import ConstantScale, calibrate
from .exceptions import FitFailed
from .kernels import KernelSpec, gram_matrix
from .search import pattern_search

log = logging.getLogger(__name__)

__all__ = [
    "GpModel",
    "gp_log_marginal_likelihood",
    "gp_fit",
    "default_bounds",
    "gp_rkhs_norm_sq",
    "gp_predict_mean",
    "mean_kernel_and_radius",
    "baseline_constant_band",
]

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GpModel:
    kernel: KernelSpec
    nugget: float
    alpha: np.ndarray
    train_x: np.ndarray
    log_marginal_likelihood: float

    def predict_mean(self, x):
        return gp_predict_mean(self, x)

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "nugget": self.nugget,
            "alpha": self.alpha.tolist(),
            "train_x": self.train_x.tolist(),
            "log_marginal_likelihood": self.log_marginal_likelihood,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(KernelSpec.from_dict(d["kernel"]), float(d["nugget"]),
                   np.asarray(d["alpha"], dtype=float),
                   np.asarray(d["train_x"], dtype=float),
                   float(d["log_marginal_likelihood"]))


def _factor(data, kernel, nugget):
    K = gram_matrix(data.X, data.X, kernel)
    K[np.diag_indices_from(K)] += nugget
    return K, sla.cho_factor(K, lower=True)


def gp_log_marginal_likelihood(data, kernel, nugget):
    """Log evidence of ``Y`` under ``N(0, K + nugget I)``.

    Raises ``numpy.linalg.LinAlgError`` when the covariance cannot be factorized.
    """
    if nugget <= 0:
        raise ValueError("nugget must be positive")
    _, cf = _factor(data, kernel, nugget)
    y = data.Y
    a = sla.cho_solve(cf, y)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    return float(-0.5 * y @ a - 0.5 * logdet - 0.5 * y.size * LOG_2PI)


def default_bounds(data):
    """Log-space box: lengthscales, variance, nugget (in that order)."""
    rng_x = np.ptp(data.X, axis=0)
    rng_x = np.where(rng_x > 0, rng_x, 1.0)
    vy = float(np.var(data.Y))
    vy = vy if vy > 0 else 1.0
    lower = np.r_[np.log(1e-2 * rng_x), np.log(1e-3 * vy), np.log(1e-6 * vy)]
    upper = np.r_[np.log(1e2 * rng_x), np.log(1e3 * vy), np.log(10.0 * vy)]
    return lower, upper


def _unpack(z, d):
    return KernelSpec(tuple(np.exp(z[:d])), float(np.exp(z[d]))), float(np.exp(z[d + 1]))


def gp_fit(data, bounds=None, n_starts=8, seed=0, min_step=1e-3):
    """Maximum-likelihood GP fit by multi-start pattern search in log space.

    Starts are a Latin hypercube over ``bounds``; every likelihood evaluation
    is tracked and the overall best candidate is returned.
    """
    if data.n < 2:
        raise ValueError("gp_fit needs at least two points")
    d = data.d
    lower, upper = bounds if bounds is not None else default_bounds(data)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("bounds must be finite")

    def objective(z):
        kernel, nugget = _unpack(z, d)
        try:
            return gp_log_marginal_likelihood(data, kernel, nugget)
        except (np.linalg.LinAlgError, ValueError):
            return None

    starts = qmc.scale(qmc.LatinHypercube(d=d + 2, seed=seed).random(n_starts),
                       lower, upper)
    best_z, best_val = None, -np.inf
    for z0 in starts:
        history = []
        pattern_search(objective, z0, lower, upper, min_step=min_step, history=history)
        for z, val in history:
            if val > best_val:
                best_z, best_val = z, val
    if best_z is None:
        raise FitFailed("no likelihood evaluation succeeded")
    kernel, nugget = _unpack(best_z, d)
    _, cf = _factor(data, kernel, nugget)
    alpha = sla.cho_solve(cf, data.Y)
    log.debug("gp_fit: lengthscales=%s variance=%.4g nugget=%.4g lml=%.4f",
              kernel.lengthscales, kernel.variance, nugget, best_val)
    return GpModel(kernel, nugget, alpha, data.X.copy(), float(best_val))


def gp_rkhs_norm_sq(model):
    """Squared RKHS norm ``alpha^T K alpha`` of the posterior mean."""
    K = gram_matrix(model.train_x, model.train_x, model.kernel)
    return float(max(model.alpha @ K @ model.alpha, 0.0))


def gp_predict_mean(model, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1 and x.size == model.train_x.shape[1]
    x = x.reshape(1, -1) if single else (x[:, None] if x.ndim == 1 else x)
    mu = gram_matrix(x, model.train_x, model.kernel) @ model.alpha
    return float(mu[0]) if single else mu


def mean_kernel_and_radius(model):
    """Unit-variance mean kernel and matching radius ``s``.

    The posterior mean lives in the RKHS of ``variance * k1``; measured in
    the RKHS of ``k1`` its squared norm picks up a factor ``variance``. Both
    parameterizations describe the same feasible set of mean functions.
    """
    unit = KernelSpec(model.kernel.lengthscales, 1.0)
    return unit, model.kernel.variance * gp_rkhs_norm_sq(model)


def baseline_constant_band(model, calib, alpha_level):
    """Homoscedastic split band ``m_GP(x) +/- q_hat`` from absolute residuals."""
    return calibrate(ConstantScale(model), calib, alpha_level, kind="absolute")
