"""Adaptivity and coverage metrics for prediction bands."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .conformal import scores as conformity_scores
from .datasets import oracle_band, rng_stream, sample_x, sample_y

__all__ = [
    "MetricsReport",
    "OracleBand",
    "mean_width",
    "mutual_information_knn",
    "r2_sqi",
    "local_coverage",
    "marginal_coverage",
    "evaluate_metrics",
]


class OracleBand:
    """The exact conditional band of a test case, usable wherever a calibrated model is."""

    def __init__(self, case_id, alpha_level):
        self.case_id = case_id
        self.alpha_level = alpha_level

    def predict_interval(self, x):
        return oracle_band(self.case_id, x, self.alpha_level)


def mean_width(lo, hi=None):
    """Average of ``hi - lo``; ``lo`` may also be a ``(T, 2)`` array of intervals."""
    if hi is None:
        iv = np.asarray(lo, dtype=float).reshape(-1, 2)
        lo, hi = iv[:, 0], iv[:, 1]
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    if lo.size == 0:
        raise ValueError("no intervals")
    if np.any(hi < lo):
        raise ValueError("interval with hi < lo")
    w = hi - lo
    if np.any(np.isinf(w)):
        return float("inf")
    return float(np.mean(w))


def mutual_information_knn(u, v, k=3):
    """Kraskov k-nearest-neighbour MI estimate (first variant), in nats.

    Distances use the max-norm in the joint space; marginal neighbours are
    counted strictly inside the k-th neighbour distance. Negative estimates
    are clipped to zero.
    """
    u = np.asarray(u, dtype=float)
    u = u[:, None] if u.ndim == 1 else u
    v = np.asarray(v, dtype=float).reshape(-1, 1)
    M = u.shape[0]
    if v.shape[0] != M:
        raise ValueError("u and v must have the same number of samples")
    if not 1 <= k < M:
        raise ValueError("need 1 <= k < M")
    joint = np.hstack([u, v])
    if np.all(np.ptp(joint, axis=0) == 0):
        raise ValueError("all points are identical")
    dist, _ = cKDTree(joint).query(joint, k=k + 1, p=np.inf)
    eps = np.nextafter(dist[:, -1], 0)
    nu = cKDTree(u).query_ball_point(u, eps, p=np.inf, return_length=True) - 1
    nv = cKDTree(v).query_ball_point(v, eps, p=np.inf, return_length=True) - 1
    mi = digamma(k) + digamma(M) - np.mean(digamma(nu + 1) + digamma(nv + 1))
    return float(max(mi, 0.0))


def r2_sqi(abs_residuals, widths, alpha_level=0.1, n_bins=50):
    """Determination coefficient between binned widths and residual quantiles.

    Test points are sorted by width and cut into ``n_bins`` equal-count
    groups (ties keep input order). Each group contributes its median width
    and the ``1 - alpha`` quantile of its absolute residuals. The median
    widths are regressed on the residual quantiles through the origin and
    ``1 - SS_res / SS_tot`` is returned, with ``SS_tot`` taken about the mean
    median width. Proportional inputs give 1; constant widths with varying
    residual quantiles give a negative value (``-inf`` when the widths are
    exactly equal).
    """
    r = np.abs(np.asarray(abs_residuals, dtype=float).ravel())
    w = np.asarray(widths, dtype=float).ravel()
    if r.size != w.size:
        raise ValueError("abs_residuals and widths must have the same length")
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    if r.size < 2 * n_bins:
        raise ValueError(f"need at least {2 * n_bins} points for {n_bins} bins")
    order = np.argsort(w, kind="stable")
    groups = np.array_split(order, n_bins)
    q = np.array([np.quantile(r[g], 1.0 - alpha_level) for g in groups])
    med = np.array([np.median(w[g]) for g in groups])
    denom = q @ q
    beta = (q @ med) / denom if denom > 0 else 0.0
    ss_res = float(np.sum((med - beta * q) ** 2))
    ss_tot = float(np.sum((med - med.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else float("-inf")
    return 1.0 - ss_res / ss_tot


def _d_of(cal, default=1):
    base = getattr(cal, "base", None)
    train_x = getattr(base, "train_x", None)
    if train_x is None:
        train_x = getattr(getattr(base, "mean_model", None), "train_x", None)
    return train_x.shape[1] if train_x is not None else default


def local_coverage(cal, case_id, n_X=100, n_Y=1000, seed=0, d=None):
    """Per-location coverage from ``n_Y`` fresh responses at ``n_X`` random inputs."""
    if n_X < 1 or n_Y < 1:
        raise ValueError("n_X and n_Y must be positive")
    d = d or _d_of(cal)
    X = sample_x(case_id, n_X, d, rng_stream(seed, "locations"))
    Y = sample_y(case_id, X, rng_stream(seed, "local-draws"), size=n_Y)
    lo, hi = cal.predict_interval(X)
    inside = (Y >= lo[:, None]) & (Y <= hi[:, None])
    return inside.mean(axis=1)


def marginal_coverage(cal, test):
    if test.n == 0:
        raise ValueError("test set is empty")
    lo, hi = cal.predict_interval(test.X)
    return float(np.mean((test.Y >= lo) & (test.Y <= hi)))


@dataclass
class MetricsReport:
    mean_width: float
    mutual_information: float
    r2_sqi: float | None
    local_coverage_samples: np.ndarray
    marginal_coverage: float
    timings: dict = field(default_factory=dict)

    @property
    def mean_local_coverage(self):
        return float(np.mean(self.local_coverage_samples))

    def local_coverage_deviation(self, target):
        """Mean absolute distance of local coverage to ``target``."""
        return float(np.mean(np.abs(np.asarray(self.local_coverage_samples) - target)))

    def to_dict(self):
        d = asdict(self)
        d["local_coverage_samples"] = np.asarray(self.local_coverage_samples).tolist()
        d["mean_local_coverage"] = self.mean_local_coverage
        return d

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def evaluate_metrics(cal, case_id, test, n_X=100, n_Y=1000, mi_k=3, sqi_bins=50,
                     seed=0):
    """Every metric for one calibrated model on one test set."""
    lo, hi = cal.predict_interval(test.X)
    widths = hi - lo
    base = cal.base
    mu = base.predict_mean(test.X)
    s = conformity_scores(base, test.X, test.Y, cal.score_kind)
    r2 = None
    if np.all(np.isfinite(widths)) and test.n >= 2 * sqi_bins:
        r2 = r2_sqi(np.abs(test.Y - mu), widths, cal.alpha_level, sqi_bins)
    return MetricsReport(
        mean_width=mean_width(lo, hi),
        mutual_information=mutual_information_knn(test.X, s, mi_k),
        r2_sqi=r2,
        local_coverage_samples=local_coverage(cal, case_id, n_X, n_Y, seed, test.d),
        marginal_coverage=marginal_coverage(cal, test),
    )
