"""Split-conformal calibration of a learned mean/scale pair.

Scores are squared normalized residuals ``(y - m(x))^2 / f(x)`` and the
interval is ``m(x) +/- sqrt(q_hat f(x))``. Because the adjusted empirical
quantile commutes with the monotone map ``t -> t^2`` on the non-negative
reals, this gives the same band as the absolute score
``|y - m(x)| / sqrt(f(x))`` with half-width ``q_abs sqrt(f(x))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CalibratedModel",
    "ConstantScale",
    "score",
    "scores",
    "adjusted_quantile",
    "calibrate",
    "predict_interval",
]


class ConstantScale:
    """Adapter giving any mean predictor the scale ``f(x) = 1``.

    With absolute scores this is the classical constant-width split band.
    """

    f_floor = 1.0

    def __init__(self, mean_model):
        self.mean_model = mean_model

    def predict_mean(self, x):
        return np.atleast_1d(self.mean_model.predict_mean(x))

    def predict_scale(self, x):
        return np.ones_like(self.predict_mean(x), dtype=float)


def scores(model, X, Y, kind="squared"):
    """Vectorized conformity scores.

    ``kind="squared"`` gives ``(y - m)^2 / max(f, floor)``; ``kind="absolute"``
    gives ``|y - m| / sqrt(max(f, floor))``.
    """
    Y = np.asarray(Y, dtype=float).ravel()
    r = Y - model.predict_mean(X)
    f = np.maximum(model.predict_scale(X), model.f_floor)
    if kind == "squared":
        return r * r / f
    if kind == "absolute":
        return np.abs(r) / np.sqrt(f)
    raise ValueError(f"unknown score kind {kind!r}")


def score(model, x, y):
    """Squared normalized residual of a single pair."""
    return float(scores(model, np.atleast_2d(np.asarray(x, dtype=float)), [y])[0])


def adjusted_quantile(values, alpha_level):
    """``ceil((1 - alpha)(m + 1))``-th smallest value, or ``inf`` past the end.

    Ties are resolved by taking the order statistic itself, no interpolation.
    """
    v = np.sort(np.asarray(values, dtype=float).ravel())
    m = v.size
    if m == 0:
        raise ValueError("cannot take a quantile of an empty score set")
    if not 0.0 < alpha_level < 1.0:
        raise ValueError("alpha_level must lie in (0, 1)")
    # the product is rounded before ceil so that 0.9 * 20 gives 18, not 19
    k = math.ceil(round((1.0 - alpha_level) * (m + 1), 9))
    return math.inf if k > m else float(v[k - 1])


@dataclass(frozen=True)
class CalibratedModel:
    """Base predictor plus its calibrated score quantile.

    ``q_hat`` is on the scale of ``score_kind``: a squared-score quantile for
    ``"squared"`` and an absolute one for ``"absolute"``.
    """

    base: object
    q_hat: float
    alpha_level: float
    calib_size: int
    score_kind: str = "squared"

    @property
    def is_unbounded(self):
        return math.isinf(self.q_hat)

    def half_width(self, x):
        f = np.maximum(self.base.predict_scale(x), 0.0)
        if self.is_unbounded:
            return np.full(f.shape, np.inf)
        if self.score_kind == "squared":
            return np.sqrt(self.q_hat * f)
        return self.q_hat * np.sqrt(f)

    def predict_interval(self, x):
        mu = self.base.predict_mean(x)
        h = self.half_width(x)
        return mu - h, mu + h


def calibrate(model, calib, alpha_level, kind="squared"):
    """Compute ``q_hat`` on a calibration set disjoint from the training data.

    Disjointness is the caller's responsibility.
    """
    if calib.n == 0:
        raise ValueError("calibration set is empty")
    s = scores(model, calib.X, calib.Y, kind)
    return CalibratedModel(model, adjusted_quantile(s, alpha_level), float(alpha_level),
                           int(calib.n), kind)


def predict_interval(cal, x):
    """``(lo, hi)`` arrays; the whole real line when ``q_hat`` is infinite."""
    return cal.predict_interval(x)
