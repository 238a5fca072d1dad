"""Seeded synthetic heteroscedastic regression benchmarks.

Each case is ``Y = m(X) + sigma(X) * eps``:

====  ==========================  ============================  ===============  ========
case  m(x)                        sigma(x)                      X                eps
====  ==========================  ============================  ===============  ========
1     piecewise sinusoid          sqrt(0.1 + 2 x^2)             U[-1, 1]         N(0, 1)
2     0.5 * sum(x)                sum(|sin x|)                  N(0, I_d)        N(0, 1)
3     0.5 * sum(x)                sum(4/3 phi(2 x / 3))         N(0, I_d)        N(0, 1)
4     2 sin(pi b.x) + pi b.x      sqrt(1 + (b.x)^2)             U[0, 1]^d        N(0, 1)
5     sin(2 x)                    0.5 + 2 x                     U[-1, 1]         Exp(1)
====  ==========================  ============================  ===============  ========
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

__all__ = [
    "Dataset",
    "CASES",
    "rng_stream",
    "generate_case",
    "sample_x",
    "sample_y",
    "mean_function",
    "noise_scale",
    "oracle_band",
    "default_dim",
]

CASES = (1, 2, 3, 4, 5)
CASE4_BETA5 = np.array([1.0, 0.1, 0.1, 0.1, 0.1])


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.Y = np.asarray(self.Y, dtype=float).ravel()
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError(
                f"X has {self.X.shape[0]} rows but Y has {self.Y.shape[0]}")

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.Y[idx], dict(self.meta))

    def __len__(self):
        return self.n


def rng_stream(seed, name):
    """Independent generator for the named consumer of a root seed.

    The stream key is a CRC of the name, so adding a new consumer never
    shifts the draws of an existing one.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(key,))))


def default_dim(case_id):
    return 1


def _check(case_id, d):
    if case_id not in CASES:
        raise ValueError(f"unsupported case {case_id!r}; expected one of {CASES}")
    if case_id in (1, 5) and d != 1:
        raise ValueError(f"case {case_id} is one-dimensional, got d={d}")
    if d < 1:
        raise ValueError("d must be positive")


def _beta(d):
    if d == 1:
        return np.array([1.0])
    if d == 5:
        return CASE4_BETA5
    # other dimensions: leading coordinate dominant, others 0.1
    return np.r_[1.0, np.full(d - 1, 0.1)]


def mean_function(case_id, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    d = X.shape[1]
    _check(case_id, d)
    if case_id == 1:
        x = X[:, 0]
        z = 10.0 * x + 1.0
        smooth = np.sin(np.pi * (2 * x + 0.2)) + 0.2 * np.cos(4 * np.pi * (2 * x + 0.2))
        return np.where(z <= 9.6, smooth, x - 0.9)
    if case_id in (2, 3):
        return 0.5 * X.sum(axis=1)
    if case_id == 4:
        t = X @ _beta(d)
        return 2.0 * np.sin(np.pi * t) + np.pi * t
    return np.sin(2.0 * X[:, 0])


def noise_scale(case_id, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    d = X.shape[1]
    _check(case_id, d)
    if case_id == 1:
        return np.sqrt(0.1 + 2.0 * X[:, 0] ** 2)
    if case_id == 2:
        return np.abs(np.sin(X)).sum(axis=1)
    if case_id == 3:
        return (4.0 / 3.0 * stats.norm.pdf(2.0 * X / 3.0)).sum(axis=1)
    if case_id == 4:
        t = X @ _beta(d)
        return np.sqrt(1.0 + t ** 2)
    return 0.5 + 2.0 * X[:, 0]


def sample_x(case_id, size, d, rng):
    _check(case_id, d)
    if case_id in (1, 5):
        return rng.uniform(-1.0, 1.0, size=(size, 1))
    if case_id in (2, 3):
        return rng.standard_normal((size, d))
    return rng.uniform(0.0, 1.0, size=(size, d))


def _noise(case_id, size, rng):
    if case_id == 5:
        return rng.exponential(1.0, size=size)
    return rng.standard_normal(size)


def sample_y(case_id, X, rng, size=None):
    """Draw responses at fixed inputs.

    With ``size`` given, returns an array of shape ``(len(X), size)`` holding
    ``size`` independent draws per input row.
    """
    m = mean_function(case_id, X)
    sig = noise_scale(case_id, X)
    if size is None:
        return m + sig * _noise(case_id, m.shape[0], rng)
    eps = _noise(case_id, (m.shape[0], size), rng)
    return m[:, None] + sig[:, None] * eps


def generate_case(case_id, n, d=1, seed=0, stream="generate"):
    """Deterministic draw of ``n`` pairs from the given test case."""
    _check(case_id, d)
    if n < 1:
        raise ValueError("n must be positive")
    rng = rng_stream(seed, f"{stream}/case{case_id}")
    X = sample_x(case_id, n, d, rng)
    Y = sample_y(case_id, X, rng)
    meta = {"case_id": int(case_id), "seed": int(seed), "n": int(n), "d": int(d),
            "stream": stream}
    if case_id == 4:
        meta["beta"] = _beta(d).tolist()
    return Dataset(X, Y, meta)


def oracle_band(case_id, x, alpha_level):
    """Exact conditional ``1 - alpha`` band at inputs ``x``.

    Gaussian cases use the central band ``m +/- z sigma``. Case 5 uses the
    equal-tailed interval of the shifted exponential law, which is not
    symmetric around ``m``. Returns two arrays ``(lo, hi)``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m = mean_function(case_id, x)
    sig = noise_scale(case_id, x)
    if case_id == 5:
        lo_q = stats.expon.ppf(alpha_level / 2.0)
        hi_q = stats.expon.ppf(1.0 - alpha_level / 2.0)
        a = m + sig * lo_q
        b = m + sig * hi_q
        return np.minimum(a, b), np.maximum(a, b)
    z = stats.norm.ppf(1.0 - alpha_level / 2.0)
    return m - z * sig, m + z * sig
