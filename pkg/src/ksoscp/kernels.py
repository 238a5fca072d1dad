"""Squared-exponential kernels, Cholesky factors and symmetric-matrix helpers.

Everything here is a pure function of its inputs. Kernel matrices follow the
convention ``K[i, j] = k(a_i, b_j)`` and the upper Cholesky factor satisfies
``K + jitter * I = V.T @ V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .exceptions import NotPositiveDefinite

__all__ = [
    "KernelSpec",
    "GramFactorization",
    "gram_matrix",
    "cholesky_upper",
    "feature_map",
    "positive_part",
    "psd_norms",
    "symmetrize",
]

JITTER_START = 1e-12
JITTER_CAP = 1e-4
JITTER_GROWTH = 10.0


@dataclass(frozen=True)
class KernelSpec:
    """ARD squared-exponential kernel ``variance * exp(-0.5 * sum(((a - b) / l)**2))``."""

    lengthscales: tuple
    variance: float = 1.0
    family: str = "squared-exponential"

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if ls.ndim != 1 or ls.size == 0:
            raise ValueError("lengthscales must be a non-empty vector")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise ValueError(f"lengthscales must be positive and finite, got {ls}")
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise ValueError(f"variance must be positive, got {self.variance}")
        if self.family != "squared-exponential":
            raise ValueError(f"unsupported kernel family {self.family!r}")
        object.__setattr__(self, "lengthscales", tuple(float(v) for v in ls))
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def dim(self):
        return len(self.lengthscales)

    def with_lengthscales(self, lengthscales):
        return KernelSpec(tuple(np.atleast_1d(lengthscales)), self.variance, self.family)

    def to_dict(self):
        return {
            "family": self.family,
            "lengthscales": list(self.lengthscales),
            "variance": self.variance,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["lengthscales"]), float(d.get("variance", 1.0)),
                   d.get("family", "squared-exponential"))


@dataclass(frozen=True)
class GramFactorization:
    K: np.ndarray
    V: np.ndarray
    jitter_used: float = 0.0
    # V.T @ V, i.e. the Gram matrix the factor actually represents
    K_jittered: np.ndarray = field(repr=False, default=None)

    @property
    def n(self):
        return self.K.shape[0]


def _as_points(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"points must be a 2-D array, got shape {x.shape}")
    return x


def gram_matrix(points_a, points_b, spec):
    """Cross-kernel matrix between two point sets.

    Parameters
    ----------
    points_a : array-like of shape (p, d)
    points_b : array-like of shape (q, d)
    spec : KernelSpec

    Returns
    -------
    ndarray of shape (p, q)
    """
    a = _as_points(points_a)
    b = _as_points(points_b)
    ls = np.asarray(spec.lengthscales)
    if a.shape[1] != ls.size or b.shape[1] != ls.size:
        raise ValueError(
            f"dimension mismatch: points have {a.shape[1]} and {b.shape[1]} "
            f"columns but the kernel has {ls.size} lengthscales")
    a = a / ls
    b = b / ls
    sq = (np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :]
          - 2.0 * a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    out = spec.variance * np.exp(-0.5 * sq)
    if points_a is points_b:
        out = symmetrize(out)
        np.fill_diagonal(out, spec.variance)
    return out


def symmetrize(S):
    S = np.asarray(S, dtype=float)
    return 0.5 * (S + S.T)


def cholesky_upper(K, jitter_start=JITTER_START, jitter_cap=JITTER_CAP,
                   growth=JITTER_GROWTH):
    """Upper Cholesky factor with geometric jitter escalation.

    The first attempt uses no jitter. On failure the jitter starts at
    ``jitter_start * mean(diag(K))`` and grows by ``growth`` until it
    would exceed ``jitter_cap * mean(diag(K))``.

    Raises
    ------
    NotPositiveDefinite
        If the factorization fails at the cap.
    """
    K = symmetrize(K)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("K must be square")
    scale = float(np.mean(np.diag(K))) if K.size else 1.0
    if not np.isfinite(scale) or scale <= 0:
        raise NotPositiveDefinite("Gram matrix has a non-positive mean diagonal")
    eye = np.eye(K.shape[0])
    jitters = [0.0]
    rel = jitter_start
    while rel <= jitter_cap * (1 + 1e-9):
        jitters.append(rel * scale)
        rel *= growth
    for jitter in jitters:
        Kj = K + jitter * eye if jitter else K
        try:
            V = sla.cholesky(Kj, lower=False, check_finite=True)
        except sla.LinAlgError:
            continue
        if np.all(np.diag(V) > 0):
            return GramFactorization(K=K, V=V, jitter_used=float(jitter), K_jittered=Kj)
    raise NotPositiveDefinite(
        f"Cholesky failed with jitter up to {jitter_cap:g} x mean diagonal; "
        "inputs are probably duplicated")


def feature_map(fact, k_x):
    """Empirical feature map ``Phi(x) = V^{-T} k_x`` by triangular solve.

    ``k_x`` may be an n-vector or an (n, q) matrix of stacked columns.
    """
    return sla.solve_triangular(fact.V, np.asarray(k_x, dtype=float),
                                trans="T", lower=False)


def positive_part(S):
    """Spectral positive part ``U max(0, D) U^T`` of a symmetric matrix."""
    S = symmetrize(S)
    if not np.all(np.isfinite(S)):
        raise np.linalg.LinAlgError("positive_part: non-finite input")
    w, U = np.linalg.eigh(S)
    w = np.maximum(w, 0.0)
    return symmetrize((U * w) @ U.T)


def psd_norms(A):
    """Nuclear norm (trace, for PSD input) and squared Frobenius norm."""
    A = np.asarray(A, dtype=float)
    return float(np.trace(A)), float(np.sum(A * A))
