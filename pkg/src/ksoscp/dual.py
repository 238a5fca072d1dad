"""Dual solver for the regularized kernel sum-of-squares band problem.

Primal problem, for pre-training data ``(X_i, Y_i)``::

    min_{gamma, A >= 0}  a/n sum (Y_i - m(X_i))^2 + b/n sum f_A(X_i)
                         + lambda1 tr(A) + lambda2 ||A||_F^2
    s.t.                 f_A(X_i) >= (Y_i - m(X_i))^2,   gamma^T K^m gamma <= s

with ``m(x) = gamma^T k^m_x`` and ``f_A(x) = Phi(x)^T A Phi(x)``. The dual is
maximized over the multipliers ``(Gamma, theta) >= 0`` by projected Nesterov
ascent; the primal pair is recovered in closed form from the multipliers.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .datasets import Dataset
from .exceptions import NotConverged, SingularSystem
from .kernels import (GramFactorization, KernelSpec, cholesky_upper, gram_matrix,
                      symmetrize)

log = logging.getLogger(__name__)

__all__ = [
    "KsosProblem",
    "ProblemTemplate",
    "DualState",
    "SolverConfig",
    "KsosModel",
    "build_problem",
    "initial_state",
    "primal_objective",
    "dual_objective",
    "dual_gradient",
    "solve_dual",
    "recover_primal",
    "strictly_feasible_point",
    "duality_gap",
]

THETA_FLOOR = 1e-12
DENSE_EIG_LIMIT = 200


@dataclass(frozen=True)
class KsosProblem:
    data: Dataset
    a: float
    b: float
    lambda1: float
    lambda2: float
    s: float
    kernel_m: KernelSpec
    kernel_f: KernelSpec
    fact_m: GramFactorization = field(repr=False)
    fact_f: GramFactorization = field(repr=False)

    def __post_init__(self):
        if self.lambda2 <= 0:
            raise ValueError("lambda2 must be strictly positive for the dual to exist")
        for name in ("a", "b", "lambda1", "s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def n(self):
        return self.data.n

    @property
    def Y(self):
        return self.data.Y

    @property
    def Km(self):
        return self.fact_m.K

    @property
    def V(self):
        return self.fact_f.V

    @property
    def Kf(self):
        """Gram matrix of ``k^f`` as represented by ``V`` (includes jitter)."""
        return self.fact_f.K_jittered

    def with_(self, **changes):
        return replace(self, **changes)


def build_problem(data, kernel_m, kernel_f, s, a=0.0, b=10.0, lambda1=1.0,
                  lambda2=1.0):
    """Assemble a problem, factorizing both Gram matrices on ``data.X``."""
    fact_m = cholesky_upper(gram_matrix(data.X, data.X, kernel_m))
    fact_f = cholesky_upper(gram_matrix(data.X, data.X, kernel_f))
    return KsosProblem(data, float(a), float(b), float(lambda1), float(lambda2),
                       float(s), kernel_m, kernel_f, fact_m, fact_f)


@dataclass(frozen=True)
class ProblemTemplate:
    """Everything a problem needs except the data and the scale lengthscales."""

    kernel_m: KernelSpec
    s: float
    a: float = 0.0
    b: float = 10.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    kernel_f_variance: float = 1.0

    @classmethod
    def from_problem(cls, prob):
        return cls(prob.kernel_m, prob.s, prob.a, prob.b, prob.lambda1, prob.lambda2,
                   prob.kernel_f.variance)

    def kernel_f(self, lengthscales):
        return KernelSpec(tuple(float(t) for t in np.atleast_1d(lengthscales)),
                          self.kernel_f_variance)

    def build(self, data, lengthscales):
        return build_problem(data, self.kernel_m, self.kernel_f(lengthscales), self.s,
                             self.a, self.b, self.lambda1, self.lambda2)


@dataclass
class DualState:
    gamma_mult: np.ndarray
    theta_mult: float
    momentum: np.ndarray = None
    iteration: int = 0
    objective: float = float("nan")

    def __post_init__(self):
        self.gamma_mult = np.asarray(self.gamma_mult, dtype=float)
        self.theta_mult = float(self.theta_mult)
        if self.momentum is None:
            self.momentum = np.zeros(self.gamma_mult.size + 1)

    @property
    def vector(self):
        return np.r_[self.gamma_mult, self.theta_mult]

    @classmethod
    def from_vector(cls, z, **kw):
        z = np.asarray(z, dtype=float)
        return cls(z[:-1].copy(), float(z[-1]), **kw)


def initial_state(n):
    """Strictly interior start ``(1/n, ..., 1/n, 1)``."""
    return DualState(np.full(n, 1.0 / n), 1.0)


@dataclass
class SolverConfig:
    learning_rate: float = 1e-2
    momentum: float = 0.9
    max_iter: int = 10_000
    tol_constraints: float = 1e-4
    tol_gap: float = 1e-4
    check_every: int = 50
    exploit_sparsity: bool = True
    strict: bool = False
    trace: bool = False
    seed: int = 0
    theta_update: str = "exact"

    def __post_init__(self):
        if self.theta_update not in ("exact", "gradient"):
            raise ValueError("theta_update must be 'exact' or 'gradient'")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.max_iter < 1 or self.check_every < 1:
            raise ValueError("max_iter and check_every must be positive")


# ---------------------------------------------------------------------------
# evaluation internals
# ---------------------------------------------------------------------------

@dataclass
class _Eval:
    """Everything derived from one multiplier vector."""

    gamma: np.ndarray       # mean coefficients gamma(Gamma, theta)
    r: np.ndarray           # residuals Y - K^m gamma
    quad: float             # gamma^T K^m gamma
    weights: np.ndarray     # eigenvalues of A (positive part, scaled)
    U: np.ndarray           # eigenvectors of A, shape (n, r); None if not formed
    coefs: np.ndarray       # V^{-1} U, shape (n, r)
    VtU: np.ndarray         # V^T U, shape (n, r)
    f_train: np.ndarray     # f_A(X_i) = diag(V^T A V)
    omega: float            # Omega*(V Diag(Gamma_-b) V^T)
    value: float            # dual objective
    theta: float            # multiplier of the norm constraint used


def _mean_part(prob, Gamma, theta):
    n = prob.n
    Da = Gamma + prob.a / n
    theta_eff = max(theta, THETA_FLOOR)
    K, Y = prob.Km, prob.Y
    S = np.flatnonzero(Da > 0)
    gamma = np.zeros(n)
    if S.size:
        sq = np.sqrt(Da[S])
        M = sq[:, None] * K[np.ix_(S, S)] * sq[None, :]
        M[np.diag_indices_from(M)] += theta_eff
        try:
            cf = sla.cho_factor(M, lower=False, check_finite=True)
        except (sla.LinAlgError, ValueError) as exc:
            raise SingularSystem(f"C(Gamma, theta) is singular: {exc}") from exc
        gamma[S] = sq * sla.cho_solve(cf, sq * Y[S])
    Kg = K[:, S] @ gamma[S]
    r = Y - Kg
    quad = float(gamma[S] @ Kg[S])
    return gamma, r, quad, Da, theta


def _secular_root(lam, c2, s):
    """Smallest ``theta >= 0`` with ``sum lam c2 / (lam + theta)^2 <= s``.

    The left side is the RKHS norm of ``gamma(theta)``. Newton's method on
    ``phi^{-1/2} - s^{-1/2}``, which is concave in ``theta``, climbs to the
    root monotonically from ``theta = 0``.
    """
    w = lam * c2
    if not np.any(w > 0):
        return 0.0
    if s <= 0:
        return np.inf
    target = 1.0 / np.sqrt(s)
    theta = 0.0
    for _ in range(200):
        den = lam + max(theta, THETA_FLOOR)
        phi = float(np.sum(w / den ** 2))
        if phi <= s * (1.0 + 1e-13):
            return theta
        dphi = -2.0 * float(np.sum(w / den ** 3))
        psi = 1.0 / np.sqrt(phi)
        dpsi = -0.5 * psi / phi * dphi
        step = (psi - target) / dpsi
        theta_new = theta - step
        if not theta_new > theta:
            return theta
        theta = theta_new
    return theta


def _mean_part_exact(prob, Gamma):
    """Mean coefficients at the maximizing norm multiplier ``theta*(Gamma)``.

    The dual is concave, so maximizing it over ``theta`` for fixed ``Gamma``
    leaves a concave function of ``Gamma`` whose gradient is the partial
    gradient at ``theta*``. With ``D_S^{1/2} K_SS D_S^{1/2} = Q diag(lam) Q^T``
    and ``c = Q^T D_S^{1/2} Y_S`` the norm of ``gamma(theta)`` is
    ``sum lam c^2 / (lam + theta)^2``, a decreasing scalar function.
    """
    n = prob.n
    Da = Gamma + prob.a / n
    K, Y = prob.Km, prob.Y
    S = np.flatnonzero(Da > 0)
    gamma = np.zeros(n)
    theta = 0.0
    if S.size:
        sq = np.sqrt(Da[S])
        lam, Q = np.linalg.eigh(symmetrize(sq[:, None] * K[np.ix_(S, S)] * sq[None, :]))
        lam = np.maximum(lam, 0.0)
        c = Q.T @ (sq * Y[S])
        theta = _secular_root(lam, c * c, prob.s)
        if np.isfinite(theta):
            gamma[S] = sq * (Q @ (c / (lam + max(theta, THETA_FLOOR))))
    Kg = K[:, S] @ gamma[S]
    r = Y - Kg
    quad = float(gamma[S] @ Kg[S])
    return gamma, r, quad, Da, theta


def _scale_part(prob, Gamma, exploit_sparsity, form_u=False):
    n = prob.n
    lam1, lam2 = prob.lambda1, prob.lambda2
    if exploit_sparsity and prob.b == 0:
        # V Diag(Gamma) V^T = G G^T with G = V_S Diag(sqrt Gamma_S); its
        # nonzero spectrum is that of G^T G = sqrt(G_S) K_SS sqrt(G_S).
        S = np.flatnonzero(Gamma > 0)
        if S.size == 0:
            return _empty_scale(n)
        sq = np.sqrt(Gamma[S])
        G = sq[:, None] * prob.Kf[np.ix_(S, S)] * sq[None, :]
        mu, Z = _top_eigh(symmetrize(G), lam1)
        if mu.size == 0:
            return _empty_scale(n)
        cS = sq[:, None] * Z / np.sqrt(mu)
        coefs = np.zeros((n, mu.size))
        coefs[S] = cS
        VtU = prob.Kf[:, S] @ cS
        U = prob.V[:, S] @ cS if form_u else None
    else:
        Db = Gamma - prob.b / n
        B = symmetrize((prob.V * Db) @ prob.V.T)
        mu, U = _top_eigh(B, lam1)
        if mu.size == 0:
            return _empty_scale(n)
        VtU = prob.V.T @ U
        # V^{-1} u = Diag(Db) V^T u / mu for every eigenpair (u, mu) of B
        coefs = Db[:, None] * VtU / mu
    excess = mu - lam1
    weights = excess / (2.0 * lam2)
    f_train = (VtU * VtU) @ weights
    omega = float(excess @ excess) / (4.0 * lam2)
    return weights, U, coefs, VtU, f_train, omega


def _empty_scale(n):
    return np.zeros(0), np.zeros((n, 0)), np.zeros((n, 0)), np.zeros((n, 0)), \
        np.zeros(n), 0.0


def _top_eigh(S, threshold):
    """Eigenpairs of symmetric ``S`` with eigenvalue strictly above ``threshold``."""
    if S.shape[0] > DENSE_EIG_LIMIT:
        try:
            mu, U = sla.eigh(S, subset_by_value=(threshold, np.inf), driver="evr",
                             check_finite=False)
        except (sla.LinAlgError, ValueError):
            mu, U = np.linalg.eigh(S)
    else:
        mu, U = np.linalg.eigh(S)
    keep = mu > threshold
    return mu[keep], U[:, keep]


def _evaluate(prob, Gamma, theta, exploit_sparsity=True, form_u=False):
    """Dual quantities at ``(Gamma, theta)``; ``theta=None`` uses ``theta*(Gamma)``."""
    if theta is None:
        gamma, r, quad, Da, theta = _mean_part_exact(prob, Gamma)
    else:
        gamma, r, quad, Da, theta = _mean_part(prob, Gamma, theta)
    weights, U, coefs, VtU, f_train, omega = _scale_part(
        prob, Gamma, exploit_sparsity, form_u)
    norm_term = 0.0 if np.isinf(theta) else theta * (quad - prob.s)
    value = float(Da @ (r * r) + norm_term - omega)
    return _Eval(gamma, r, quad, weights, U, coefs, VtU, f_train, omega, value, theta)


def _reduced_gradient(prob, ev):
    # Stationarity of gamma gives u = r and s = theta p, so the coupled terms
    # of the full gradient cancel exactly.
    return np.r_[ev.r * ev.r - ev.f_train, ev.quad - prob.s]


def _split(state_or_vec):
    if isinstance(state_or_vec, DualState):
        return state_or_vec.gamma_mult, state_or_vec.theta_mult
    z = np.asarray(state_or_vec, dtype=float)
    return z[:-1], float(z[-1])


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def dual_objective(state, prob):
    """Dual function value ``D(Gamma, theta)`` at a state or an (n+1)-vector."""
    Gamma, theta = _split(state)
    return _evaluate(prob, Gamma, theta, exploit_sparsity=False).value


def dual_gradient(state, prob):
    """Analytic gradient of the dual function, term by term.

    Uses an LU factorization of ``C = Diag(Gamma_a) K^m + theta I`` and the
    intermediates ``u, s, p, t`` of the closed-form derivation. The solver
    itself uses the equivalent reduced form ``(r^2 - f, gamma^T K gamma - s)``.
    """
    Gamma, theta = _split(state)
    n = prob.n
    K, Y = prob.Km, prob.Y
    Da = Gamma + prob.a / n
    theta_eff = max(theta, THETA_FLOOR)
    C = Da[:, None] * K
    C[np.diag_indices_from(C)] += theta_eff
    try:
        lu = sla.lu_factor(C, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularSystem(f"C(Gamma, theta) is singular: {exc}") from exc
    if np.any(np.diag(lu[0]) == 0):
        raise SingularSystem("C(Gamma, theta) is exactly singular")
    DaY = Da * Y
    gamma = sla.lu_solve(lu, DaY)
    Kg = K @ gamma
    r = Y - Kg
    quad = float(gamma @ Kg)
    u = Y - K @ sla.lu_solve(lu, DaY)
    s_vec = sla.lu_solve(lu, K @ (Da * r), trans=1)
    p = sla.lu_solve(lu, Kg, trans=1)
    t = K @ sla.lu_solve(lu, gamma)
    _, _, _, _, f_train, _ = _scale_part(prob, Gamma, exploit_sparsity=False)
    g_gamma = r * r - 2.0 * s_vec * u + 2.0 * theta * p * u - f_train
    g_theta = 2.0 * (Da * r) @ t + (quad - prob.s) - 2.0 * theta * gamma @ t
    return np.r_[g_gamma, g_theta]


def primal_objective(gamma, A, prob):
    """Primal objective and relative constraint violations at ``(gamma, A)``."""
    n = prob.n
    A = symmetrize(A)
    Kg = prob.Km @ gamma
    r2 = (prob.Y - Kg) ** 2
    f = np.einsum("ij,ik,kj->j", prob.V, A, prob.V)  # Phi(X_i) is column i of V
    nuclear = float(np.trace(A))
    fro2 = float(np.sum(A * A))
    obj = (prob.a / n) * r2.sum() + (prob.b / n) * f.sum() \
        + prob.lambda1 * nuclear + prob.lambda2 * fro2
    viol = np.maximum(r2 - f, 0.0) / (1.0 + r2)
    quad = float(gamma @ Kg)
    return {
        "objective": float(obj),
        "max_rel_violation": float(viol.max()) if n else 0.0,
        "norm_violation": max(quad - prob.s, 0.0) / (1.0 + prob.s),
    }


def _primal_from_eval(prob, ev):
    n = prob.n
    r2 = ev.r * ev.r
    obj = (prob.a / n) * r2.sum() + (prob.b / n) * ev.f_train.sum() \
        + prob.lambda1 * ev.weights.sum() + prob.lambda2 * float(ev.weights @ ev.weights)
    viol = np.maximum(r2 - ev.f_train, 0.0) / (1.0 + r2)
    return {
        "objective": float(obj),
        "max_rel_violation": float(viol.max()) if n else 0.0,
        "norm_violation": max(ev.quad - prob.s, 0.0) / (1.0 + prob.s),
    }


def duality_gap(primal_value, dual_value):
    """Relative gap ``(P - D) / (1 + |P|)``."""
    return (primal_value - dual_value) / (1.0 + abs(primal_value))


@dataclass
class KsosModel:
    """Recovered primal solution ``m(x) = gamma^T k^m_x``, ``f(x) = Phi(x)^T A Phi(x)``.

    ``scale_weights`` and ``scale_coefs`` hold the eigen-form of ``A`` mapped
    through ``V^{-1}``, so that ``f(x) = sum_k w_k (c_k^T k^f_x)^2`` without
    any inverse of the Cholesky factor at prediction time.
    """

    gamma_hat: np.ndarray
    a_hat: np.ndarray
    train_x: np.ndarray
    kernel_m: KernelSpec
    kernel_f: KernelSpec
    V: np.ndarray
    scale_weights: np.ndarray
    scale_coefs: np.ndarray
    f_train: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def f_floor(self):
        mean_f = float(np.mean(self.f_train)) if self.f_train.size else 0.0
        return 1e-12 * mean_f if mean_f > 0 else 1e-300

    def predict_mean(self, x):
        x = _as_rows(x, self.train_x.shape[1])
        return gram_matrix(x, self.train_x, self.kernel_m) @ self.gamma_hat

    def predict_scale(self, x):
        x = _as_rows(x, self.train_x.shape[1])
        if self.scale_weights.size == 0:
            return np.zeros(x.shape[0])
        proj = gram_matrix(x, self.train_x, self.kernel_f) @ self.scale_coefs
        return (proj * proj) @ self.scale_weights

    def predict_scale_features(self, x):
        """``Phi(x)^T A Phi(x)`` through the explicit feature map (reference route)."""
        x = _as_rows(x, self.train_x.shape[1])
        kx = gram_matrix(self.train_x, x, self.kernel_f)
        phi = sla.solve_triangular(self.V, kx, trans="T", lower=False)
        return np.einsum("ij,ik,kj->j", phi, self.a_hat, phi)

    def to_dict(self):
        tril = self.a_hat[np.tril_indices(self.a_hat.shape[0])]
        return {
            "gamma_hat": self.gamma_hat.tolist(),
            "a_hat_lower": tril.tolist(),
            "train_x": self.train_x.tolist(),
            "kernel_m": self.kernel_m.to_dict(),
            "kernel_f": self.kernel_f.to_dict(),
            "V": self.V.tolist(),
            "scale_weights": self.scale_weights.tolist(),
            "scale_coefs": self.scale_coefs.tolist(),
            "f_train": self.f_train.tolist(),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d):
        train_x = np.asarray(d["train_x"], dtype=float)
        n = train_x.shape[0]
        A = np.zeros((n, n))
        A[np.tril_indices(n)] = d["a_hat_lower"]
        A = A + np.tril(A, -1).T
        coefs = np.asarray(d["scale_coefs"], dtype=float).reshape(n, -1)
        return cls(np.asarray(d["gamma_hat"], dtype=float), A, train_x,
                   KernelSpec.from_dict(d["kernel_m"]), KernelSpec.from_dict(d["kernel_f"]),
                   np.asarray(d["V"], dtype=float),
                   np.asarray(d["scale_weights"], dtype=float), coefs,
                   np.asarray(d["f_train"], dtype=float), dict(d.get("diagnostics", {})))


def _as_rows(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1) if (x.size == d and d > 1) else x.reshape(-1, d)
    return x


def _model_from_eval(prob, ev, diagnostics):
    U = ev.U if ev.U is not None else prob.V @ ev.coefs
    A = symmetrize((U * ev.weights) @ U.T)
    return KsosModel(ev.gamma.copy(), A, prob.data.X.copy(), prob.kernel_m,
                     prob.kernel_f, prob.V, ev.weights.copy(), ev.coefs.copy(),
                     ev.f_train.copy(), diagnostics)


def recover_primal(state, prob, exploit_sparsity=True):
    """Closed-form primal pair from multipliers.

    ``gamma = C^{-1} Diag(Gamma_a) Y`` and
    ``A = [V Diag(Gamma_-b) V^T - lambda1 I]_+ / (2 lambda2)``.
    """
    Gamma, theta = _split(state)
    ev = _evaluate(prob, Gamma, theta, exploit_sparsity, form_u=True)
    p = _primal_from_eval(prob, ev)
    diag = {
        "primal_objective": p["objective"],
        "dual_objective": ev.value,
        "final_gap": duality_gap(p["objective"], ev.value),
        "max_violation": max(p["max_rel_violation"], p["norm_violation"]),
        "max_rel_violation": p["max_rel_violation"],
        "norm_violation": p["norm_violation"],
    }
    return _model_from_eval(prob, ev, diag)


def strictly_feasible_point(prob, eps=1e-8, margin=1e-8):
    """Slater point ``gamma = 0``, ``A = n V B0 V^T`` with ``B0 = Diag(alpha^2)``.

    ``alpha`` interpolates ``Y`` in the k^f Gram matrix, so Cauchy-Schwarz
    gives ``f_A(X_i) >= Y_i^2``; the ``(1 + margin)`` factor makes it strict.
    """
    n = prob.n
    V = prob.V
    alpha = sla.solve_triangular(V, sla.solve_triangular(V, prob.Y, trans="T"))
    b0 = alpha * alpha
    b0[alpha == 0] = eps
    A = n * (1.0 + margin) * (V * b0) @ V.T
    return np.zeros(n), symmetrize(A)


def _project(z):
    return np.maximum(z, 0.0)


def solve_dual(prob, cfg=None, state=None):
    """Projected Nesterov ascent on the dual.

    Every ``cfg.check_every`` iterations the primal pair is recovered and the
    run stops once the worst relative constraint violation and the absolute
    relative duality gap are both below tolerance. Returns
    ``(DualState, KsosModel)``; the model's ``diagnostics`` carry
    ``iterations``, ``final_gap``, ``max_violation``, ``converged`` and
    ``solve_seconds``.
    """
    cfg = cfg or SolverConfig()
    n = prob.n
    state = state or initial_state(n)
    x = _project(state.vector)
    x_prev = x - state.momentum if state.momentum is not None else x.copy()
    lr, mom = cfg.learning_rate, cfg.momentum
    sparse = cfg.exploit_sparsity
    exact = cfg.theta_update == "exact"
    trace = [] if cfg.trace else None
    best_value = -np.inf
    converged = False
    last_check = None
    t0 = time.perf_counter()
    it = state.iteration
    for it in range(state.iteration + 1, state.iteration + cfg.max_iter + 1):
        z = _project(x + mom * (x - x_prev))
        ev = _evaluate(prob, z[:-1], None if exact else z[-1], sparse)
        best_value = max(best_value, ev.value)
        if trace is not None:
            trace.append(ev.value)
        g = _reduced_gradient(prob, ev)
        if exact:
            # theta is recomputed from Gamma at every evaluation
            g[-1] = 0.0
            z[-1] = 0.0
        x_prev, x = x, _project(z + lr * g)
        if it % cfg.check_every == 0:
            last_check = _check(prob, x, sparse, exact)
            if (last_check["max_violation"] <= cfg.tol_constraints
                    and abs(last_check["final_gap"]) <= cfg.tol_gap):
                converged = True
                break
    elapsed = time.perf_counter() - t0
    ev = _evaluate(prob, x[:-1], None if exact else x[-1], sparse, form_u=True)
    if exact:
        x[-1] = ev.theta
    final = DualState.from_vector(x, momentum=x - x_prev, iteration=it)
    final.objective = ev.value
    p = _primal_from_eval(prob, ev)
    diagnostics = {
        "iterations": int(it),
        "converged": bool(converged),
        "status": "converged" if converged else "NotConverged",
        "primal_objective": p["objective"],
        "dual_objective": ev.value,
        "best_dual_objective": float(max(best_value, ev.value)),
        "final_gap": duality_gap(p["objective"], ev.value),
        "max_violation": max(p["max_rel_violation"], p["norm_violation"]),
        "max_rel_violation": p["max_rel_violation"],
        "norm_violation": p["norm_violation"],
        "solve_seconds": elapsed,
    }
    if trace is not None:
        diagnostics["objective_trace"] = trace
    model = _model_from_eval(prob, ev, diagnostics)
    if not converged:
        msg = (f"dual solver stopped at max_iter={cfg.max_iter}: "
               f"violation={diagnostics['max_violation']:.3g}, "
               f"gap={diagnostics['final_gap']:.3g}")
        if cfg.strict:
            raise NotConverged(msg, diagnostics)
        log.info(msg)
    return final, model


def _check(prob, x, sparse, exact):
    ev = _evaluate(prob, x[:-1], None if exact else x[-1], sparse)
    p = _primal_from_eval(prob, ev)
    return {
        "final_gap": duality_gap(p["objective"], ev.value),
        "max_violation": max(p["max_rel_violation"], p["norm_violation"]),
    }
