"""Independent reference solvers used only by the test-suite.

``brute_force_primal`` attacks the primal SDP directly and never touches the
dual objective, its gradient or the closed-form recovery.
"""

import numpy as np

from ksoscp.kernels import positive_part


def _finite_difference(fun, z, rel_step=1e-6):
    g = np.zeros_like(z)
    for i in range(z.size):
        h = rel_step * (1.0 + abs(z[i]))
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (fun(z + e) - fun(z - e)) / (2.0 * h)
    return g


def finite_difference_gradient(fun, z, rel_step=1e-6):
    """Central differences with step ``rel_step * (1 + |z_i|)``."""
    return _finite_difference(fun, np.asarray(z, dtype=float), rel_step)


def brute_force_primal(prob, rho0=0.1, growth=10.0, rounds=6, extra_rounds=20,
                       inner_iter=400, tol=1e-9):
    """Solve the primal SDP by an augmented-Lagrangian penalty method.

    Variables are ``beta`` (``m(X) = Kroot beta`` with ``gamma^T K gamma =
    ||beta||^2``, so the RKHS ball becomes a Euclidean ball projected
    exactly) and ``A`` (projected onto the PSD cone with ``positive_part``).
    The coverage constraints carry the penalty; ``rho`` grows by ``growth``
    for ``rounds`` rounds and multiplier updates continue at the final
    ``rho`` until the violation is below ``tol``.
    """
    n = prob.n
    Y = prob.Y
    V = prob.V
    a, b, lam1, lam2, s = prob.a, prob.b, prob.lambda1, prob.lambda2, prob.s
    w, U = np.linalg.eigh(prob.Km)
    keep = w > 1e-12 * w.max()
    Kroot = U[:, keep] * np.sqrt(w[keep])          # m(X) = Kroot @ beta
    gamma_map = U[:, keep] / np.sqrt(w[keep])       # gamma = gamma_map @ beta
    radius = np.sqrt(s)
    Vcols = V.T                                     # row i is Phi(X_i)^T

    def project(beta, A):
        nb = np.linalg.norm(beta)
        if nb > radius:
            beta = beta * (radius / nb)
        return beta, positive_part(A)

    def parts(beta, A):
        r = Y - Kroot @ beta
        f = np.einsum("ij,jk,ik->i", Vcols, A, Vcols)
        obj = (a / n) * r @ r + (b / n) * f.sum() + lam1 * np.trace(A) \
            + lam2 * np.sum(A * A)
        return r, f, obj

    def aug(beta, A, mu, rho):
        r, f, obj = parts(beta, A)
        g = r * r - f
        t = np.maximum(mu + rho * g, 0.0)
        val = obj + (t @ t - mu @ mu) / (2.0 * rho)
        # d/d beta and d/d A
        dg_weight = t                                # multiplier on each g_i
        grad_beta = -2.0 * (a / n) * Kroot.T @ r - 2.0 * Kroot.T @ (dg_weight * r)
        coef = (b / n) - dg_weight
        grad_A = lam1 * np.eye(n) + 2.0 * lam2 * A + (Vcols.T * coef) @ Vcols
        return val, grad_beta, 0.5 * (grad_A + grad_A.T)

    beta = np.zeros(Kroot.shape[1])
    A = np.zeros((n, n))
    mu = np.zeros(n)
    rho = rho0
    step = 1.0
    total_rounds = rounds + extra_rounds
    for k in range(total_rounds):
        # FISTA with backtracking on the augmented Lagrangian
        yb, yA = beta.copy(), A.copy()
        tk = 1.0
        prev_val = np.inf
        for _ in range(inner_iter):
            val, gb, gA = aug(yb, yA, mu, rho)
            while True:
                nb, nA = project(yb - step * gb, yA - step * gA)
                db, dA = nb - yb, nA - yA
                nval = aug(nb, nA, mu, rho)[0]
                quad = val + gb @ db + np.sum(gA * dA) \
                    + (db @ db + np.sum(dA * dA)) / (2.0 * step)
                if nval <= quad + 1e-12 * abs(quad):
                    break
                step *= 0.5
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
            mom = (tk - 1.0) / t_next
            if nval > prev_val:  # adaptive restart
                mom = 0.0
                t_next = 1.0
            yb = nb + mom * (nb - beta)
            yA = nA + mom * (nA - A)
            yb, yA = project(yb, yA)
            move = np.sqrt(db @ db + np.sum(dA * dA))
            beta, A, tk, prev_val = nb, nA, t_next, nval
            step *= 1.5
            if move < 1e-13 * (1.0 + np.sqrt(beta @ beta + np.sum(A * A))):
                break
        r, f, obj = parts(beta, A)
        g = r * r - f
        mu = np.maximum(mu + rho * g, 0.0)
        viol = np.max(np.maximum(g, 0.0) / (1.0 + r * r))
        if k < rounds - 1:
            rho *= growth
        elif viol < tol:
            break
    gamma = gamma_map @ beta
    return {"objective": float(obj), "gamma": gamma, "A": A,
            "max_rel_violation": float(viol), "multipliers": mu}
