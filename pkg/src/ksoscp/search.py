"""Bounded compass (coordinate pattern) search for noisy or non-smooth objectives."""

from __future__ import annotations

import numpy as np

__all__ = ["pattern_search"]


def pattern_search(fun, x0, lower, upper, step0=0.25, min_step=1e-3,
                   max_evals=None, history=None):
    """Maximize ``fun`` over the box ``[lower, upper]``.

    Steps are expressed as fractions of each coordinate's box width. A full
    sweep of ``+/- step`` moves along every coordinate is tried; the first
    improving move is taken (opportunistic polling), otherwise the step is
    halved. Stops when the step drops below ``min_step`` or ``max_evals``
    evaluations have been spent.

    ``fun`` may return ``None`` or ``nan`` for a failed evaluation, which
    counts as worse than everything. If ``history`` is a list, every
    ``(x, value)`` pair is appended to it.

    Returns ``(best_x, best_value, n_evals)``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    width = upper - lower
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    n_evals = 0

    def evaluate(z):
        nonlocal n_evals
        n_evals += 1
        val = fun(z)
        if val is None or not np.isfinite(val):
            val = -np.inf
        if history is not None:
            history.append((z.copy(), val))
        return float(val)

    best = evaluate(x)
    step = float(step0)
    budget_left = lambda: max_evals is None or n_evals < max_evals  # noqa: E731
    while step >= min_step and budget_left():
        improved = False
        for j in range(x.size):
            for sign in (1.0, -1.0):
                if not budget_left():
                    break
                z = x.copy()
                z[j] = np.clip(z[j] + sign * step * width[j], lower[j], upper[j])
                if z[j] == x[j]:
                    continue
                val = evaluate(z)
                if val > best:
                    x, best, improved = z, val, True
                    break
        if not improved:
            step *= 0.5
    return x, best, n_evals
