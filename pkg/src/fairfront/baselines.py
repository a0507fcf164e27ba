"""Pareto-efficient comparison strategies and the penalization path.

Every strategy returns (group weights, fitted model). The weighted fits
are Pareto efficient by construction; the penalization path exists to
demonstrate that adding a fairness penalty to plain empirical risk
generally is not.
"""

import warnings

import numpy as np

from . import simplex
from .exceptions import DivergenceError
from .metrics import metric_grad, metric_value
from .twoloop import solve_lower

ITERATE_CAP = 1e8


def uniform_fit(problem, tol=1e-8):
    """Fit at the barycenter of the simplex (no reweighting)."""
    lam = simplex.uniform(problem.n_groups)
    return lam, solve_lower(problem, lam, tol=tol)


def balanced_fit(problem, tol=1e-8):
    """Fit with weights inversely proportional to group sizes."""
    inv = 1.0 / problem.data.group_sizes()
    lam = inv / inv.sum()
    return lam, solve_lower(problem, lam, tol=tol)


def one_group_fit(problem, metric=None, tol=1e-8):
    """Fit one model per group and keep the one with the lowest metric.

    Ties break toward the lowest group index.
    """
    metric = problem.metric if metric is None else metric
    fits, values = [], []
    for a in range(problem.n_groups):
        w = solve_lower(problem, simplex.simplex_vertex(a, problem.n_groups), tol=tol)
        fits.append(w)
        values.append(metric_value(metric, w, problem.data))
    best = int(np.argmin(values))
    return simplex.simplex_vertex(best, problem.n_groups), fits[best]


def minimax_fit(problem, iters=500, step=0.5, tol=1e-8):
    """Approximate minimizer of the worst group loss.

    Simultaneous ascent-descent: multiplicative weights on the group
    losses against a gradient step on the weighted objective, both read
    from the pre-step state. The returned model is re-solved at the final
    weights so the output stays a weighted-fit point.
    """
    lam = simplex.uniform(problem.n_groups)
    w = np.zeros(problem.dim)
    eta = 1.0 / problem.lipschitz()
    for _ in range(iters):
        F = problem.group_losses(w)
        grad = problem.scalarized_grad(w, lam)
        w = w - eta * grad
        if not np.all(np.isfinite(w)) or float(np.linalg.norm(w)) > ITERATE_CAP:
            raise DivergenceError("w")
        scaled = lam * np.exp(step * (F - F.max()))
        lam = scaled / scaled.sum()
    return lam, solve_lower(problem, lam, tol=tol)


def penalized_path(problem, metric=None, nu_grid=None, tol=1e-5, max_iter=50_000):
    """Models along the fairness-penalized empirical risk path.

    For each nu in the grid, minimizes ERM(w) + (1/nu) * metric(w) by
    gradient descent with stepsize halving, starting every point from the
    plain ERM solution. The gradient tolerance scales with the penalty
    weight; points that hit max_iter are kept and reported via a warning.
    Default grid: 10 log-spaced nu in [1e-6, 10^-0.5].
    """
    metric = problem.metric if metric is None else metric
    if nu_grid is None:
        nu_grid = np.logspace(-6.0, -0.5, 10)
    if np.any(np.asarray(nu_grid) <= 0):
        raise ValueError("all nu values must be > 0")

    sizes = problem.data.group_sizes()
    lam_erm = sizes / sizes.sum()  # sample-mean weighting
    w_erm = solve_lower(problem, lam_erm, tol=min(tol, 1e-8))

    path = []
    for nu in nu_grid:
        weight = 1.0 / nu

        def value(w):
            return problem.scalarized_loss(w, lam_erm) + weight * metric_value(metric, w, problem.data)

        def grad(w):
            return problem.scalarized_grad(w, lam_erm) + weight * metric_grad(metric, w, problem.data)

        w = w_erm.copy()
        cur = value(w)
        step_size = 1.0 / problem.lipschitz()
        point_tol = tol * max(1.0, weight)
        converged = False
        for _ in range(max_iter):
            g = grad(w)
            if float(np.linalg.norm(g)) <= point_tol:
                converged = True
                break
            trial = w - step_size * g
            trial_value = value(trial)
            if trial_value <= cur:
                w, cur = trial, trial_value
            else:
                step_size *= 0.5
                if step_size < 1e-18:
                    break
        if not converged:
            warnings.warn(
                f"penalized fit at nu={nu:.3e} stopped at gradient norm "
                f"{float(np.linalg.norm(grad(w))):.3e} (tol {point_tol:.3e})",
                RuntimeWarning,
                stacklevel=2,
            )
        path.append((float(nu), w))
    return path
