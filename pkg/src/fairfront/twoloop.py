"""Two-loop solvers: inner weighted fits plus implicit-gradient outer steps.

The outer objective is the implicit fairness function
phi(lam) = Fair(w*(lam)) with w*(lam) the minimizer of the lam-weighted
group loss. Its gradient is obtained without differentiating through the
inner solver: solve H u = grad Fair(w*) with H the weighted Hessian at
w*, then grad phi = -J u where J is the matrix of group gradients.
"""

import numpy as np

from . import simplex
from .bilevel import Trajectory
from .exceptions import ConvergenceError


def solve_lower(problem, lam, tol=1e-8, max_iter=100_000, w0=None):
    """Minimize the lam-weighted group loss to gradient norm <= tol.

    Gradient descent at stepsize 1/L with stepsize halving whenever a step
    fails to decrease the objective (the squared hinge has curvature
    jumps). Requires reg > 0 so the objective is strongly convex.
    """
    if problem.model.reg <= 0.0:
        raise ValueError("solve_lower needs reg > 0 (strong convexity)")
    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    lam = simplex.check_weights(lam, problem.n_groups)
    w = np.zeros(problem.dim) if w0 is None else np.asarray(w0, dtype=float).copy()
    step = 1.0 / problem.lipschitz()
    value = problem.scalarized_loss(w, lam)
    for _ in range(max_iter):
        grad = problem.scalarized_grad(w, lam)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return w
        trial = w - step * grad
        trial_value = problem.scalarized_loss(trial, lam)
        if trial_value <= value:  # plateau at float resolution still accepted
            w, value = trial, trial_value
        else:
            step *= 0.5
            if step < 1e-18:
                break
    grad = problem.scalarized_grad(w, lam)
    gnorm = float(np.linalg.norm(grad))
    if gnorm <= tol:
        return w
    raise ConvergenceError(
        f"lower-level solve stopped at gradient norm {gnorm:.3e} > tol {tol:.3e}",
        grad_norm=gnorm,
    )


def conjugate_gradient(matvec, b, tol=1e-10, max_iter=None):
    """Solve the SPD system A x = b given only x -> A x.

    Stops when the residual norm falls below tol * max(1, ||b||).
    """
    n = b.shape[0]
    if max_iter is None:
        max_iter = 20 * n + 50
    x = np.zeros(n)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    target = tol * max(1.0, float(np.linalg.norm(b)))
    for _ in range(max_iter):
        if np.sqrt(rs) <= target:
            return x
        Ap = matvec(p)
        alpha = rs / float(p @ Ap)
        x = x + alpha * p
        r = r - alpha * Ap
        rs_next = float(r @ r)
        p = r + (rs_next / rs) * p
        rs = rs_next
    if np.sqrt(rs) <= target:
        return x
    raise ConvergenceError(
        f"conjugate gradient stalled at residual {np.sqrt(rs):.3e}", grad_norm=float(np.sqrt(rs))
    )


def implicit_gradient(problem, lam, tol=1e-8, w0=None, return_state=False):
    """Gradient of the implicit fairness function at lam.

    Solves the lower level to ``tol``, then the adjoint system
    H u = grad Fair(w*) by matrix-free conjugate gradients, and returns
    -J u (the metric has no direct dependence on lam).
    """
    lam = simplex.check_weights(lam, problem.n_groups)
    w_star = solve_lower(problem, lam, tol=tol, w0=w0)
    rhs = problem.fairness_grad(w_star)
    u = conjugate_gradient(lambda v: problem.scalarized_hvp(w_star, lam, v), rhs)
    grad = -(problem.cross_derivative(w_star) @ u)
    if return_state:
        return grad, w_star
    return grad


def frank_wolfe(problem, max_iter=500, gap_tol=1e-6, lower_tol=1e-8, lam0=None):
    """Conditional-gradient descent of phi over the simplex.

    Oblivious stepsize 2/(t+2); stops when the linear-minimization gap
    <g, lam - s> falls below gap_tol. Hitting max_iter is a normal
    outcome. Returns (lam, w*(lam), trajectory); the trajectory's
    stationarity column records the gap.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    lam = simplex.uniform(problem.n_groups) if lam0 is None else simplex.check_weights(lam0)
    traj = Trajectory()
    w = None
    for t in range(max_iter):
        g, w = implicit_gradient(problem, lam, tol=lower_tol, w0=w, return_state=True)
        s = simplex.simplex_vertex(int(np.argmin(g)), problem.n_groups)
        gap = float(g @ (lam - s))
        _record(traj, problem, t, w, lam, stationarity=gap)
        if gap <= gap_tol:
            break
        lam = (1.0 - 2.0 / (t + 2.0)) * lam + (2.0 / (t + 2.0)) * s
    w = solve_lower(problem, lam, tol=lower_tol, w0=w)
    _record(traj, problem, traj.t[-1] + 1, w, lam, stationarity=np.nan)
    return lam, w, traj


def projected_gradient(problem, max_iter=500, f_tol=1e-5, lower_tol=1e-8, lam0=None):
    """Projected gradient descent of phi over the simplex.

    Backtracking from eta = 1 halves the stepsize until phi does not
    increase (tolerance 1e-12); stops when consecutive phi values differ
    by at most f_tol. The trajectory's stationarity column records the
    generalized gradient norm at the accepted stepsize.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    lam = simplex.uniform(problem.n_groups) if lam0 is None else simplex.check_weights(lam0)
    traj = Trajectory()
    g, w = implicit_gradient(problem, lam, tol=lower_tol, return_state=True)
    value = problem.fairness(w)
    for t in range(max_iter):
        eta = 1.0
        while True:
            cand = simplex.project_simplex(lam - eta * g)
            w_cand = solve_lower(problem, cand, tol=lower_tol, w0=w)
            cand_value = problem.fairness(w_cand)
            if cand_value <= value + 1e-12:
                break
            eta *= 0.5
            if eta < 1e-12:  # no acceptable step: take a null step and stop
                cand, w_cand, cand_value = lam, w, value
                break
        _record(traj, problem, t, w, lam,
                stationarity=float(np.linalg.norm(lam - cand) / eta))
        done = abs(cand_value - value) <= f_tol
        lam, w, value = cand, w_cand, cand_value
        if done:
            break
        g = implicit_gradient(problem, lam, tol=lower_tol, w0=w)
    _record(traj, problem, traj.t[-1] + 1, w, lam, stationarity=np.nan)
    return lam, w, traj


def _record(traj, problem, t, w, lam, stationarity):
    traj.append(
        t=t,
        fairness=problem.fairness(w),
        group_losses=problem.group_losses(w),
        grad_norm=float(np.linalg.norm(problem.scalarized_grad(w, lam))),
        stationarity=stationarity,
        lam=lam,
    )
