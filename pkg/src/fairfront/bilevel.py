"""Single-loop solvers for the bilevel fair-reweighting problem.

Each step jointly updates the model w, a dual vector v that tracks the
solution of the weighted-Hessian system H v = -grad Fair(w), and the
group weights lam, all read from the pre-step state:

    w+   = w - tau * J(w)^T lam
    v+   = v - rho * (grad Fair(w) + H(w, lam) v)
    lam+ = Proj_simplex(lam - gamma * J(w) v)

with J(w) the matrix of group gradients. At the dual fixed point,
J v equals the gradient of the implicit fairness function, so the lam
update is a projected gradient step on it. The stochastic variant
replaces every oracle by an independent stratified-minibatch estimate
and clips the lam direction to norm clip_threshold.
"""

from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .exceptions import DivergenceError

ITERATE_CAP = 1e8


@dataclass
class BadrConfig:
    """Stepsizes and run controls for the single-loop solvers.

    tau/rho_dual/gamma are the w/v/lam stepsizes; gamma = 0 freezes the
    upper level (used by diagnostics). batch=None runs full-batch
    deterministic steps; otherwise stratified minibatches of ~batch rows
    are drawn per oracle. clip_threshold bounds the stochastic lam-step
    direction.
    """

    tau: float
    rho_dual: float
    gamma: float
    iters: int
    clip_threshold: float = 1.0
    batch: int | None = None
    seed: int = 0
    record_every: int = 10

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValueError("tau must be finite and > 0")
        if not (np.isfinite(self.rho_dual) and self.rho_dual > 0):
            raise ValueError("rho_dual must be finite and > 0")
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError("gamma must be finite and >= 0")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if not self.clip_threshold > 0:
            raise ValueError("clip_threshold must be > 0")
        if self.batch is not None and self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class BadrState:
    """Iterate triple (w, v, lam) plus the step counter."""

    w: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    t: int = 0

    @classmethod
    def initial(cls, problem):
        return cls(
            w=np.zeros(problem.dim),
            v=np.zeros(problem.dim),
            lam=simplex.uniform(problem.n_groups),
            t=0,
        )


@dataclass
class Trajectory:
    """Diagnostics recorded along a solver run.

    stationarity holds the solver's own stationarity measure: the
    generalized-gradient-norm estimate for the single-loop solvers, the
    linear-minimization gap for Frank-Wolfe, the scaled step norm for
    projected gradient.
    """

    t: list = field(default_factory=list)
    fairness: list = field(default_factory=list)
    group_losses: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    stationarity: list = field(default_factory=list)
    lam: list = field(default_factory=list)

    def append(self, t, fairness, group_losses, grad_norm, stationarity, lam):
        if self.t and t <= self.t[-1]:
            raise ValueError("trajectory timestamps must be strictly increasing")
        self.t.append(int(t))
        self.fairness.append(float(fairness))
        self.group_losses.append(np.asarray(group_losses, dtype=float))
        self.grad_norm.append(float(grad_norm))
        self.stationarity.append(float(stationarity))
        self.lam.append(np.asarray(lam, dtype=float).copy())

    def __len__(self):
        return len(self.t)

    def header(self):
        S = self.lam[0].shape[0] if self.lam else 0
        return (
            ["t", "fairness"]
            + [f"F_{a}" for a in range(S)]
            + ["grad_norm", "stationarity"]
            + [f"lambda_{a}" for a in range(S)]
        )

    def rows(self):
        for i in range(len(self.t)):
            yield (
                [self.t[i], self.fairness[i]]
                + list(self.group_losses[i])
                + [self.grad_norm[i], self.stationarity[i]]
                + list(self.lam[i])
            )


def clip(g, threshold):
    """Rescale g to norm at most threshold (identity when already inside)."""
    nrm = float(np.linalg.norm(g))
    if nrm > threshold:
        return g * (threshold / nrm)
    return g


def _check_finite(name, vec, trajectory=None):
    if not np.all(np.isfinite(vec)) or float(np.linalg.norm(vec)) > ITERATE_CAP:
        raise DivergenceError(name, trajectory=trajectory)
    return vec


def badr_gd_step(state, problem, cfg):
    """One deterministic step; all three updates read the pre-step state."""
    J = problem.cross_derivative(state.w)
    hv = problem.scalarized_hvp(state.w, state.lam, state.v)
    fair_grad = problem.fairness_grad(state.w)

    w_next = _check_finite("w", state.w - cfg.tau * (J.T @ state.lam))
    v_next = _check_finite("v", state.v - cfg.rho_dual * (fair_grad + hv))
    direction = _check_finite("lambda", J @ state.v)
    lam_next = simplex.project_simplex(state.lam - cfg.gamma * direction)
    return BadrState(w=w_next, v=v_next, lam=lam_next, t=state.t + 1)


def _minibatch(problem, rng, batch):
    """Stratified subsample: ceil(batch * n_a / n) rows per group, without
    replacement inside each group, so every group contributes and the
    within-group means stay unbiased."""
    ds = problem.data
    take = np.ceil(batch * ds.group_sizes() / ds.n).astype(int)
    picks = [
        np.sort(rng.choice(idx, size=min(k, idx.size), replace=False))
        for idx, k in zip(ds.group_index, take)
    ]
    return problem.with_data(ds.subset(np.concatenate(picks)))


def badr_sgd_step(state, problem, cfg, rng):
    """One stochastic step: an independent minibatch per oracle, and the
    lam direction clipped to clip_threshold before projection."""
    if cfg.batch is None or cfg.batch >= problem.data.n:
        # full-batch degeneracy: identical arithmetic to the deterministic
        # step apart from the (then inactive or norm-capping) clip
        J = problem.cross_derivative(state.w)
        hv = problem.scalarized_hvp(state.w, state.lam, state.v)
        fair_grad = problem.fairness_grad(state.w)
        grad_w = J.T @ state.lam
        direction = J @ state.v
    else:
        p_w = _minibatch(problem, rng, cfg.batch)
        p_fair = _minibatch(problem, rng, cfg.batch)
        p_hess = _minibatch(problem, rng, cfg.batch)
        p_lam = _minibatch(problem, rng, cfg.batch)
        grad_w = p_w.cross_derivative(state.w).T @ state.lam
        fair_grad = p_fair.fairness_grad(state.w)
        hv = p_hess.scalarized_hvp(state.w, state.lam, state.v)
        direction = p_lam.cross_derivative(state.w) @ state.v

    w_next = _check_finite("w", state.w - cfg.tau * grad_w)
    v_next = _check_finite("v", state.v - cfg.rho_dual * (fair_grad + hv))
    direction = clip(_check_finite("lambda", direction), cfg.clip_threshold)
    lam_next = simplex.project_simplex(state.lam - cfg.gamma * direction)
    return BadrState(w=w_next, v=v_next, lam=lam_next, t=state.t + 1)


def run(problem, cfg, init=None):
    """Run cfg.iters steps and return (final state, trajectory).

    Full-batch when cfg.batch is None, stochastic otherwise; the
    trajectory records exact diagnostics every record_every steps and at
    the final step. Divergence aborts with the partial trajectory
    attached to the error.
    """
    state = BadrState.initial(problem) if init is None else init
    rng = np.random.default_rng(cfg.seed)
    traj = Trajectory()
    stochastic = cfg.batch is not None

    def record(s):
        direction = problem.cross_derivative(s.w) @ s.v
        if cfg.gamma > 0:
            stat = generalized_gradient_norm(s.lam, direction, cfg.gamma)
        else:
            stat = np.nan
        traj.append(
            t=s.t,
            fairness=problem.fairness(s.w),
            group_losses=problem.group_losses(s.w),
            grad_norm=float(np.linalg.norm(problem.scalarized_grad(s.w, s.lam))),
            stationarity=stat,
            lam=s.lam,
        )

    record(state)
    for t in range(cfg.iters):
        try:
            if stochastic:
                state = badr_sgd_step(state, problem, cfg, rng)
            else:
                state = badr_gd_step(state, problem, cfg)
        except DivergenceError as err:
            err.trajectory = traj
            raise
        if state.t % cfg.record_every == 0 or state.t == cfg.iters:
            record(state)
    return state, traj


def generalized_gradient_norm(lam, grad_estimate, gamma):
    """Norm of (lam - Proj(lam - gamma * g)) / gamma, the projected
    stationarity measure over the simplex."""
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    moved = simplex.project_simplex(lam - gamma * np.asarray(grad_estimate, dtype=float))
    return float(np.linalg.norm((lam - moved) / gamma))


def default_stepsizes(problem, probe_iters=50, grid=(1e-4, 1e-3, 1e-2, 1e-1)):
    """(tau, rho, gamma) defaults: tau = rho = 1/L with L the estimated
    worst-group Hessian bound, gamma picked by short probe runs over a
    log grid (smallest gamma wins ties; diverging probes are skipped)."""
    if problem.model.reg <= 0.0:
        raise ValueError("default stepsizes need reg > 0 (strong convexity)")
    tau = 1.0 / problem.lipschitz()
    best_gamma, best_value = None, np.inf
    for gamma in grid:
        cfg = BadrConfig(tau=tau, rho_dual=tau, gamma=gamma, iters=probe_iters, record_every=probe_iters)
        try:
            state, _ = run(problem, cfg)
            value = problem.fairness(state.w)
        except DivergenceError:
            continue
        if np.isfinite(value) and value < best_value:
            best_gamma, best_value = gamma, value
    if best_gamma is None:
        raise DivergenceError("lambda", "every probe stepsize diverged")
    return tau, tau, best_gamma
