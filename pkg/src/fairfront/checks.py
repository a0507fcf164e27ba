"""Self-check suite: analytic derivatives against independent oracles.

Every gradient and Hessian-vector product is compared to central finite
differences on small random instances, and the simplex projection is
compared to a brute-force active-set solve. The ``corrupt`` hook injects
a deliberate error into one metric's gradient so the harness itself can
be exercised.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import metrics, models, simplex
from .data import synth_biased
from .metrics import FairnessMetric
from .models import LossModel
from .problem import Problem
from .twoloop import implicit_gradient, solve_lower

FD_STEP = 1e-6


@dataclass
class CheckResult:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self):
        return self.max_error <= self.tolerance


def fd_gradient(fun, w, step=FD_STEP):
    g = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = step
        g[i] = (fun(w + e) - fun(w - e)) / (2.0 * step)
    return g


def relative_error(approx, exact):
    scale = max(float(np.linalg.norm(exact)), 1e-8)
    return float(np.linalg.norm(np.asarray(approx) - np.asarray(exact))) / scale


def brute_force_projection(x):
    """Active-set enumeration of the simplex projection (small S only)."""
    x = np.asarray(x, dtype=float)
    S = x.size
    best, best_d = None, np.inf
    for k in range(1, S + 1):
        for active in combinations(range(S), k):
            p = np.zeros(S)
            shift = (x[list(active)].sum() - 1.0) / k
            p[list(active)] = x[list(active)] - shift
            if p.min() < -1e-12:
                continue
            d = float(np.linalg.norm(p - x))
            if d < best_d - 1e-15:
                best, best_d = p, d
    return best


def _random_dataset(rng, task, n_groups=2):
    sizes = rng.integers(20, 60, size=n_groups)
    d = int(rng.integers(3, 8))
    ds = synth_biased(list(sizes), d, shift=0.6, seed=int(rng.integers(1 << 31)), task=task)
    return ds


def check_loss_gradients(n_instances=20, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for kind in models.LOSS_KINDS:
        task = "regression" if kind == "ridge" else "classification"
        for _ in range(n_instances):
            ds = _random_dataset(rng, task)
            model = LossModel(kind, reg=10.0 ** rng.uniform(-3, -1))
            w = 0.5 * rng.normal(size=ds.d)
            a = int(rng.integers(ds.n_groups))
            fd = fd_gradient(lambda u: models.group_loss(model, u, ds, a), w)
            worst = max(worst, relative_error(fd, models.group_grad(model, w, ds, a)))
    return CheckResult("loss gradients vs finite differences", worst, 1e-5)


def check_hvps(n_instances=20, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for kind in models.LOSS_KINDS:
        task = "regression" if kind == "ridge" else "classification"
        count = 0
        while count < n_instances:
            ds = _random_dataset(rng, task)
            model = LossModel(kind, reg=10.0 ** rng.uniform(-3, -1))
            w = 0.5 * rng.normal(size=ds.d)
            if kind == "svm2":
                # keep every margin away from the hinge kink so the
                # finite-difference stencil stays on one quadratic piece
                m = ds.y * (ds.X @ w)
                if np.min(np.abs(1.0 - m)) < 1e-3:
                    continue
            lam = simplex.project_simplex(rng.random(ds.n_groups) + 0.1)
            v = rng.normal(size=ds.d)
            fd = np.empty(ds.d)
            step = FD_STEP
            gp = models.scalarized_grad(model, w + step * v, ds, lam)
            gm = models.scalarized_grad(model, w - step * v, ds, lam)
            fd = (gp - gm) / (2.0 * step)
            worst = max(worst, relative_error(fd, models.scalarized_hvp(model, w, ds, lam, v)))
            count += 1
    return CheckResult("hessian-vector products vs finite differences", worst, 1e-5)


def check_metric_gradients(n_instances=20, seed=2, corrupt=None):
    results = []
    for kind in metrics.METRIC_KINDS:
        rng = np.random.default_rng([seed, metrics.METRIC_KINDS.index(kind)])
        task = "regression" if kind == "hsic" else "classification"
        if kind in ("gv", "if", "dp"):
            task = "regression" if kind != "dp" and rng.random() < 0.5 else task
        worst = 0.0
        for _ in range(n_instances):
            ds = _random_dataset(rng, task)
            model = LossModel("ridge" if task == "regression" else "logistic", reg=1e-2)
            fm = FairnessMetric(kind, smooth=20.0, model=model, pair_cap=None)
            w = 0.4 * rng.normal(size=ds.d)
            grad = metrics.metric_grad(fm, w, ds)
            if corrupt == kind:
                grad = grad + 1e-3
            fd = fd_gradient(lambda u: metrics.metric_value(fm, u, ds), w)
            worst = max(worst, relative_error(fd, grad))
        results.append(CheckResult(f"metric '{kind}' gradient vs finite differences", worst, 1e-5))
    return results


def check_projection(n_points=1000, seed=3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        S = int(rng.integers(1, 5))
        x = rng.normal(scale=2.0, size=S)
        diff = simplex.project_simplex(x) - brute_force_projection(x)
        worst = max(worst, float(np.linalg.norm(diff)))
    return CheckResult("simplex projection vs active-set enumeration", worst, 1e-9)


def check_implicit_gradient(seed=4):
    ds = synth_biased([100, 100], 4, shift=0.8, seed=seed, task="classification")
    from .data import standardize

    ds = standardize(ds)
    model = LossModel("logistic", reg=1e-2)
    fm = FairnessMetric("if", model=model, pair_cap=None)
    problem = Problem(ds, model, fm)
    lam = np.array([0.35, 0.65])
    g = implicit_gradient(problem, lam, tol=1e-12)
    delta = np.array([1.0, -1.0]) / np.sqrt(2.0)
    h = 1e-5
    wp = solve_lower(problem, lam + h * delta, tol=1e-12)
    wm = solve_lower(problem, lam - h * delta, tol=1e-12)
    fd = (problem.fairness(wp) - problem.fairness(wm)) / (2.0 * h)
    err = abs(fd - float(g @ delta)) / max(abs(fd), 1e-8)
    return CheckResult("implicit gradient vs finite differences of the implicit objective", err, 1e-3)


def run_checks(corrupt=None):
    """Run the whole suite; returns the list of CheckResult."""
    results = [check_loss_gradients(), check_hvps()]
    results.extend(check_metric_gradients(corrupt=corrupt))
    results.append(check_projection())
    results.append(check_implicit_gradient())
    return results
