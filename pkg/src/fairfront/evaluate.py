"""Predictive scores, Pareto dominance checks, and simplex scans.

The scan evaluates the implicit fairness function over a grid of group
weights: dense barycentric grids for 2 or 3 groups, a Halton sample of
the simplex otherwise. Scan tables and strategy reports serialize to CSV
(one row per grid point / strategy) and JSON (nested report).
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .exceptions import ConvergenceError
from .metrics import metric_value
from .twoloop import solve_lower


def accuracy(w, ds):
    """Fraction of correct signs, with sign(0) = +1."""
    if ds.task != "classification":
        raise ValueError("accuracy needs a classification dataset")
    pred = np.where(ds.X @ w >= 0.0, 1.0, -1.0)
    return float(np.mean(pred == ds.y))


def rmse(w, ds):
    """Root mean squared prediction error."""
    if ds.task != "regression":
        raise ValueError("rmse needs a regression dataset")
    r = ds.y - ds.X @ w
    return float(np.sqrt(np.mean(r * r)))


def score(w, ds):
    """accuracy for classification, rmse for regression."""
    return accuracy(w, ds) if ds.task == "classification" else rmse(w, ds)


def group_losses(problem, w):
    """Per-group loss vector F_a(w)."""
    return problem.group_losses(w)


def dominance_flags(points, slack=1e-6):
    """flags[i] is True iff some point j is <= points[i] + slack in every
    coordinate and < points[i] - slack in at least one."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a list of equal-length loss vectors")
    le = np.all(pts[:, None, :] <= pts[None, :, :] + slack, axis=2)
    lt = np.any(pts[:, None, :] < pts[None, :, :] - slack, axis=2)
    dominates = le & lt
    np.fill_diagonal(dominates, False)
    return list(np.any(dominates, axis=0))


def _halton(count, dim):
    """First ``count`` points of the Halton sequence in [0,1]^dim."""

    def radical_inverse(i, base):
        f, out = 1.0, 0.0
        while i > 0:
            f /= base
            out += f * (i % base)
            i //= base
        return out

    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]
    while len(primes) < dim:  # enough bases for any realistic group count
        primes.append(primes[-1] + 2)
    return np.array(
        [[radical_inverse(i + 1, primes[k]) for k in range(dim)] for i in range(count)]
    )


def simplex_grid(n_groups, resolution):
    """Scan locations: the dense grid for 2-3 groups, Halton otherwise."""
    if n_groups == 1:
        return np.ones((1, 1))
    if n_groups == 2:
        t = np.arange(resolution) / (resolution - 1)
        return np.column_stack([t, 1.0 - t])
    if n_groups == 3:
        m = resolution - 1
        pts = [
            (i / m, j / m, (m - i - j) / m)
            for i in range(m + 1)
            for j in range(m + 1 - i)
        ]
        return np.array(pts)
    # sorted-gap transform maps uniform cube points onto the simplex
    u = _halton(resolution, n_groups - 1)
    padded = np.hstack([np.zeros((u.shape[0], 1)), np.sort(u, axis=1), np.ones((u.shape[0], 1))])
    return np.diff(padded, axis=1)


def barycentric_xy(lam):
    """2-d coordinates of 3-group weights in the unit triangle."""
    return lam[1] + 0.5 * lam[2], float(np.sqrt(3.0)) / 2.0 * lam[2]


@dataclass
class ScanResult:
    """One row per solved grid point, in grid order."""

    lam: np.ndarray
    losses: np.ndarray
    fairness: np.ndarray
    n_failed: int = 0

    @property
    def n_groups(self):
        return self.lam.shape[1]

    def header(self):
        S = self.n_groups
        cols = [f"lambda_{a}" for a in range(S)] + [f"F_{a}" for a in range(S)] + ["fairness"]
        if S == 3:
            cols += ["bary_x", "bary_y"]
        return cols

    def rows(self):
        for i in range(self.lam.shape[0]):
            row = list(self.lam[i]) + list(self.losses[i]) + [self.fairness[i]]
            if self.n_groups == 3:
                row += list(barycentric_xy(self.lam[i]))
            yield row


def _worker_cap(requested):
    cap = os.environ.get("BADR_THREADS")
    cap = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(requested, cap))


def pareto_scan(problem, metric=None, grid_resolution=101, tol=1e-8, workers=1):
    """Solve the weighted fit on a simplex grid and record losses + metric.

    Sequential scans warm-start each fit from the previous grid point;
    parallel scans (workers > 1, capped by BADR_THREADS) solve points
    independently so the result does not depend on scheduling. Failed
    fits become missing rows, counted in ``n_failed``.
    """
    metric = problem.metric if metric is None else metric
    grid = simplex_grid(problem.n_groups, grid_resolution)

    def solve_point(lam, w0=None):
        w = solve_lower(problem, lam, tol=tol, w0=w0)
        return w, problem.group_losses(w), metric_value(metric, w, problem.data)

    kept, losses, fair, failed = [], [], [], 0
    if _worker_cap(workers) == 1:
        w = None
        for lam in grid:
            try:
                w, F, m = solve_point(lam, w0=w)
            except ConvergenceError:
                failed += 1
                continue
            kept.append(lam)
            losses.append(F)
            fair.append(m)
    else:
        with ThreadPoolExecutor(max_workers=_worker_cap(workers)) as pool:
            results = list(pool.map(lambda lam: _try_point(solve_point, lam), grid))
        for lam, res in zip(grid, results):
            if res is None:
                failed += 1
                continue
            kept.append(lam)
            losses.append(res[1])
            fair.append(res[2])
    return ScanResult(
        lam=np.array(kept).reshape(len(kept), problem.n_groups),
        losses=np.array(losses).reshape(len(kept), problem.n_groups),
        fairness=np.array(fair),
        n_failed=failed,
    )


def _try_point(solve_point, lam):
    try:
        return solve_point(lam)
    except ConvergenceError:
        return None


@dataclass
class StrategyResult:
    name: str
    lam: list
    train_fairness: float
    test_fairness: float
    train_score: float
    test_score: float
    train_group_losses: list
    test_group_losses: list
    dominated: bool = False


@dataclass
class EvalReport:
    """Per-strategy evaluation on a shared train/test split."""

    task: str
    metric_kind: str
    score_kind: str
    rows: list = field(default_factory=list)

    def to_dict(self):
        return {
            "task": self.task,
            "metric": self.metric_kind,
            "score_kind": self.score_kind,
            "strategies": [vars(r).copy() for r in self.rows],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        report = cls(task=data["task"], metric_kind=data["metric"], score_kind=data["score_kind"])
        for r in data["strategies"]:
            report.rows.append(StrategyResult(**r))
        return report

    def header(self):
        S = len(self.rows[0].lam) if self.rows else 0
        return (
            ["strategy"]
            + [f"lambda_{a}" for a in range(S)]
            + ["train_fairness", "test_fairness", f"train_{self.score_kind}", f"test_{self.score_kind}"]
            + [f"train_F_{a}" for a in range(S)]
            + [f"test_F_{a}" for a in range(S)]
            + ["dominated"]
        )

    def csv_rows(self):
        for r in self.rows:
            yield (
                [r.name]
                + list(r.lam)
                + [r.train_fairness, r.test_fairness, r.train_score, r.test_score]
                + list(r.train_group_losses)
                + list(r.test_group_losses)
                + [r.dominated]
            )


def report(problem, metric, strategies, test_ds):
    """Evaluate fitted strategies on the training problem and a test set.

    ``strategies`` maps name -> (lam, w). Dominance flags are computed
    within the strategy set on the training group losses.
    """
    metric = problem.metric if metric is None else metric
    test_problem = problem.with_data(test_ds)
    rep = EvalReport(
        task=problem.data.task,
        metric_kind=metric.kind,
        score_kind="accuracy" if problem.data.task == "classification" else "rmse",
    )
    train_losses = []
    for name, (lam, w) in strategies.items():
        tr_F = problem.group_losses(w)
        te_F = test_problem.group_losses(w)
        train_losses.append(tr_F)
        rep.rows.append(
            StrategyResult(
                name=name,
                lam=[float(x) for x in lam],
                train_fairness=metric_value(metric, w, problem.data),
                test_fairness=metric_value(metric, w, test_ds),
                train_score=score(w, problem.data),
                test_score=score(w, test_ds),
                train_group_losses=[float(x) for x in tr_F],
                test_group_losses=[float(x) for x in te_F],
            )
        )
    if train_losses:
        for row, flag in zip(rep.rows, dominance_flags(train_losses)):
            row.dominated = bool(flag)
    return rep
