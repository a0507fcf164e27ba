"""Differentiable unfairness metrics with analytic gradients.

Seven metric families over linear predictions p_i = <w, x_i>:

    gv    variance of the group losses
    if    prediction gaps between cross-group pairs with similar targets
    dp    smoothed demographic parity (sigmoid rates + log-sum-exp spread)
    dm    squared covariance between sensitive label and prediction
    eop   smoothed equal opportunity (spread of smoothed TPRs)
    eod   eop plus the matching smoothed FPR spread
    hsic  squared empirical cross-covariance (linear kernel)

dp/eop/eod replace indicators by sigmoid(smooth * p) and hard max/min
spreads by log-sum-exp at the same sharpness, so every metric is
differentiable in w. Reductions over samples run in canonical order, so
values and gradients are bit-identical under row permutations (exact
individual-fairness path; the capped path is deterministic per dataset
layout).
"""

from dataclasses import dataclass

import numpy as np

from .models import LossModel, _expit, _psum, _check_dim, group_loss_vector, cross_derivative

METRIC_KINDS = ("gv", "if", "dp", "dm", "eop", "eod", "hsic")
CLASSIFICATION_ONLY = ("dm", "eop", "eod")
REGRESSION_ONLY = ("hsic",)


@dataclass
class FairnessMetric:
    """A metric family with its smoothing sharpness.

    smooth is the sigmoid/log-sum-exp sharpness for dp/eop/eod (ignored
    elsewhere). gv needs ``model`` to evaluate group losses. pair_cap
    bounds the number of individual-fairness pairs per group pair
    (None = exact); the subsample is seeded and fixed per dataset.
    """

    kind: str
    smooth: float = 20.0
    model: LossModel | None = None
    pair_cap: int | None = 2000
    pair_seed: int = 0

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}, expected one of {METRIC_KINDS}")
        if self.kind in ("dp", "eop", "eod") and not self.smooth > 0.0:
            raise ValueError("smooth must be > 0 for dp/eop/eod")


def _check_task(fm, ds):
    if fm.kind in CLASSIFICATION_ONLY and ds.task != "classification":
        raise ValueError(f"metric {fm.kind!r} handles classification tasks only")
    if fm.kind in REGRESSION_ONLY and ds.task != "regression":
        raise ValueError(f"metric {fm.kind!r} handles regression tasks only")


def _pmean(a, axis=0):
    return _psum(a, axis=axis) / a.shape[axis]


def _softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


def _logsumexp(z):
    m = z.max()
    return m + np.log(np.exp(z - m).sum())


def metric_value(fm, w, ds):
    """Value of the metric at w."""
    return _eval(fm, w, ds, need_grad=False)[0]


def metric_grad(fm, w, ds):
    """Gradient of the metric at w."""
    return _eval(fm, w, ds, need_grad=True)[1]


def _eval(fm, w, ds, need_grad):
    _check_task(fm, ds)
    w = _check_dim(w, ds.d)
    fn = {
        "gv": _group_variance,
        "if": _individual_fairness,
        "dp": _demographic_parity,
        "dm": _disparate_mistreatment,
        "eop": _equal_opportunity,
        "eod": _equalized_odds,
        "hsic": _hsic,
    }[fm.kind]
    return fn(fm, w, ds, need_grad)


def _group_variance(fm, w, ds, need_grad):
    if fm.model is None:
        raise ValueError("gv metric needs a LossModel reference")
    F = group_loss_vector(fm.model, w, ds)
    centered = F - F.mean()
    value = float(centered @ centered) / ds.n_groups
    if not need_grad:
        return value, None
    G = cross_derivative(fm.model, w, ds)
    grad = (2.0 / ds.n_groups) * (G.T @ centered)
    return value, grad


def _pair_subsample(fm, a, b, na, nb):
    rng = np.random.default_rng([fm.pair_seed, a, b])
    i = rng.integers(0, na, size=fm.pair_cap)
    j = rng.integers(0, nb, size=fm.pair_cap)
    return i, j


def _individual_fairness(fm, w, ds, need_grad):
    S = ds.n_groups
    total_pairs = 0.0
    value = 0.0
    grad = np.zeros(ds.d) if need_grad else None
    for a in range(S):
        Xa, ya = ds.block(a)
        pa = Xa @ w
        for b in range(a + 1, S):
            Xb, yb = ds.block(b)
            pb = Xb @ w
            na, nb = pa.size, pb.size
            total_pairs += na * nb
            if fm.pair_cap is not None and na * nb > fm.pair_cap:
                i, j = _pair_subsample(fm, a, b, na, nb)
                k = np.exp(-np.abs(ya[i] - yb[j]))
                dlt = pa[i] - pb[j]
                scale = (na * nb) / fm.pair_cap
                value += scale * _psum(k * dlt * dlt)
                if need_grad:
                    kd = k * dlt
                    grad += 2.0 * scale * (
                        _psum(Xa[i] * kd[:, None]) - _psum(Xb[j] * kd[:, None])
                    )
            else:
                k = np.exp(-np.abs(ya[:, None] - yb[None, :]))
                dlt = pa[:, None] - pb[None, :]
                value += _psum((k * dlt * dlt).ravel())
                if need_grad:
                    kd = k * dlt
                    grad += 2.0 * (
                        _psum(Xa * _psum(kd, axis=1)[:, None])
                        - _psum(Xb * _psum(kd.T, axis=1)[:, None])
                    )
    if total_pairs == 0:  # single group: no cross-group pairs
        return 0.0, (np.zeros(ds.d) if need_grad else None)
    value /= total_pairs
    if need_grad:
        grad /= total_pairs
    return float(value), grad


def _sigmoid_rates(fm, w, ds, label):
    """Per-group mean of sigmoid(smooth * p) over samples with target ``label``.

    label=None averages over the whole group. Returns (rates, per-group
    gradient pieces) with gradient pieces left lazy as (X_sel, weights, count).
    """
    rho = fm.smooth
    rates = np.empty(ds.n_groups)
    pieces = []
    for a in range(ds.n_groups):
        Xa, ya = ds.block(a)
        if label is None:
            sel = slice(None)
            count = Xa.shape[0]
        else:
            sel = ya == label
            count = int(np.count_nonzero(sel))
            if count == 0:
                kind = "positive" if label == 1.0 else "negative"
                raise ValueError(f"group {a} has no {kind} samples (empty rate denominator)")
        z = rho * (Xa[sel] @ w)
        sig = _expit(z)
        rates[a] = _psum(sig) / count
        pieces.append((Xa[sel], sig * (1.0 - sig), count))
    return rates, pieces


def _rate_grad(rho, pieces, coefs):
    grad = 0.0
    for (Xs, sprime, count), c in zip(pieces, coefs):
        grad = grad + (c * rho / count) * _psum(Xs * sprime[:, None])
    return grad


def _demographic_parity(fm, w, ds, need_grad):
    rho = fm.smooth
    rates, pieces = _sigmoid_rates(fm, w, ds, label=None)
    z = rates - rates.mean()
    u = np.sqrt(z * z)
    value = _logsumexp(rho * u) / rho
    if not need_grad:
        return float(value), None
    c = _softmax(rho * u) * np.sign(z)
    coefs = c - c.mean()
    return float(value), _rate_grad(rho, pieces, coefs)


def _spread(rho, rates):
    """log-sum-exp spread of a rate vector at sharpness rho, with softmax coefs."""
    value = (_logsumexp(rho * rates) - _logsumexp(-rho * rates)) / rho
    coefs = _softmax(rho * rates) + _softmax(-rho * rates)
    return value, coefs


def _equal_opportunity(fm, w, ds, need_grad):
    rho = fm.smooth
    tpr, pieces = _sigmoid_rates(fm, w, ds, label=1.0)
    value, coefs = _spread(rho, tpr)
    if not need_grad:
        return float(value), None
    return float(value), _rate_grad(rho, pieces, coefs)


def _equalized_odds(fm, w, ds, need_grad):
    rho = fm.smooth
    tpr, tpr_pieces = _sigmoid_rates(fm, w, ds, label=1.0)
    fpr, fpr_pieces = _sigmoid_rates(fm, w, ds, label=-1.0)
    v1, c1 = _spread(rho, tpr)
    v2, c2 = _spread(rho, fpr)
    if not need_grad:
        return float(v1 + v2), None
    return float(v1 + v2), _rate_grad(rho, tpr_pieces, c1) + _rate_grad(rho, fpr_pieces, c2)


def _centered_covariance(w, ds, norm):
    """cov = (1/norm) sum_i (s_i - sbar)(p_i - pbar) and its gradient pieces."""
    p = ds.X @ w
    s = ds.groups.astype(float)
    sc = s - _pmean(s)
    pc = p - _pmean(p)
    cov = _psum(sc * pc) / norm
    return cov, sc


def _cov_grad(ds, sc, norm):
    xbar = _pmean(ds.X, axis=0)
    return (_psum(ds.X * sc[:, None]) - _psum(sc) * xbar) / norm


def _disparate_mistreatment(fm, w, ds, need_grad):
    cov, sc = _centered_covariance(w, ds, ds.n)
    value = cov * cov
    if not need_grad:
        return float(value), None
    return float(value), 2.0 * cov * _cov_grad(ds, sc, ds.n)


def _hsic(fm, w, ds, need_grad):
    cov, sc = _centered_covariance(w, ds, ds.n - 1)
    value = cov * cov
    if not need_grad:
        return float(value), None
    return float(value), 2.0 * cov * _cov_grad(ds, sc, ds.n - 1)
