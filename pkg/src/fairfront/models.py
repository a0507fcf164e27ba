"""Strongly convex per-sample losses and the weighted group objective.

Three loss families over linear predictors f(w, x) = <w, x>, each with an
l2 term (reg/2)*||w||^2 inside the per-sample loss:

    ridge     (y - <w,x>)^2
    logistic  log(1 + exp(-y <w,x>))
    svm2      max(0, 1 - y <w,x>)^2

Group losses F_a average the per-sample loss over group a; the weighted
objective is F(w, lam) = sum_a lam_a F_a(w). All per-sample reductions run
in canonical (sorted) order so values and gradients are bit-identical
under any permutation of the sample rows.
"""

from dataclasses import dataclass

import numpy as np

from .simplex import check_weights

LOSS_KINDS = ("ridge", "logistic", "svm2")


@dataclass(frozen=True)
class LossModel:
    """Loss family plus l2 regularization strength.

    reg > 0 makes every group loss strongly convex with modulus >= reg.
    """

    kind: str
    reg: float = 0.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}, expected one of {LOSS_KINDS}")
        if not self.reg >= 0.0:
            raise ValueError("reg must be >= 0")


def _expit(z):
    # overflow-safe sigmoid
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _psum(a, axis=0):
    # permutation-invariant sum: reduce in sorted order
    return np.sort(a, axis=axis).sum(axis=axis)


def _check_dim(w, d):
    w = np.asarray(w, dtype=float)
    if w.shape != (d,):
        raise ValueError(f"dimension mismatch: w has shape {w.shape}, features have d={d}")
    return w


def sample_loss(model, w, x, y):
    """Per-sample loss at one (x, y)."""
    x = np.asarray(x, dtype=float)
    w = _check_dim(w, x.shape[0])
    p = float(x @ w)
    reg_term = 0.5 * model.reg * float(w @ w)
    if model.kind == "ridge":
        return (y - p) ** 2 + reg_term
    m = y * p
    if y not in (-1.0, 1.0):
        raise ValueError("logistic/svm2 targets must be +/-1")
    if model.kind == "logistic":
        return float(np.log1p(np.exp(-abs(m))) + max(-m, 0.0)) + reg_term
    return max(0.0, 1.0 - m) ** 2 + reg_term


def _loss_terms(model, w, Xa, ya):
    """Per-sample loss values for one group block."""
    p = Xa @ w
    if model.kind == "ridge":
        r = ya - p
        return r * r
    m = ya * p
    if model.kind == "logistic":
        return np.log1p(np.exp(-np.abs(m))) + np.maximum(-m, 0.0)
    h = np.maximum(0.0, 1.0 - m)
    return h * h


def _grad_coefs(model, w, Xa, ya):
    """Coefficients c_i with d/dw sum_i loss_i = X_a^T c (data term only)."""
    p = Xa @ w
    if model.kind == "ridge":
        return 2.0 * (p - ya)
    m = ya * p
    if model.kind == "logistic":
        return -ya * _expit(-m)
    # squared hinge: derivative 0 at the kink (hinge inactive)
    return -2.0 * ya * np.maximum(0.0, 1.0 - m)


def _curv_coefs(model, w, Xa, ya):
    """Coefficients c_i with the group Hessian X_a^T diag(c) X_a (data term)."""
    if model.kind == "ridge":
        return np.full(Xa.shape[0], 2.0)
    m = ya * (Xa @ w)
    if model.kind == "logistic":
        s = _expit(m)
        return s * (1.0 - s)
    return 2.0 * (1.0 - m > 0.0).astype(float)


def group_loss(model, w, ds, a):
    """F_a(w): average per-sample loss over group ``a``."""
    Xa, ya = ds.block(a)
    w = _check_dim(w, ds.d)
    data = _psum(_loss_terms(model, w, Xa, ya)) / Xa.shape[0]
    return float(data + 0.5 * model.reg * (w @ w))


def group_grad(model, w, ds, a):
    """Gradient of F_a at w."""
    Xa, ya = ds.block(a)
    w = _check_dim(w, ds.d)
    c = _grad_coefs(model, w, Xa, ya)
    return _psum(Xa * c[:, None]) / Xa.shape[0] + model.reg * w


def group_loss_vector(model, w, ds):
    """All group losses as a length-S vector."""
    return np.array([group_loss(model, w, ds, a) for a in range(ds.n_groups)])


def cross_derivative(model, w, ds):
    """S x d matrix whose row a is the group gradient of F_a at w.

    This is both the Jacobian of the group-loss vector and the mixed
    second derivative of the weighted objective in (w, lam).
    """
    return np.array([group_grad(model, w, ds, a) for a in range(ds.n_groups)])


def scalarized_loss(model, w, ds, lam):
    """F(w, lam) = sum_a lam_a F_a(w)."""
    lam = check_weights(lam, ds.n_groups)
    return float(group_loss_vector(model, w, ds) @ lam)


def scalarized_grad(model, w, ds, lam):
    """Gradient of the weighted objective; exactly cross_derivative(w)^T lam."""
    lam = check_weights(lam, ds.n_groups)
    return cross_derivative(model, w, ds).T @ lam


def scalarized_hvp(model, w, ds, lam, v):
    """Matrix-free product (sum_a lam_a Hess F_a(w)) v."""
    lam = check_weights(lam, ds.n_groups)
    w = _check_dim(w, ds.d)
    v = _check_dim(v, ds.d)
    out = model.reg * v
    for a in range(ds.n_groups):
        Xa, ya = ds.block(a)
        c = _curv_coefs(model, w, Xa, ya)
        out = out + (lam[a] / Xa.shape[0]) * _psum(Xa * (c * (Xa @ v))[:, None])
    return out
