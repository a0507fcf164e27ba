"""Euclidean projection onto the unit probability simplex and simplex helpers.

Group weights are plain 1-d numpy arrays lying on the simplex
{lam : lam_a >= 0, sum(lam) = 1}.
"""

import numpy as np

#: tolerance used when validating that a vector lies on the simplex
WEIGHT_TOL = 1e-9


def project_simplex(x):
    """Euclidean projection of ``x`` onto the unit probability simplex.

    Sort-based O(S log S) algorithm: find the threshold theta from the
    sorted cumulative sums, clamp, and renormalize the last bit of
    floating-point drift so the output sums to one exactly enough for
    downstream checks. Idempotent on simplex points.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("project_simplex expects a non-empty 1-d vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("project_simplex requires finite entries")
    s = np.sort(x)[::-1]
    cumsum = np.cumsum(s) - 1.0
    ks = np.arange(1, x.size + 1)
    mask = s - cumsum / ks > 0
    k = int(np.nonzero(mask)[0][-1])
    theta = cumsum[k] / (k + 1)
    out = np.maximum(x - theta, 0.0)
    return out / out.sum()


def simplex_vertex(a, n_groups):
    """Vertex e_a of the simplex over ``n_groups`` coordinates."""
    if not 0 <= a < n_groups:
        raise ValueError(f"group id {a} out of range for {n_groups} groups")
    out = np.zeros(n_groups)
    out[a] = 1.0
    return out


def uniform(n_groups):
    """Barycenter of the simplex, (1/S, ..., 1/S)."""
    if n_groups < 1:
        raise ValueError("need at least one group")
    return np.full(n_groups, 1.0 / n_groups)


def check_weights(lam, n_groups=None):
    """Validate that ``lam`` lies on the simplex (within WEIGHT_TOL)."""
    lam = np.asarray(lam, dtype=float)
    if n_groups is not None and lam.shape != (n_groups,):
        raise ValueError(f"expected {n_groups} group weights, got shape {lam.shape}")
    if lam.min(initial=0.0) < -WEIGHT_TOL or abs(lam.sum() - 1.0) > WEIGHT_TOL:
        raise ValueError("group weights are off the probability simplex")
    return lam
