"""Tabular datasets partitioned by sensitive group.

A :class:`Dataset` holds a feature matrix, a target vector and an integer
group label per row. Groups are derived from one or more sensitive columns
by crossing their observed value combinations, ordered lexicographically.
Classification targets are encoded as +/-1 ({0,1} inputs are remapped).

CSV contract: comma separated, UTF-8, mandatory header row, "." decimal
point, no quoting of numeric cells.
"""

import csv

import numpy as np


class Dataset:
    """Immutable design matrix + targets + group partition.

    Parameters
    ----------
    X : (n, d) array of features (a standardized dataset carries the
        intercept column of ones last).
    y : (n,) targets; exactly +/-1 for classification, real for regression.
    groups : (n,) integer labels in {0..S-1}.
    task : "classification" or "regression".
    """

    def __init__(self, X, y, groups, task):
        X = np.ascontiguousarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        groups = np.asarray(groups, dtype=int)
        if task not in ("classification", "regression"):
            raise ValueError(f"unknown task {task!r}")
        if X.ndim != 2 or y.shape != (X.shape[0],) or groups.shape != (X.shape[0],):
            raise ValueError("X, y and groups have inconsistent shapes")
        if X.shape[0] == 0:
            raise ValueError("dataset is empty")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        if task == "classification" and not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("classification targets must be exactly +/-1")
        n_groups = int(groups.max()) + 1
        if groups.min() < 0:
            raise ValueError("group labels must be non-negative")
        index = tuple(np.flatnonzero(groups == a) for a in range(n_groups))
        if any(idx.size == 0 for idx in index):
            raise ValueError("every group label in {0..S-1} must be non-empty")
        for arr in (X, y, groups):
            arr.flags.writeable = False
        self.X = X
        self.y = y
        self.groups = groups
        self.group_index = index
        self.task = task

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def n_groups(self):
        return len(self.group_index)

    def group_sizes(self):
        return np.array([idx.size for idx in self.group_index])

    def block(self, a):
        """Cached (X_a, y_a) rows of group ``a`` (gathered once, reused)."""
        if not 0 <= a < self.n_groups:
            raise ValueError(f"unknown group id {a}")
        blocks = getattr(self, "_blocks", None)
        if blocks is None:
            blocks = self._blocks = {}
        if a not in blocks:
            idx = self.group_index[a]
            Xa, ya = self.X[idx], self.y[idx]
            Xa.flags.writeable = False
            ya.flags.writeable = False
            blocks[a] = (Xa, ya)
        return blocks[a]

    def subset(self, indices):
        """New Dataset restricted to ``indices`` (all groups must survive)."""
        indices = np.asarray(indices, dtype=int)
        return Dataset(self.X[indices], self.y[indices], self.groups[indices], self.task)


def load_csv(path, target_col, sensitive_cols, task):
    """Load a CSV file into a :class:`Dataset`.

    Sensitive columns are crossed into a single group label: every observed
    combination of values becomes one group, ordered lexicographically by
    value tuple. Features are all remaining columns and must be numeric.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row is mandatory") from None
        rows = [row for row in reader if row]

    columns = {name: i for i, name in enumerate(header)}
    for name in [target_col, *sensitive_cols]:
        if name not in columns:
            raise ValueError(f"column {name!r} not found in {path} (header: {header})")
    feature_names = [c for c in header if c != target_col and c not in sensitive_cols]
    if not feature_names:
        raise ValueError("no feature columns left after removing target and sensitive columns")

    def parse(cell, row_idx, col):
        try:
            return float(cell)
        except ValueError:
            raise ValueError(
                f"non-numeric value {cell!r} in column {col!r} at data row {row_idx}"
            ) from None

    n = len(rows)
    if n == 0:
        raise ValueError(f"{path}: no data rows")
    X = np.empty((n, len(feature_names)))
    y = np.empty(n)
    sens = []
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"data row {i} has {len(row)} cells, header has {len(header)}")
        for j, name in enumerate(feature_names):
            X[i, j] = parse(row[columns[name]], i, name)
        y[i] = parse(row[columns[target_col]], i, target_col)
        sens.append(tuple(row[columns[c]] for c in sensitive_cols))

    combos = sorted(set(sens))
    label_of = {combo: a for a, combo in enumerate(combos)}
    groups = np.array([label_of[s] for s in sens])

    if task == "classification":
        values = set(np.unique(y))
        if values <= {0.0, 1.0}:
            y = np.where(y > 0.5, 1.0, -1.0)
        elif not values <= {-1.0, 1.0}:
            raise ValueError(f"classification targets must be in {{0,1}} or {{-1,1}}, got {sorted(values)}")
    return Dataset(X, y, groups, task)


def standardize(ds):
    """Zero-mean unit-variance features plus a final intercept column of ones.

    Population (1/n) variance convention; zero-variance columns map to all
    zeros so the output dimension stays predictable.
    """
    if ds.n < 2:
        raise ValueError("standardize needs at least 2 rows")
    mean = ds.X.mean(axis=0)
    std = ds.X.std(axis=0)
    centered = ds.X - mean
    Z = np.where(std > 0.0, centered / np.where(std > 0.0, std, 1.0), 0.0)
    X = np.hstack([Z, np.ones((ds.n, 1))])
    return Dataset(X, ds.y, ds.groups, ds.task)


def train_test_split(ds, train_frac, seed):
    """Deterministic stratified split into (train, test).

    The train split gets floor(train_frac * n) rows, apportioned across
    groups by largest remainder so every group keeps samples on both sides;
    a group that would end up empty on either side raises a stratification
    error.
    """
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must lie in (0, 1)")
    sizes = ds.group_sizes()
    n_train = int(np.floor(train_frac * ds.n))
    quota = train_frac * sizes
    take = np.floor(quota).astype(int)
    remainder = quota - take
    # largest remainder first, ties by group index
    order = np.lexsort((np.arange(ds.n_groups), -remainder))
    for a in order[: n_train - int(take.sum())]:
        take[a] += 1
    if np.any(take == 0) or np.any(take == sizes):
        bad = int(np.flatnonzero((take == 0) | (take == sizes))[0])
        raise ValueError(
            f"stratification error: group {bad} would lose all samples in one split"
        )
    if n_train == 0 or n_train == ds.n:
        raise ValueError("both splits must be non-empty")

    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for a, idx in enumerate(ds.group_index):
        perm = rng.permutation(idx)
        train_idx.append(perm[: take[a]])
        test_idx.append(perm[take[a]:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return ds.subset(train_idx), ds.subset(test_idx)


def synth_biased(n_per_group, d, shift, seed, task="classification"):
    """Synthetic dataset whose groups disagree about the best predictor.

    Features are standard Gaussian. Each group labels its points with its
    own hyperplane, obtained by rotating a base direction in the first two
    coordinates and shifting the bias, both proportionally to ``shift``.
    At shift=0 all groups share one distribution, so group losses agree in
    expectation. Fixed seed gives a byte-identical dataset.
    """
    n_per_group = [int(k) for k in n_per_group]
    if d < 1 or any(k < 2 for k in n_per_group):
        raise ValueError("need d >= 1 and at least 2 samples per group")
    S = len(n_per_group)
    rng = np.random.default_rng(seed)
    blocks_X, blocks_y, blocks_g = [], [], []
    base = np.ones(d) / np.sqrt(d)
    for a, k in enumerate(n_per_group):
        theta = 0.0 if S == 1 else shift * (2.0 * a / (S - 1) - 1.0)
        w = base.copy()
        if d >= 2:
            c, s = np.cos(theta), np.sin(theta)
            w[0], w[1] = c * base[0] - s * base[1], s * base[0] + c * base[1]
        bias = 0.5 * theta
        X = rng.normal(size=(k, d))
        signal = X @ w + bias
        noise = 0.3 * rng.normal(size=k)
        if task == "classification":
            y = np.where(signal + noise >= 0.0, 1.0, -1.0)
        else:
            y = signal + noise
        blocks_X.append(X)
        blocks_y.append(y)
        blocks_g.append(np.full(k, a))
    return Dataset(
        np.vstack(blocks_X), np.concatenate(blocks_y), np.concatenate(blocks_g), task
    )
