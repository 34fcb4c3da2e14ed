"""Shared dataset builders for the test suite."""

import numpy as np

from schemamatch.core import BINARY, CONTINUOUS, Dataset, FeatureMeta


def make_dataset(values, mapped_count=0, names=None, kinds=None, name="T"):
    """Dataset from a raw array with auto-generated feature names."""
    values = np.asarray(values, dtype=np.float64)
    p = values.shape[1]
    if names is None:
        names = [f"c{i}" for i in range(p)]
    if kinds is None:
        kinds = [CONTINUOUS] * p
    feats = tuple(FeatureMeta(name=n, kind=k) for n, k in zip(names, kinds))
    return Dataset(name=name, values=values, features=feats, mapped_count=mapped_count)


def correlated_pair(n, p, k, seed=0, noise=0.1):
    """Two row-disjoint datasets drawn from one correlated source, first k
    columns mapped. Returns (ds_a, ds_b)."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((p, max(2, p // 2)))
    cov = w @ w.T + np.eye(p)
    chol = np.linalg.cholesky(cov)
    x = rng.standard_normal((2 * n, p)) @ chol.T + noise * rng.standard_normal((2 * n, p))
    names = [f"c{i}" for i in range(p)]
    ds_a = make_dataset(x[:n], mapped_count=k, names=names, name="A")
    ds_b = make_dataset(x[n:], mapped_count=k, names=names, name="B")
    return ds_a, ds_b
