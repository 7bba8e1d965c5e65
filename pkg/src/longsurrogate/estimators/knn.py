"""Nearest-neighbour variant of the iterative surrogate forecaster."""

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ArgumentError
from ..panel import arm_mean_differences
from ..trajectory import observed_then_extrapolated
from .common import experimental_variables, iterate_forecast, lagged_design


class NeighbourRegressor:
    """Mean target of the k nearest training rows (Euclidean distance).

    Ties at the k-th distance go to the lowest training row index.
    """

    def __init__(self, features, targets, k, workers=1):
        self.features = np.asarray(features, dtype=float)
        self.targets = np.asarray(targets, dtype=float)
        n = self.features.shape[0]
        if not 1 <= k <= n:
            raise ArgumentError(f"k must lie in 1..{n}", module="estimators")
        self.k = int(k)
        self.workers = workers
        self._tree = cKDTree(self.features) if self.k < n else None

    def neighbours(self, queries):
        queries = np.asarray(queries, dtype=float)
        n = self.features.shape[0]
        if self._tree is None:
            return np.broadcast_to(np.arange(n), (queries.shape[0], n))
        dist, idx = self._tree.query(queries, k=self.k + 1, workers=self.workers)
        kth, nxt = dist[:, self.k - 1], dist[:, self.k]
        # The tree orders equal distances arbitrarily; rows whose k-th and
        # (k+1)-th distances tie are resolved exactly by brute force.
        out = np.sort(idx[:, :self.k], axis=1)
        suspect = np.nonzero(kth == nxt)[0]
        for r in suspect:
            d2 = np.sum((self.features - queries[r]) ** 2, axis=1)
            order = np.lexsort((np.arange(n), d2))
            out[r] = np.sort(order[:self.k])
        return out

    def predict(self, queries):
        nb = self.neighbours(queries)
        return self.targets[nb].mean(axis=1)


def estimate_knn(ds, k=20, workers=1):
    """kNN surrogate forecaster.

    Each one-step map predicts the mean period-T_E variables of the ``k``
    same-arm units whose periods 1..T_E-1 are closest to the query.
    """
    te = ds.t_experimental
    hist = experimental_variables(ds)
    means = {}
    for w in (1, 0):
        design = lagged_design(ds, w)
        model = NeighbourRegressor(design.features, design.targets, k, workers=workers)
        paths = iterate_forecast(hist[ds.arm_mask(w)], None, te, ds.t_total, model.predict)
        means[w] = paths[:, te:, 0].mean(axis=0)
    return observed_then_extrapolated(arm_mean_differences(ds, 1, te), means[1] - means[0],
                                      "knn", {"k": int(k)})
