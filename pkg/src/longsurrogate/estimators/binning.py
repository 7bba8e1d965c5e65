"""Per-dimension quantile binning for exact matching on continuous data."""

import numpy as np

from ..errors import ArgumentError


class QuantileBinning:
    """Discretize each column into at most ``n_bins`` quantile bins.

    Columns with no more distinct values than ``n_bins`` are treated as
    categorical: each distinct value gets its own bin.

    Parameters
    ----------
    n_bins : int, default 5
    """

    def __init__(self, n_bins=5):
        if int(n_bins) < 1:
            raise ArgumentError("n_bins must be at least 1", module="estimators")
        self.n_bins = int(n_bins)
        self.edges_ = None

    def fit(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        edges = []
        for col in values.T:
            col = col[np.isfinite(col)]
            uniq = np.unique(col)
            if uniq.size <= self.n_bins:
                edges.append((uniq[:-1] + uniq[1:]) / 2.0)
            else:
                qs = np.quantile(col, np.linspace(0.0, 1.0, self.n_bins + 1)[1:-1])
                edges.append(np.unique(qs))
        self.edges_ = edges
        return self

    @property
    def bins_per_dimension(self):
        return [e.size + 1 for e in self.edges_]

    def transform(self, values):
        if self.edges_ is None:
            raise ArgumentError("binning is not fitted", module="estimators")
        values = np.asarray(values, dtype=float)
        shape = values.shape
        flat = values.reshape(-1, shape[-1])
        codes = np.empty(flat.shape, dtype=np.int64)
        for d, e in enumerate(self.edges_):
            codes[:, d] = np.searchsorted(e, flat[:, d], side="right")
        return codes.reshape(shape)

    def fit_transform(self, values):
        return self.fit(values).transform(values)


def encode_states(codes):
    """Map code vectors (..., K) to dense state ids.

    Returns
    -------
    ids : ndarray of int, shape codes.shape[:-1]
    table : ndarray (S, K)
        Code vector of each state, in lexicographic order.
    """
    codes = np.asarray(codes, dtype=np.int64)
    flat = codes.reshape(-1, codes.shape[-1])
    table, inverse = np.unique(flat, axis=0, return_inverse=True)
    return inverse.reshape(codes.shape[:-1]), table


def nearest_supported(table, supported):
    """For each state, the nearest state with support (itself if supported).

    Distance is Euclidean on bin codes; ties go to the lowest state index.
    Returns -1 everywhere if nothing is supported.
    """
    supported = np.asarray(supported, dtype=bool)
    out = np.arange(table.shape[0])
    cand = np.nonzero(supported)[0]
    if cand.size == 0:
        return np.full(table.shape[0], -1)
    for s in np.nonzero(~supported)[0]:
        d2 = np.sum((table[cand] - table[s]) ** 2, axis=1)
        out[s] = cand[int(np.argmin(d2))]
    return out
