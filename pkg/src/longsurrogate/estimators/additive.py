"""Linear additive estimator for panels with observational history.

Assumes the long-run effect of continuous treatment is the sum of the
effects of treating each block of periods separately. Block effects are
estimated from treated units' pre-experiment plus experimental records,
and control-path outcomes from all-control windows (history of every unit
and the control arm's experimental periods). Expectations are exact sums
over the discrete state space.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ArgumentError, EstimationError
from .binning import QuantileBinning, encode_states, nearest_supported
from .discrete import ZERO_SUPPORT_POLICIES

ADVISORY = ("The additive estimator needs strong assumptions (no interaction "
            "between treatment blocks) and is not recommended in common settings; "
            "prefer the linear surrogate model unless additivity is known to hold.")


@dataclass(frozen=True)
class AdditiveEstimate:
    """Scalar horizon-T effect from the additive estimator."""

    estimate: float
    horizon: int
    breakpoints: tuple
    components: dict = field(default_factory=dict)
    advisory: str = ADVISORY

    def to_dict(self):
        return {"estimate": self.estimate, "horizon": self.horizon,
                "breakpoints": list(self.breakpoints), "components": self.components,
                "advisory": self.advisory}


def default_breakpoints(horizon, t_experimental):
    """Equal blocks of length T_E: t_k = k * T_E while t_k < horizon."""
    k = math.ceil(horizon / t_experimental) - 1
    return tuple(t_experimental * j for j in range(1, k + 1))


class _StateTable:
    def __init__(self, ds, n_bins, use_covariates):
        first = -ds.n_history
        s = ds.surrogate_range(first, ds.t_experimental)
        n, p, d = s.shape
        codes = QuantileBinning(n_bins).fit_transform(s.reshape(-1, d)).reshape(n, p, d)
        if use_covariates and ds.r_covariates:
            xc = QuantileBinning(n_bins).fit_transform(ds.covariates)
            codes = np.concatenate([codes, np.broadcast_to(xc[:, None, :],
                                                           (n, p, xc.shape[1]))], axis=2)
        self.ids, self.table = encode_states(codes)
        self.first = first
        self.n_states = self.table.shape[0]

    def at(self, period):
        return self.ids[:, period - self.first]


class _ConditionalMean:
    """Mean of a response grouped by state, with a zero-support policy."""

    def __init__(self, states, values, table, policy, label):
        n_states = table.shape[0]
        ok = np.isfinite(values)
        self.count = np.bincount(states[ok], minlength=n_states)
        sums = np.bincount(states[ok], weights=values[ok], minlength=n_states)
        self.mean = np.where(self.count > 0, sums / np.maximum(self.count, 1), np.nan)
        self.table, self.policy, self.label = table, policy, label
        self.remap = nearest_supported(table, self.count > 0)

    def __call__(self, states):
        states = np.asarray(states)
        bad = self.count[states] == 0
        if bad.any():
            if self.policy == "abort" or self.remap[0] < 0:
                s = int(states[np.argmax(bad)])
                raise EstimationError(
                    f"{self.label}: no support for state {s} (bin codes "
                    f"{self.table[s].tolist()})", module="estimators")
            states = np.where(bad, self.remap[states], states)
        return self.mean[states]


def _control_windows(ds, st, length):
    """(start state, end outcome) pairs over all-control windows of a length."""
    starts, ends = [], []
    te = ds.t_experimental
    for w, last_end in ((0, te), (1, 0)):
        mask = ds.arm_mask(w)
        for u in range(-ds.n_history, last_end - length + 1):
            starts.append(st.at(u)[mask])
            ends.append(ds.outcome_at(u + length)[mask])
    if not starts:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    return np.concatenate(starts), np.concatenate(ends)


def estimate_linear_additive(ds, breakpoints=None, n_bins=5, horizon=None,
                             zero_support="abort", use_covariates=False):
    """Additive-model estimate of the effect at ``horizon`` (default T).

    Parameters
    ----------
    ds : PanelDataset
        Must carry observational history (``n_history > 0``).
    breakpoints : sequence of int, optional
        Increasing block ends ``t_1 < ... < t_K < horizon``; every block
        length must be at most T_E. Defaults to equal blocks of T_E.
    n_bins : int
        Quantile bins per surrogate dimension.
    zero_support : {"abort", "nearest"}

    Returns
    -------
    AdditiveEstimate

    Raises
    ------
    ArgumentError
        If the history is too short for the requested blocks.
    """
    if zero_support not in ZERO_SUPPORT_POLICIES:
        raise ArgumentError(f"zero_support must be one of {ZERO_SUPPORT_POLICIES}",
                            module="estimators")
    te = ds.t_experimental
    horizon = ds.t_total if horizon is None else int(horizon)
    if not te < horizon <= ds.t_total:
        raise ArgumentError("horizon must lie beyond T_E and within T", module="estimators")
    bps = default_breakpoints(horizon, te) if breakpoints is None else tuple(int(b) for b in breakpoints)
    edges = (0, *bps, horizon)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ArgumentError("breakpoints must increase strictly inside (0, horizon)",
                            module="estimators")
    if any(b - a > te for a, b in zip(edges, edges[1:])):
        raise ArgumentError("every block must be no longer than T_E", module="estimators")
    depth = ds.n_history
    t_last = bps[-1] if bps else 0
    needed = max(t_last, horizon - te)
    if depth < needed or depth == 0:
        raise ArgumentError(
            f"observational history of {depth} periods is too short; need at least "
            f"{max(needed, 1)} for horizon {horizon} and blocks {list(bps)}",
            module="estimators")

    st = _StateTable(ds, n_bins, use_covariates)
    treated, control = ds.arm_mask(1), ds.arm_mask(0)
    s0_t = st.at(0)[treated]
    s0_c = st.at(0)[control]
    components = {}
    total = 0.0
    # Single-block effects: control before, treatment during block k, control after.
    for k, t_k in enumerate(bps, start=1):
        t_prev = edges[k - 1]
        dt = t_k - t_prev
        start = st.at(-t_prev)[treated]
        end = st.at(dt)[treated]
        counts = np.zeros((st.n_states, st.n_states))
        np.add.at(counts, (start, end), 1.0)
        support = counts.sum(axis=1)
        remap = nearest_supported(st.table, support > 0)
        src = s0_t
        if np.any(support[src] == 0):
            if zero_support == "abort":
                s = int(src[np.argmax(support[src] == 0)])
                raise EstimationError(f"block {k}: no treated units start in state {s}",
                                      module="estimators")
            src = np.where(support[src] == 0, remap[src], src)
        kernel = counts / np.maximum(support, 1)[:, None]
        ys, ye = _control_windows(ds, st, horizon - t_k)
        h_ctrl = _ConditionalMean(ys, ye, st.table, zero_support, f"control h[{horizon - t_k}]")
        reach = np.nonzero(kernel[src].sum(axis=0) > 0)[0]
        h_vals = np.zeros(st.n_states)
        h_vals[reach] = h_ctrl(reach)
        term = float(np.mean(kernel[src] @ h_vals))
        components[f"block_{k}"] = term
        total += term
    # Final block: control through t_K, treatment for the rest.
    h_mix = _ConditionalMean(st.at(-t_last)[treated], ds.outcome_at(horizon - t_last)[treated],
                             st.table, zero_support, "final block h")
    last_term = float(np.mean(h_mix(s0_t)))
    components[f"block_{len(bps) + 1}"] = last_term
    ys, ye = _control_windows(ds, st, horizon)
    h_all = _ConditionalMean(ys, ye, st.table, zero_support, f"control h[{horizon}]")
    baseline = float(np.mean(h_all(s0_c)))
    components["control_baseline"] = baseline
    estimate = total + last_term - (len(bps) + 1) * baseline
    return AdditiveEstimate(estimate=float(estimate), horizon=horizon, breakpoints=bps,
                            components=components)
