"""Nonparametric plug-in estimator over discretized surrogate states.

Surrogates are binned into a finite state space. For each arm, the kernel
G_d(s) is the empirical distribution of the state at period d among units
whose period-0 state is s, and h_d(s) is their mean outcome at period d.
A horizon t > T_E is reached by chaining full blocks of length T_E and
applying h at the final (possibly shorter) block. The nested expectation is
evaluated by Monte-Carlo sampling of state paths.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError, EstimationError
from ..numerics.rng import as_stream
from ..panel import arm_mean_differences
from ..trajectory import observed_then_extrapolated
from .binning import QuantileBinning, encode_states, nearest_supported

ZERO_SUPPORT_POLICIES = ("abort", "nearest")


@dataclass(frozen=True)
class ArmKernel:
    """Empirical kernels anchored at period 0 for one arm.

    Attributes
    ----------
    support : ndarray (S,)
        Number of arm units starting in each state.
    transitions : dict of int -> ndarray (S, S)
        Row-normalized successor distributions after ``d`` periods; rows of
        unsupported states are zero.
    outcome_means : dict of int -> ndarray (S,)
        Mean outcome at period ``d`` by starting state (NaN if unsupported).
    start_states : ndarray
        Period-0 state of every arm unit.
    """

    arm: int
    support: np.ndarray
    transitions: dict
    outcome_means: dict
    start_states: np.ndarray

    @property
    def zero_support(self):
        return np.nonzero(self.support == 0)[0]


@dataclass(frozen=True)
class DiscreteKernel:
    """State space and per-arm kernels.

    ``state_codes[s]`` holds the bin code of each surrogate dimension (and
    covariate cell, if used) for state ``s``.
    """

    state_codes: np.ndarray
    states: np.ndarray
    treated: ArmKernel
    control: ArmKernel
    bins_per_dimension: tuple

    @property
    def n_states(self):
        return self.state_codes.shape[0]

    def arm(self, w):
        return self.treated if w == 1 else self.control


def discretize_panel(ds, n_bins=5, use_covariates=False, first=0, last=None):
    """State id of every unit at periods first..last (default 0..T_E)."""
    last = ds.t_experimental if last is None else last
    if last > ds.t_experimental:
        raise ArgumentError("cannot discretize unobserved periods", module="estimators")
    s = ds.surrogate_range(first, last)
    n, p, d = s.shape
    binning = QuantileBinning(n_bins).fit(s.reshape(-1, d))
    codes = binning.transform(s)
    bins = list(binning.bins_per_dimension)
    if use_covariates and ds.r_covariates:
        xb = QuantileBinning(n_bins).fit(ds.covariates)
        xcodes = xb.transform(ds.covariates)
        codes = np.concatenate([codes, np.broadcast_to(xcodes[:, None, :],
                                                       (n, p, xcodes.shape[1]))], axis=2)
        bins += list(xb.bins_per_dimension)
    states, table = encode_states(codes)
    return states, table, tuple(bins)


def _arm_kernel(states, outcomes, mask, n_states, lags, arm):
    start = states[mask, 0]
    support = np.bincount(start, minlength=n_states)
    transitions, means = {}, {}
    safe = np.where(support > 0, support, 1)
    for d in lags:
        counts = np.zeros((n_states, n_states))
        np.add.at(counts, (start, states[mask, d]), 1.0)
        transitions[d] = counts / safe[:, None]
        sums = np.bincount(start, weights=outcomes[mask, d - 1], minlength=n_states)
        m = sums / safe
        m[support == 0] = np.nan
        means[d] = m
    return ArmKernel(arm=arm, support=support, transitions=transitions,
                     outcome_means=means, start_states=start)


def build_discrete_kernel(ds, n_bins=5, use_covariates=False):
    """Discretize observed periods and tabulate per-arm kernels."""
    states, table, bins = discretize_panel(ds, n_bins, use_covariates)
    te = ds.t_experimental
    y = ds.outcome_range(1, te)
    lags = range(1, te + 1)
    arms = {w: _arm_kernel(states, y, ds.arm_mask(w), table.shape[0], lags, w)
            for w in (1, 0)}
    return DiscreteKernel(state_codes=table, states=states, treated=arms[1], control=arms[0],
                          bins_per_dimension=bins)


def horizon_schedule(t, t_experimental):
    """Split horizon t into full blocks of T_E and a final remainder.

    Returns ``(n_full_blocks, remainder)`` with ``1 <= remainder <= T_E``.
    """
    k = (t - 1) // t_experimental
    return k, t - k * t_experimental


def _resolve(states, kernel, table, policy, remap):
    bad = kernel.support[states] == 0
    if not bad.any():
        return states
    if policy == "abort":
        s = int(states[np.argmax(bad)])
        raise EstimationError(
            f"arm {kernel.arm}: simulation reached state {s} (bin codes "
            f"{table[s].tolist()}) with no units; try coarser binning or "
            "zero_support='nearest'", module="estimators")
    return np.where(bad, remap[states], states)


def simulate_arm(kernel, table, t, t_experimental, mc_draws, gen, policy="abort"):
    """Monte-Carlo mean outcome at horizon t for one arm.

    Paths start from every occupied period-0 state, with draws allocated in
    proportion to the state's share of the arm, so the average over starting
    units is exact and only the chain is sampled.

    Returns
    -------
    estimate, standard_error : float
    """
    k, rem = horizon_schedule(t, t_experimental)
    remap = nearest_supported(table, kernel.support > 0)
    occupied = np.nonzero(kernel.support)[0]
    share = kernel.support[occupied] / kernel.support.sum()
    draws = np.maximum(2, np.round(mc_draws * share).astype(np.int64))
    state = np.repeat(occupied, draws)
    group = np.repeat(np.arange(occupied.size), draws)
    cum = np.cumsum(kernel.transitions[t_experimental], axis=1) if k else None
    for _ in range(k):
        u = gen.random(state.shape[0])
        nxt = (u[:, None] >= cum[state]).sum(axis=1)
        state = _resolve(np.minimum(nxt, table.shape[0] - 1), kernel, table, policy, remap)
    values = kernel.outcome_means[rem][state]
    sums = np.bincount(group, weights=values)
    sq = np.bincount(group, weights=values**2)
    mean = sums / draws
    var = np.maximum(sq - draws * mean**2, 0.0) / (draws - 1)
    estimate = float(share @ mean)
    se = float(np.sqrt(np.sum(share**2 * var / draws)))
    return estimate, se


def estimate_longitudinal_discrete(ds, n_bins=5, mc_draws=10_000, zero_support="abort",
                                   use_covariates=False, seed=0):
    """Plug-in estimate over binned surrogate states.

    Parameters
    ----------
    ds : PanelDataset
    n_bins : int
        Quantile bins per surrogate dimension.
    mc_draws : int
        Approximate number of simulated paths per arm and horizon.
    zero_support : {"abort", "nearest"}
        What to do when a path enters a state no unit of the arm started in.
    use_covariates : bool
        Add binned covariate cells to the state.
    seed : int or RandomStream

    Returns
    -------
    EffectTrajectory
        ``diagnostics["mc_standard_errors"]`` holds the Monte-Carlo error of
        each extrapolated period.
    """
    if zero_support not in ZERO_SUPPORT_POLICIES:
        raise ArgumentError(f"zero_support must be one of {ZERO_SUPPORT_POLICIES}",
                            module="estimators")
    if mc_draws < 1:
        raise ArgumentError("mc_draws must be positive", module="estimators")
    stream = as_stream(seed)
    kernel = build_discrete_kernel(ds, n_bins, use_covariates)
    te = ds.t_experimental
    future, ses = [], []
    for t in range(te + 1, ds.t_total + 1):
        est = {}
        for w in (1, 0):
            gen = stream.substream(21, t, w).generator
            est[w] = simulate_arm(kernel.arm(w), kernel.state_codes, t, te, mc_draws, gen,
                                  zero_support)
        future.append(est[1][0] - est[0][0])
        ses.append(float(np.hypot(est[1][1], est[0][1])))
    options = {"n_bins": int(n_bins), "mc_draws": int(mc_draws),
               "zero_support": zero_support, "use_covariates": bool(use_covariates),
               "seed": int(stream.seed)}
    traj = observed_then_extrapolated(arm_mean_differences(ds, 1, te), future, "discrete",
                                      options)
    return traj.with_diagnostics(mc_standard_errors=ses, n_states=kernel.n_states,
                                 bins_per_dimension=list(kernel.bins_per_dimension))
