"""Seedable synthetic panels with known effect trajectories.

Five parametric families are provided:

``stabilized1``
    Four surrogates, treated surrogates decay geometrically, outcome
    ``-(0.1 s1 + 0.1 s2 + 0.4 s3 + 0.4 s4)``; the effect rises and levels off.
``stabilized2``
    Same decay with a positive outcome map and control surrogates shifted
    down by 2; the effect starts high and decays to a plateau.
``comparability_violation``
    Two surrogates; the treated outcome at period 2 is scaled by ``gamma``.
``nonlinear``
    Outcome ``-(s1 + theta * exp(s2))``.
``no_effect``
    Surrogates identical in law across arms; the treated outcome carries a
    vanishing alternating perturbation.

In every family the outcome at period t+1 is a function of the surrogates
at period t, control surrogates are redrawn independently each period from
their baseline law, and treated surrogates follow ``S[t+1] = decay * S[t]``.

:func:`generate_markov` builds finite-state panels (optionally with
observational history) whose truth follows from matrix powers.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ArgumentError
from .numerics.rng import RandomStream
from .panel import ExperimentWindow, PanelDataset

__all__ = [
    "KINDS",
    "SynthSpec",
    "TruthOracle",
    "StructuralParameters",
    "generate",
    "truth",
    "analytic_truth",
    "draw_parameters",
    "generate_markov",
    "markov_truth",
]

KINDS = ("stabilized1", "stabilized2", "comparability_violation", "nonlinear", "no_effect")

_DEFAULTS = {
    "stabilized1": dict(weights=(0.1, 0.1, 0.4, 0.4), decay=(0.8, 0.6, 0.4, 0.2),
                        mean_prior=(2.0, 1.0), scale_prior=(2.0, 1.0), sign=-1.0,
                        control_shift=0.0),
    "stabilized2": dict(weights=(0.1, 0.1, 0.4, 0.4), decay=(0.8, 0.6, 0.4, 0.2),
                        mean_prior=(1.5, 1.0), scale_prior=(1.0, 1.0), sign=1.0,
                        control_shift=-2.0),
    "comparability_violation": dict(weights=(0.1, 0.4), decay=(0.8, 0.6),
                                    mean_prior=(2.0, 1.0), scale_prior=(2.0, 1.0),
                                    sign=-1.0, control_shift=0.0),
    "nonlinear": dict(weights=(1.0, 1.0), decay=(0.8, 0.6),
                      mean_prior=(2.0, 1.0), scale_prior=(2.0, 1.0), sign=-1.0,
                      control_shift=0.0),
    "no_effect": dict(weights=(0.1, 0.1, 0.4, 0.4), decay=(1.0, 1.0, 1.0, 1.0),
                      mean_prior=(2.0, 1.0), scale_prior=(2.0, 1.0), sign=-1.0,
                      control_shift=0.0),
}

_CHUNK = 65_536


@dataclass(frozen=True)
class SynthSpec:
    """Complete description of a synthetic data-generating process.

    Unset fields (``None``) take the family defaults. ``means`` and
    ``scales`` override the per-panel draws from ``mean_prior`` and
    ``scale_prior`` (each a ``(loc, sd)`` normal prior; negative draws are
    sign-flipped).

    Attributes
    ----------
    kind : str
    n_per_arm : int
    t_total, t_experimental : int
    seed : int
    weights, decay : tuple of float, optional
    means, scales : tuple of float, optional
    mean_prior, scale_prior : tuple of float, optional
    sign : float, optional
        Sign of the linear outcome map.
    control_shift : float, optional
        Added to the control-arm surrogate mean (stabilized2 uses -2).
    gamma : float
        Period-2 treated outcome multiplier (comparability_violation).
    theta : float
        Weight of the exponential term (nonlinear).
    perturbation : float
        Scale of the alternating treated-outcome term (no_effect); 0 gives a
        panel where both arms share one law.
    outcome_noise : float
        Standard deviation of additive Gaussian outcome noise.
    algorithm : str
        RNG bit generator.
    """

    kind: str = "stabilized1"
    n_per_arm: int = 100_000
    t_total: int = 10
    t_experimental: int = 3
    seed: int = 0
    weights: tuple | None = None
    decay: tuple | None = None
    means: tuple | None = None
    scales: tuple | None = None
    mean_prior: tuple | None = None
    scale_prior: tuple | None = None
    sign: float | None = None
    control_shift: float | None = None
    gamma: float = 1.0
    theta: float = 1.0
    perturbation: float = 1.0
    outcome_noise: float = 0.0
    algorithm: str = "philox"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown kind {self.kind!r}; expected one of {KINDS}",
                                module="synthgen")
        defaults = _DEFAULTS[self.kind]
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        for name in ("weights", "decay", "mean_prior", "scale_prior"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        for name in ("means", "scales"):
            if getattr(self, name) is not None:
                object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        d = len(defaults["weights"])
        if len(self.weights) != d or len(self.decay) != d:
            raise ArgumentError(f"{self.kind} needs {d} weights and decay factors",
                                module="synthgen")
        for name in ("means", "scales"):
            v = getattr(self, name)
            if v is not None and len(v) != d:
                raise ArgumentError(f"{name} must have length {d}", module="synthgen")
        if not all(0.0 < k <= 1.0 for k in self.decay):
            raise ArgumentError("decay factors must lie in (0, 1]", module="synthgen")
        if self.n_per_arm < 1:
            raise ArgumentError("n_per_arm must be at least 1", module="synthgen")
        if self.outcome_noise < 0:
            raise ArgumentError("outcome_noise must be non-negative", module="synthgen")
        ExperimentWindow(self.t_experimental, self.t_total)

    @property
    def d_surrogates(self):
        return len(self.weights)

    @property
    def window(self):
        return ExperimentWindow(self.t_experimental, self.t_total)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class StructuralParameters:
    """Per-panel draws shared by the benchmark panel and its truth oracle."""

    means: tuple
    scales: tuple

    def to_dict(self):
        return {"means": list(self.means), "scales": list(self.scales)}


@dataclass(frozen=True)
class TruthOracle:
    """True per-period effect for periods 1..T.

    ``mc_standard_errors`` is all zeros for analytic truth.
    """

    effects: np.ndarray
    method: str
    mc_standard_errors: np.ndarray
    parameters: dict = field(default_factory=dict)

    @property
    def estimates(self):
        return self.effects

    def to_dict(self):
        return {
            "method": self.method,
            "effects": [float(v) for v in self.effects],
            "mc_standard_errors": [float(v) for v in self.mc_standard_errors],
            "parameters": self.parameters,
        }


def draw_parameters(spec):
    """Draw (or take from the SynthSpec) the surrogate means and scales."""
    gen = RandomStream(spec.seed, spec.algorithm).substream(0).generator
    d = spec.d_surrogates
    means = gen.normal(spec.mean_prior[0], spec.mean_prior[1], size=d)
    scales = gen.normal(spec.scale_prior[0], spec.scale_prior[1], size=d)
    # Negative draws are flipped to positive.
    means, scales = np.abs(means), np.abs(scales)
    if spec.means is not None:
        means = np.asarray(spec.means)
    if spec.scales is not None:
        scales = np.asarray(spec.scales)
    return StructuralParameters(tuple(float(m) for m in means),
                                tuple(float(s) for s in scales))


def _outcome_map(spec, s):
    """Noise-free outcome produced by surrogates ``s`` (..., D)."""
    if spec.kind == "nonlinear":
        return spec.sign * (s[..., 0] + spec.theta * np.exp(s[..., 1]))
    return spec.sign * (s @ np.asarray(spec.weights))


def _simulate_block(spec, params, arm, gen):
    """Surrogates (periods 0..T) and outcomes (periods 1..T) for one block."""
    n = arm.shape[0]
    t, d = spec.t_total, spec.d_surrogates
    mu = np.asarray(params.means)
    sd = np.asarray(params.scales)
    decay = np.asarray(spec.decay)
    z = gen.standard_normal((n, t + 1, d))
    treated = arm == 1
    s = np.empty((n, t + 1, d))
    s[~treated] = (mu + spec.control_shift) + sd * z[~treated]
    if spec.kind == "no_effect":
        s[treated] = mu + sd * z[treated]
    else:
        s0 = mu + sd * z[treated, 0, :]
        powers = decay[None, :] ** np.arange(t + 1)[:, None]
        s[treated] = s0[:, None, :] * powers[None, :, :]
    y = np.full((n, t + 1), np.nan)
    y[:, 1:] = _outcome_map(spec, s[:, :-1, :])
    if spec.kind == "comparability_violation" and t >= 2:
        y[treated, 2] *= spec.gamma
    if spec.kind == "no_effect" and spec.perturbation != 0:
        # Treated Y_{t+1} gets (-1)^t / (t+2)^3 for t = 0..T-1.
        lag = np.arange(t)
        y[treated, 1:] += spec.perturbation * ((-1.0) ** lag) / (lag + 2.0) ** 3
    if spec.outcome_noise > 0:
        y[:, 1:] += spec.outcome_noise * gen.standard_normal((n, t))
    return s, y


def _assign_arms(spec, stream):
    n = spec.n_per_arm
    arm = np.concatenate([np.ones(n, dtype=np.int8), np.zeros(n, dtype=np.int8)])
    return stream.substream(1).generator.permutation(arm)


def _chunks(n):
    return [(lo, min(lo + _CHUNK, n)) for lo in range(0, n, _CHUNK)]


def generate(spec, threads=1):
    """Simulate a panel and return it with its analytic truth.

    Units are generated in fixed-size chunks, each from its own substream,
    so the output does not depend on ``threads``.

    Returns
    -------
    panel : PanelDataset
        Future outcomes are present as ground truth.
    oracle : TruthOracle
    """
    params = draw_parameters(spec)
    stream = RandomStream(spec.seed, spec.algorithm)
    arm = _assign_arms(spec, stream)
    n = arm.shape[0]
    t, d = spec.t_total, spec.d_surrogates
    s = np.empty((n, t + 1, d))
    y = np.empty((n, t + 1))

    def work(k, lo, hi):
        gen = stream.substream(2, k).generator
        s[lo:hi], y[lo:hi] = _simulate_block(spec, params, arm[lo:hi], gen)

    chunks = _chunks(n)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda a: work(*a), [(k, lo, hi) for k, (lo, hi) in enumerate(chunks)]))
    else:
        for k, (lo, hi) in enumerate(chunks):
            work(k, lo, hi)
    width = len(str(n - 1))
    panel = PanelDataset(
        window=spec.window,
        unit_ids=np.array([f"u{i:0{width}d}" for i in range(n)]),
        arm=arm,
        covariates=np.zeros((n, 0)),
        surrogates=s,
        outcomes=y,
        meta={"spec": spec.to_dict(), "parameters": params.to_dict()},
    )
    return panel, analytic_truth(spec, params)


def analytic_truth(spec, params=None):
    """Closed-form per-period effect for periods 1..T."""
    params = params or draw_parameters(spec)
    mu = np.asarray(params.means)
    sd = np.asarray(params.scales)
    w = np.asarray(spec.weights)
    decay = np.asarray(spec.decay)
    lag = np.arange(spec.t_total)  # effect at period t uses surrogates at t-1
    if spec.kind == "nonlinear":
        k1 = decay[0] ** lag
        k2 = decay[1] ** lag
        treated = -(k1 * mu[0] + spec.theta * np.exp(k2 * mu[1] + k2**2 * sd[1] ** 2 / 2))
        control = -(mu[0] + spec.theta * np.exp(mu[1] + sd[1] ** 2 / 2))
        effects = treated - control
    elif spec.kind == "no_effect":
        effects = spec.perturbation * ((-1.0) ** lag) / (lag + 2.0) ** 3
    else:
        kpow = decay[None, :] ** lag[:, None]
        treated = spec.sign * (kpow * mu) @ w
        control = spec.sign * ((mu + spec.control_shift) @ w) * np.ones(spec.t_total)
        effects = treated - control
        if spec.kind == "comparability_violation" and spec.t_total >= 2:
            effects[1] = spec.gamma * treated[1] - control[1]
    return TruthOracle(effects=np.asarray(effects, dtype=float), method="analytic",
                       mc_standard_errors=np.zeros(spec.t_total),
                       parameters=params.to_dict())


def nonlinear_limits(spec, params=None):
    """Two closed forms for the nonlinear family's long-run effect.

    Returns ``(algebraic, outer_shift)`` where ``algebraic`` is
    ``mu1 + theta * (exp(mu2 + s2^2/2) - 1)`` and ``outer_shift`` is
    ``mu1 + theta * exp(mu2 + s2^2/2) - 1``. They agree only at theta = 1;
    the exact expected effect converges to ``algebraic``.
    """
    params = params or draw_parameters(spec)
    mu1, mu2 = params.means[0], params.means[1]
    s2 = params.scales[1]
    e = math.exp(mu2 + s2**2 / 2)
    return mu1 + spec.theta * (e - 1.0), mu1 + spec.theta * e - 1.0


def truth(spec, mega_n=1_000_000, threads=1):
    """Monte-Carlo truth from an independent mega-sample.

    Shares the panel's structural parameters but draws noise from a stream
    disjoint from every stream :func:`generate` uses.
    """
    params = draw_parameters(spec)
    stream = RandomStream(spec.seed, spec.algorithm).substream(7)
    t = spec.t_total
    sums = np.zeros((2, t))
    sq = np.zeros((2, t))
    chunks = _chunks(mega_n)

    def work(k, lo, hi):
        m = hi - lo
        arm = np.concatenate([np.ones(m, dtype=np.int8), np.zeros(m, dtype=np.int8)])
        _, y = _simulate_block(spec, params, arm, stream.substream(k).generator)
        y = y[:, 1:]
        return (np.stack([y[:m].sum(0), y[m:].sum(0)]),
                np.stack([(y[:m] ** 2).sum(0), (y[m:] ** 2).sum(0)]))

    jobs = [(k, lo, hi) for k, (lo, hi) in enumerate(chunks)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda a: work(*a), jobs))
    else:
        results = [work(*a) for a in jobs]
    for a, b in results:
        sums += a
        sq += b
    mean = sums / mega_n
    var = np.maximum(sq / mega_n - mean**2, 0.0) * mega_n / max(mega_n - 1, 1)
    effects = mean[0] - mean[1]
    se = np.sqrt(var[0] / mega_n + var[1] / mega_n)
    # Exact zero-variance cases should report exact zero error.
    se[np.all(var <= 1e-24 * np.maximum(mean**2, 1.0), axis=0)] = 0.0
    return TruthOracle(effects=effects, method="monte_carlo", mc_standard_errors=se,
                       parameters=params.to_dict())


# ---------------------------------------------------------------------------
# Finite-state Markov panels


def _sample_rows(cum, states, gen):
    u = gen.random(states.shape[0])
    nxt = (u[:, None] >= cum[states]).sum(axis=1)
    return np.minimum(nxt, cum.shape[1] - 1)


def generate_markov(control_kernel, treated_kernel, outcome_means, initial,
                    n_per_arm, t_total, t_experimental, n_history=0,
                    outcome_noise=1.0, state_values=None, seed=0, algorithm="philox"):
    """Panel with one discrete surrogate driven by arm-specific Markov kernels.

    The surrogate moves through states with ``control_kernel`` before and
    (for control units) during the experiment, and with ``treated_kernel``
    for treated units in periods 1..T. The outcome at period t is
    ``outcome_means[state at t-1]`` plus Gaussian noise.

    Parameters
    ----------
    control_kernel, treated_kernel : array-like (K, K)
        Row-stochastic transition matrices.
    outcome_means : array-like (K,)
    initial : array-like (K,)
        Distribution of the state one period before the first recorded one.
    n_history : int
        Observational periods recorded before period 0.
    state_values : array-like (K,), optional
        Numeric surrogate value of each state (default 0..K-1).

    Returns
    -------
    panel : PanelDataset
    oracle : TruthOracle
    """
    p0 = np.asarray(control_kernel, dtype=float)
    p1 = np.asarray(treated_kernel, dtype=float)
    h = np.asarray(outcome_means, dtype=float)
    init = np.asarray(initial, dtype=float)
    k = h.shape[0]
    for mat in (p0, p1):
        if mat.shape != (k, k) or np.any(mat < 0) or not np.allclose(mat.sum(1), 1):
            raise ArgumentError("kernels must be row-stochastic K x K matrices",
                                module="synthgen")
    values = np.arange(k, dtype=float) if state_values is None else np.asarray(state_values, float)
    window = ExperimentWindow(t_experimental, t_total)
    stream = RandomStream(seed, algorithm)
    gen = stream.substream(0).generator
    n = 2 * n_per_arm
    arm = stream.substream(1).generator.permutation(
        np.concatenate([np.ones(n_per_arm, np.int8), np.zeros(n_per_arm, np.int8)]))
    n_cols = n_history + t_total + 1
    cum0 = np.cumsum(p0, axis=1)
    cum1 = np.cumsum(p1, axis=1)
    state = _sample_rows(np.cumsum(init)[None, :], np.zeros(n, dtype=np.int64), gen)
    states = np.empty((n, n_cols), dtype=np.int64)
    y = np.empty((n, n_cols))
    for c in range(n_cols):
        period = c - n_history
        y[:, c] = h[state] + outcome_noise * gen.standard_normal(n)
        if period >= 1:
            nxt = np.where(arm == 1, _sample_rows(cum1, state, gen), _sample_rows(cum0, state, gen))
        else:
            nxt = _sample_rows(cum0, state, gen)
        state = nxt
        states[:, c] = state
    panel = PanelDataset(
        window=window,
        unit_ids=np.array([f"m{i}" for i in range(n)]),
        arm=arm,
        covariates=np.zeros((n, 0)),
        surrogates=values[states][:, :, None],
        outcomes=y,
        n_history=n_history,
    )
    start = init @ np.linalg.matrix_power(p0, n_history + 1)
    return panel, markov_truth(p0, p1, h, start, t_total)


def markov_truth(control_kernel, treated_kernel, outcome_means, period0_distribution, t_total):
    """Exact effect ``pi0 (P1^(t-1) - P0^(t-1)) h`` for t = 1..T."""
    p0 = np.asarray(control_kernel, float)
    p1 = np.asarray(treated_kernel, float)
    h = np.asarray(outcome_means, float)
    a = b = np.asarray(period0_distribution, float)
    effects = []
    for _ in range(t_total):
        effects.append(float(a @ h - b @ h))
        a, b = a @ p1, b @ p0
    return TruthOracle(effects=np.array(effects), method="analytic",
                       mc_standard_errors=np.zeros(t_total))
