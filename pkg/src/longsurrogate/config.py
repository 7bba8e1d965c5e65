"""Run configuration: TOML file plus command-line overrides.

Top-level keys
--------------
seed : int (required)
threads : int, default 1
out : str, output directory
rng : str, bit generator ("philox" or "pcg64")

Tables
------
[data]            ``path`` to a panel CSV, or a ``[data.synth]`` table of
                  SynthSpec fields (exactly one of the two).
[window]          ``t_experimental`` and ``t_total``.
[estimate]        ``estimators`` list; ``[estimate.options.<name>]`` tables.
[inference]       ``method`` (none | subsample_bootstrap |
                  randomization_bootstrap | permutation), ``replicas``,
                  ``fraction``, ``level``, ``period``.
[validation]      ``comparability`` and ``parallel_trends`` lists of
                  {t, t_prime, delta}; ``n_bins``; ``theta_grid``;
                  ``subsets``; ``balance``; ``sensitivity_estimator``.
[bench]           ``kind``, ``seeds``, ``t_experimental`` list,
                  ``estimators``, ``n_per_arm``, ``gammas``,
                  ``parallel_trends`` {n_per_arm, n_bins}.
"""

import copy
import sys
from dataclasses import dataclass, field

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

INFERENCE_METHODS = ("none", "subsample_bootstrap", "randomization_bootstrap", "permutation")

_TOP_KEYS = {"seed", "threads", "out", "rng", "data", "window", "estimate", "inference",
             "validation", "bench"}


@dataclass
class RunConfig:
    """Validated configuration with the effective values echoed into reports."""

    raw: dict
    seed: int
    threads: int = 1
    out: str = "out"
    rng: str = "philox"
    data: dict = field(default_factory=dict)
    window: dict = field(default_factory=dict)
    estimate: dict = field(default_factory=dict)
    inference: dict = field(default_factory=dict)
    validation: dict = field(default_factory=dict)
    bench: dict = field(default_factory=dict)

    def effective(self):
        """The configuration as it will be executed (JSON-serializable)."""
        out = copy.deepcopy(self.raw)
        out.update(seed=self.seed, threads=self.threads, out=self.out, rng=self.rng)
        # Thread count never changes results, so it is kept out of reports.
        out.pop("threads", None)
        out.pop("out", None)
        return out


def _require_int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer", module="cli")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}", module="cli")
    return value


def load_config(path=None, overrides=None):
    """Read a TOML config and apply overrides (``None`` values ignored)."""
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}", module="cli") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}", module="cli") from exc
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value
    return parse_config(raw)


def parse_config(raw):
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}", module="cli")
    if "seed" not in raw:
        raise ConfigError("seed is mandatory (set it in the config or with --seed)",
                          module="cli")
    seed = _require_int(raw["seed"], "seed", 0)
    if seed >= 2**64:
        raise ConfigError("seed must fit in 64 bits", module="cli")
    threads = _require_int(raw.get("threads", 1), "threads", 1)
    rng = raw.get("rng", "philox")
    if rng not in ("philox", "pcg64"):
        raise ConfigError("rng must be 'philox' or 'pcg64'", module="cli")
    data = dict(raw.get("data", {}))
    if data:
        has_path, has_synth = "path" in data, "synth" in data
        if has_path == has_synth:
            raise ConfigError("[data] needs exactly one of 'path' or [data.synth]",
                              module="cli")
    window = dict(raw.get("window", {}))
    for key in window:
        if key not in ("t_experimental", "t_total"):
            raise ConfigError(f"unknown window key {key!r}", module="cli")
        _require_int(window[key], f"window.{key}", 1)
    if len(window) == 2 and window["t_experimental"] >= window["t_total"]:
        raise ConfigError("window.t_experimental must be smaller than window.t_total",
                          module="cli")
    if "t_experimental" in window and window["t_experimental"] < 2:
        raise ConfigError("window.t_experimental must be at least 2", module="cli")
    inference = dict(raw.get("inference", {}))
    method = inference.get("method", "none")
    if method not in INFERENCE_METHODS:
        raise ConfigError(f"inference.method must be one of {INFERENCE_METHODS}", module="cli")
    return RunConfig(raw=copy.deepcopy(raw), seed=seed, threads=threads,
                     out=str(raw.get("out", "out")), rng=rng, data=data, window=window,
                     estimate=dict(raw.get("estimate", {})), inference=inference,
                     validation=dict(raw.get("validation", {})),
                     bench=dict(raw.get("bench", {})))
