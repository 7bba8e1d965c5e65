"""Uniform callable interface over the trajectory estimators.

Resampling and validation code calls estimators as ``est(ds, stream)``;
:class:`Estimator` binds a name and options to that signature.
"""

from dataclasses import dataclass, field

from ..errors import ArgumentError
from .baselines import estimate_ceb, estimate_var
from .discrete import estimate_longitudinal_discrete
from .knn import estimate_knn
from .linear_surrogate import estimate_lsm

_OPTIONS = {
    "lsm": {"use_covariates", "regularization", "en_grid_size", "en_folds"},
    "ceb": set(),
    "var": set(),
    "knn": {"k", "workers"},
    "discrete": {"n_bins", "mc_draws", "zero_support", "use_covariates"},
}
ESTIMATORS = tuple(_OPTIONS)


@dataclass(frozen=True)
class Estimator:
    """A named estimator with fixed options.

    Calling it with a panel and a random stream returns an
    ``EffectTrajectory``; stochastic estimators draw from the stream.
    """

    name: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _OPTIONS:
            raise ArgumentError(f"unknown estimator {self.name!r}; choose from {ESTIMATORS}",
                                module="estimators")
        unknown = set(self.options) - _OPTIONS[self.name]
        if unknown:
            raise ArgumentError(f"unknown options for {self.name}: {sorted(unknown)}",
                                module="estimators")

    def __call__(self, ds, stream=0):
        opts = dict(self.options)
        if self.name == "lsm":
            return estimate_lsm(ds, **opts)
        if self.name == "ceb":
            return estimate_ceb(ds)
        if self.name == "var":
            return estimate_var(ds, seed=stream)
        if self.name == "knn":
            return estimate_knn(ds, **opts)
        return estimate_longitudinal_discrete(ds, seed=stream, **opts)


def make_estimator(spec):
    """Build an :class:`Estimator` from a name, a mapping, or an estimator."""
    if isinstance(spec, Estimator):
        return spec
    if callable(spec):
        return spec
    if isinstance(spec, str):
        return Estimator(spec)
    spec = dict(spec)
    name = spec.pop("name")
    return Estimator(name, spec)
