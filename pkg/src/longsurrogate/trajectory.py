"""Per-period effect estimates with provenance and optional bands."""

import csv
import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

OBSERVED = "observed"
EXTRAPOLATED = "extrapolated"


def fingerprint(options):
    """Short stable hash of a JSON-serializable options mapping."""
    blob = json.dumps(options, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EffectTrajectory:
    """Estimated treatment effect for periods 1..len(estimates).

    Attributes
    ----------
    estimates : ndarray of shape (T,)
        ``estimates[t - 1]`` is the effect at period ``t``.
    provenance : tuple of str
        ``"observed"`` or ``"extrapolated"`` per period.
    estimator : str
        Label of the producing estimator.
    options : dict
        Settings that determine the output; hashed into ``fingerprint``.
    lower, upper : ndarray or None
        Confidence band, NaN where no band applies.
    """

    estimates: np.ndarray
    provenance: tuple
    estimator: str = ""
    options: dict = field(default_factory=dict)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    band: dict | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        est = np.asarray(self.estimates, dtype=float)
        object.__setattr__(self, "estimates", est)
        object.__setattr__(self, "provenance", tuple(self.provenance))
        if len(self.provenance) != est.shape[0]:
            raise ValueError("provenance length must match estimates")

    @property
    def periods(self):
        return np.arange(1, self.estimates.shape[0] + 1)

    @property
    def n_periods(self):
        return int(self.estimates.shape[0])

    @property
    def t_experimental(self):
        return sum(p == OBSERVED for p in self.provenance)

    @property
    def fingerprint(self):
        return fingerprint({"estimator": self.estimator, **self.options})

    def at(self, period):
        return float(self.estimates[period - 1])

    def future_estimates(self):
        return self.estimates[self.t_experimental:]

    def with_band(self, lower, upper, **meta):
        """Copy with a band covering the future periods (NaN elsewhere)."""
        n = self.n_periods
        lo = np.full(n, np.nan)
        hi = np.full(n, np.nan)
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        lo[n - lower.shape[0]:] = lower
        hi[n - upper.shape[0]:] = upper
        return replace(self, lower=lo, upper=hi, band=dict(meta))

    def with_diagnostics(self, **info):
        return replace(self, diagnostics={**self.diagnostics, **info})

    def negated(self):
        return replace(self, estimates=-self.estimates)

    def to_rows(self):
        rows = []
        for i, t in enumerate(self.periods):
            lo = "" if self.lower is None or np.isnan(self.lower[i]) else repr(float(self.lower[i]))
            hi = "" if self.upper is None or np.isnan(self.upper[i]) else repr(float(self.upper[i]))
            rows.append([int(t), repr(float(self.estimates[i])), self.provenance[i], lo, hi])
        return rows

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["period", "estimate", "provenance", "lower", "upper"])
            writer.writerows(self.to_rows())

    def to_dict(self):
        def _clean(arr):
            if arr is None:
                return None
            return [None if np.isnan(v) else float(v) for v in arr]

        return {
            "estimator": self.estimator,
            "fingerprint": self.fingerprint,
            "options": self.options,
            "periods": [int(t) for t in self.periods],
            "estimates": [float(v) for v in self.estimates],
            "provenance": list(self.provenance),
            "lower": _clean(self.lower),
            "upper": _clean(self.upper),
            "band": self.band,
            "diagnostics": self.diagnostics,
        }


def observed_then_extrapolated(observed, extrapolated, estimator, options=None):
    """Join observed effects for 1..T_E with forecasts for T_E+1..T."""
    observed = np.asarray(observed, dtype=float)
    extrapolated = np.asarray(extrapolated, dtype=float)
    prov = (OBSERVED,) * observed.shape[0] + (EXTRAPOLATED,) * extrapolated.shape[0]
    return EffectTrajectory(
        estimates=np.concatenate([observed, extrapolated]),
        provenance=prov,
        estimator=estimator,
        options=dict(options or {}),
    )
