"""Distribution fitting and comparison: lognormal, power-law tail, distances.

Fits are least squares in log space on binned densities (shares per level),
not maximum likelihood on samples: the toolkit's objects are histograms.
Zero bins carry no log-density and are excluded; the exclusion count is
reported on the result. Regressions are unweighted.

Lognormal: ln x_i + ln S_i is quadratic in ln S_i with curvature -1/(2 sigma^2)
and vertex mu, so a degree-2 polynomial fit recovers (mu, sigma) exactly on
self-generated data.

Power-law tail: density ~ S^-(1+eta); regressing ln x on ln S over the
smallest suffix of levels holding at least top_fraction of the population
gives eta = -slope - 1. A lognormal's upper tail fitted this way yields a
high r-squared with a steep eta: the classic misidentification trap this
module exists to demonstrate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["FitResult", "InsufficientDataError", "fit_lognormal",
           "fit_powerlaw_tail", "distribution_distance"]


class InsufficientDataError(ValueError):
    """Fewer usable bins than the fit needs."""


@dataclass(frozen=True)
class FitResult:
    model: str                 # "lognormal" | "powerlaw"
    parameters: tuple          # (mu, sigma) | (eta,)
    r_squared: float
    fit_range: tuple           # (S_low, S_high) of the included bins
    point_count: int
    excluded_zero_bins: int

    def __post_init__(self):
        if self.model not in ("lognormal", "powerlaw"):
            raise ValueError(f"unknown model {self.model!r}")
        if not (0.0 <= self.r_squared <= 1.0):
            raise ValueError("r_squared must lie in [0, 1]")
        if self.point_count < 3:
            raise ValueError("point_count must be >= 3")

    def to_dict(self) -> dict:
        names = ("mu", "sigma") if self.model == "lognormal" else ("eta",)
        return {
            "model": self.model,
            "parameters": dict(zip(names, self.parameters)),
            "r_squared": self.r_squared,
            "fit_range": list(self.fit_range),
            "point_count": self.point_count,
            "excluded_zero_bins": self.excluded_zero_bins,
        }


def _as_positive_salaries(salaries) -> np.ndarray:
    s = np.asarray(salaries, dtype=float)
    if s.ndim != 1 or np.any(s <= 0):
        raise ValueError("salaries must be a 1-d positive vector")
    return s


def _r_squared(y, yhat) -> float:
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res <= 1e-24 else 0.0
    return max(0.0, min(1.0, 1.0 - ss_res / ss_tot))


def fit_lognormal(salaries, densities) -> FitResult:
    """Recover (mu, sigma) from binned densities on a salary grid."""
    s = _as_positive_salaries(salaries)
    x = np.asarray(densities, dtype=float)
    if x.shape != s.shape:
        raise ValueError("salaries and densities must have equal length")
    if np.any(x < 0):
        raise ValueError("densities must be nonnegative")
    mask = x > 0
    excluded = int((~mask).sum())
    if int(mask.sum()) < 3:
        raise InsufficientDataError(
            f"lognormal fit needs >= 3 nonzero bins, got {int(mask.sum())}")
    z = np.log(s[mask])
    y = np.log(x[mask]) + z
    c2, c1, c0 = np.polyfit(z, y, 2)
    if c2 >= 0:
        raise ValueError("log-density is not concave in ln S; not lognormal-like")
    sigma2 = -1.0 / (2.0 * c2)
    mu = c1 * sigma2
    yhat = c0 + c1 * z + c2 * z * z
    return FitResult("lognormal", (float(mu), float(math.sqrt(sigma2))),
                     _r_squared(y, yhat),
                     (float(s[mask].min()), float(s[mask].max())),
                     int(mask.sum()), excluded)


def fit_powerlaw_tail(salaries, densities, top_fraction: float = 0.03) -> FitResult:
    """Pareto-exponent fit on the top tail by population mass.

    The tail is the smallest level suffix whose densities sum to at least
    top_fraction of the total; eta = -slope - 1 from ln(density) on ln(S).
    """
    if not (0.0 < top_fraction <= 0.5):
        raise ValueError("top_fraction must be in (0, 0.5]")
    s = _as_positive_salaries(salaries)
    x = np.asarray(densities, dtype=float)
    if x.shape != s.shape:
        raise ValueError("salaries and densities must have equal length")
    if np.any(x < 0):
        raise ValueError("densities must be nonnegative")
    if not np.all(np.diff(s) > 0):
        raise ValueError("salaries must be strictly increasing")
    total = float(x.sum())
    if total <= 0:
        raise InsufficientDataError("no population mass to fit")
    target = top_fraction * total
    suffix = np.cumsum(x[::-1])[::-1]  # mass from level i upward
    start_candidates = np.flatnonzero(suffix >= target)
    start = int(start_candidates[-1]) if start_candidates.size else 0
    mask = np.zeros_like(x, dtype=bool)
    mask[start:] = True
    mask &= x > 0
    excluded = int((s.size - start) - mask.sum())
    if int(mask.sum()) < 3:
        raise InsufficientDataError(
            f"power-law tail fit needs >= 3 nonzero tail bins, got {int(mask.sum())}")
    z = np.log(s[mask])
    y = np.log(x[mask])
    slope, intercept = np.polyfit(z, y, 1)
    eta = -float(slope) - 1.0
    yhat = intercept + slope * z
    return FitResult("powerlaw", (eta,), _r_squared(y, yhat),
                     (float(s[mask].min()), float(s[mask].max())),
                     int(mask.sum()), excluded)


def distribution_distance(p, q, metric: str = "l1") -> float:
    """L1, Linf, or KS distance between two same-grid distributions."""
    pa = np.asarray(p, dtype=float)
    qa = np.asarray(q, dtype=float)
    if pa.shape != qa.shape or pa.ndim != 1:
        raise ValueError("distributions must be 1-d and of equal length")
    for name, arr in (("p", pa), ("q", qa)):
        if np.any(arr < 0):
            raise ValueError(f"{name} has negative entries")
        if abs(float(arr.sum()) - 1.0) > 1e-9:
            raise ValueError(f"{name} must sum to 1 within 1e-9")
    d = pa - qa
    m = metric.lower()
    if m == "l1":
        return float(np.abs(d).sum())
    if m == "linf":
        return float(np.abs(d).max())
    if m == "ks":
        return float(np.abs(np.cumsum(d)).max())
    raise ValueError(f"unknown metric {metric!r}")
