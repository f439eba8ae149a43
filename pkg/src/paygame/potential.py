"""Game potential, its entropy component, and statistical-mechanics identities.

The potential of the pay game splits into

    phi = phi_u + phi_v + phi_f
    phi_u = alpha * sum x_i ln S_i
    phi_v = -beta * sum x_i (ln S_i)^2
    phi_f = (gamma/N) * ln[ N! / prod (N x_i)! ]

phi_f is the log-multiplicity of the occupancy profile, the fairness/entropy
term; it is what makes the even split attractive. The thermodynamic potential
is -(betaT/N) E + (1/N) ln W with E the total energy, and it equals the
scaled negative Helmholtz free energy -(betaT/N)(E - S/betaT) with S = ln W;
helmholtz_check computes both routes.

Additive constants are fixed to 0 throughout.

Multiplicity arithmetic: exact log-factorials for integer occupancies up to
EXACT_LIMIT (lazy cumulative table, read-only once built); log-gamma for
larger or non-integral (mean-field) arguments, which is the continuous
extension that keeps the potential differentiable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import ClassParams, EnergyGrid, PopulationState, SalaryGrid

__all__ = [
    "PotentialBreakdown",
    "log_factorial",
    "log_multiplicity",
    "potential",
    "thermo_potential",
    "entropy_stirling",
    "helmholtz_check",
    "stirling_entropy_gap",
]

EXACT_LIMIT = 1_000_000

_LOGFACT: np.ndarray | None = None


def _logfact_table() -> np.ndarray:
    # Built once on first use; ~8 MB. _LOGFACT[k] = ln k!
    global _LOGFACT
    if _LOGFACT is None:
        t = np.empty(EXACT_LIMIT + 1)
        t[0] = 0.0
        np.cumsum(np.log(np.arange(1, EXACT_LIMIT + 1)), out=t[1:])
        t.flags.writeable = False
        _LOGFACT = t
    return _LOGFACT


def log_factorial(k):
    """ln(k!) for scalar or array k.

    Integer values <= EXACT_LIMIT use the exact table; everything else falls
    back to gammaln(k+1), which also defines the continuous extension for
    non-integral occupancies.
    """
    arr = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("log_factorial needs finite nonnegative arguments")
    is_int = arr == np.floor(arr)
    small = is_int & (arr <= EXACT_LIMIT)
    out = np.where(small, _logfact_table()[arr.astype(np.int64) % (EXACT_LIMIT + 1)],
                   gammaln(arr + 1.0))
    return float(out) if out.ndim == 0 else out


def log_multiplicity(occupancies, n_total: float) -> float:
    """ln[ N! / prod_i (n_i)! ] for an occupancy vector summing to N.

    occupancies may be integer counts (exact) or real mean-field values
    N*x_i (log-gamma extension).
    """
    occ = np.asarray(occupancies, dtype=float)
    return float(log_factorial(n_total) - math.fsum(np.atleast_1d(log_factorial(occ))))


@dataclass(frozen=True)
class PotentialBreakdown:
    phi_u: float
    phi_v: float
    phi_f: float

    @property
    def phi_total(self) -> float:
        return self.phi_u + self.phi_v + self.phi_f


def _level_occupancies(state: PopulationState) -> tuple[np.ndarray, int]:
    """Per-level total occupancy (counts or N*shares) and N."""
    n_total = state.n_total
    if state.mode == "counts":
        return state.combined_counts().astype(float), n_total
    return state.combined_shares() * n_total, n_total


def potential(state: PopulationState, grid: SalaryGrid,
              params: ClassParams) -> PotentialBreakdown:
    """Potential of the pay game for a single preference class.

    Multi-class states are evaluated on their combined per-level occupancy
    (the congestion term only sees totals).
    """
    x = state.combined_shares()
    if grid.n != x.size:
        raise ValueError("state and grid level counts differ")
    ls = grid.log_levels
    phi_u = params.alpha * math.fsum(x * ls)
    phi_v = -params.beta * math.fsum(x * ls * ls)
    occ, n_total = _level_occupancies(state)
    phi_f = params.gamma / n_total * log_multiplicity(occ, n_total)
    return PotentialBreakdown(phi_u, phi_v, phi_f)


def thermo_potential(state: PopulationState, grid: EnergyGrid) -> PotentialBreakdown:
    """-(betaT/N) E + (1/N) ln W with E = N * sum x_i E_i."""
    x = state.combined_shares()
    if grid.n != x.size:
        raise ValueError("state and grid level counts differ")
    occ, n_total = _level_occupancies(state)
    energy = n_total * math.fsum(x * grid.energies)
    phi_u = -(grid.betaT / n_total) * energy
    phi_f = log_multiplicity(occ, n_total) / n_total
    return PotentialBreakdown(phi_u, 0.0, phi_f)


def entropy_stirling(shares) -> float:
    """Large-N per-agent entropy -sum x ln x, with 0 ln 0 = 0."""
    x = np.asarray(shares, dtype=float).ravel()
    if np.any(x < 0):
        raise ValueError("shares must be nonnegative")
    nz = x[x > 0]
    return -math.fsum(nz * np.log(nz))


def helmholtz_check(state: PopulationState, grid: EnergyGrid):
    """Cross-check the potential against the free-energy form.

    Returns (phi, free_energy_form, abs_difference) where the second value is
    -(betaT/N)(E - S/betaT) with S = ln W, computed as an independent
    expression. The two agree to rounding for every valid state.
    """
    x = state.combined_shares()
    occ, n_total = _level_occupancies(state)
    phi = thermo_potential(state, grid).phi_total

    energy = n_total * math.fsum(x * grid.energies)
    s_entropy = log_multiplicity(occ, n_total)
    if grid.betaT == 0:
        free_form = s_entropy / n_total
    else:
        helmholtz = energy - s_entropy / grid.betaT
        free_form = -(grid.betaT / n_total) * helmholtz
    return phi, free_form, abs(phi - free_form)


def stirling_entropy_gap(shares, n_total: float, gamma: float = 1.0) -> float:
    """|(gamma/N) ln W - gamma * entropy_stirling(x)| for shares x.

    The gap scales like n_occupied * ln(N) / N; it measures how far the exact
    multiplicity entropy sits from its Stirling limit at a given scale.
    """
    x = np.asarray(shares, dtype=float).ravel()
    lnw = log_multiplicity(x * n_total, n_total)
    return abs(gamma / n_total * lnw - gamma * entropy_stirling(x))
