"""Domain types and payoff functions for the pay game and its thermodynamic twin.

The model: N agents distribute themselves over n discrete salary levels.
An agent of a class with preferences (alpha, beta, gamma) occupying a level
with salary S shared by N_i agents gets

    h = alpha*ln(S) - beta*(ln S)**2 - gamma*ln(N_i)

The first two terms trade off pay against the effort/cost of holding the job;
the last is a congestion (fairness) term. An empty level is infinitely
attractive, which is what keeps every level populated in equilibrium.

The thermodynamic variant replaces the salary terms with -betaT*E_i and fixes
gamma = 1; it exists so the machinery can be cross-checked against the
Gibbs-Boltzmann closed form.

All functions here are pure; nothing mutates shared state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "INFINITE_UTILITY",
    "SalaryGrid",
    "ClassParams",
    "EnergyGrid",
    "PopulationState",
    "Scenario",
    "DynamicsSettings",
    "payoff",
    "thermo_payoff",
    "utility_part",
]

# Sentinel utility of an empty level. Compares greater than every finite value.
INFINITE_UTILITY = math.inf


@dataclass(frozen=True)
class SalaryGrid:
    """Ordered discrete salary levels, in kilodollars."""

    levels: np.ndarray

    def __init__(self, levels: Sequence[float]):
        arr = np.asarray(levels, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("salary grid needs at least 2 levels")
        if not np.all(arr > 0):
            raise ValueError("salary levels must be strictly positive")
        if not np.all(np.diff(arr) > 0):
            raise ValueError("salary levels must be strictly increasing")
        arr.flags.writeable = False
        object.__setattr__(self, "levels", arr)

    @classmethod
    def uniform(cls, s_min: float, s_max: float, n: int) -> "SalaryGrid":
        """n levels spaced uniformly in salary."""
        return cls(np.linspace(s_min, s_max, n))

    @classmethod
    def log_uniform(cls, s_min: float, s_max: float, n: int) -> "SalaryGrid":
        """n levels spaced uniformly in log-salary."""
        return cls(np.geomspace(s_min, s_max, n))

    @property
    def n(self) -> int:
        return self.levels.size

    @property
    def s_min(self) -> float:
        return float(self.levels[0])

    @property
    def s_max(self) -> float:
        return float(self.levels[-1])

    @property
    def log_levels(self) -> np.ndarray:
        return np.log(self.levels)

    def bin_widths(self) -> np.ndarray:
        """Per-level salary bin widths (midpoint rule, half bins at the edges)."""
        edges = np.empty(self.n + 1)
        edges[1:-1] = 0.5 * (self.levels[:-1] + self.levels[1:])
        edges[0] = self.levels[0] - (edges[1] - self.levels[0])
        edges[-1] = self.levels[-1] + (self.levels[-1] - edges[-2])
        return np.diff(edges)


@dataclass(frozen=True)
class ClassParams:
    """One agent class's preference triple. All three strictly positive."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class EnergyGrid:
    """Per-state energies with a temperature-scaled coefficient betaT = 1/kT."""

    energies: np.ndarray
    betaT: float = 1.0

    def __init__(self, energies: Sequence[float], betaT: float = 1.0):
        arr = np.asarray(energies, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("energy grid needs at least 1 state")
        if not np.all(np.isfinite(arr)):
            raise ValueError("energies must be finite")
        if not (math.isfinite(betaT) and betaT >= 0):
            raise ValueError("betaT must be finite and >= 0")
        arr.flags.writeable = False
        object.__setattr__(self, "energies", arr)
        object.__setattr__(self, "betaT", float(betaT))

    @property
    def n(self) -> int:
        return self.energies.size


class PopulationState:
    """Per-class, per-level occupancy: integer counts or real shares.

    table has shape (k, n): k agent classes, n levels. In "counts" mode rows
    hold nonnegative integers summing to the class sizes; in "shares" mode the
    whole table is nonnegative and sums to 1.
    """

    __slots__ = ("table", "mode", "n_total")

    def __init__(self, table, mode: str, n_total: int):
        if mode not in ("counts", "shares"):
            raise ValueError(f"mode must be 'counts' or 'shares', got {mode!r}")
        arr = np.atleast_2d(np.asarray(table))
        if np.any(arr < 0):
            raise ValueError("occupancies must be nonnegative")
        if not (isinstance(n_total, (int, np.integer)) and n_total >= 1):
            raise ValueError("n_total must be a positive integer")
        if mode == "counts":
            arr = arr.astype(np.int64)
            if int(arr.sum()) != int(n_total):
                raise ValueError("counts must sum to n_total")
        else:
            arr = arr.astype(float)
            if abs(float(arr.sum()) - 1.0) > 1e-9:
                raise ValueError("shares must sum to 1")
        self.table = arr
        self.mode = mode
        self.n_total = int(n_total)

    @classmethod
    def from_shares(cls, shares, n_total: int = 1) -> "PopulationState":
        return cls(shares, "shares", n_total)

    @classmethod
    def from_counts(cls, counts) -> "PopulationState":
        arr = np.atleast_2d(np.asarray(counts, dtype=np.int64))
        return cls(arr, "counts", int(arr.sum()))

    @property
    def k(self) -> int:
        return self.table.shape[0]

    @property
    def n(self) -> int:
        return self.table.shape[1]

    def class_totals(self) -> np.ndarray:
        """Per-class agent totals (counts) or mass (shares)."""
        return self.table.sum(axis=1)

    def shares(self) -> np.ndarray:
        """The (k, n) table as shares summing to 1."""
        if self.mode == "shares":
            return self.table
        return self.table / self.n_total

    def combined_shares(self) -> np.ndarray:
        """Per-level shares summed over classes; the game's state vector x."""
        return self.shares().sum(axis=0)

    def combined_counts(self) -> np.ndarray:
        if self.mode != "counts":
            raise ValueError("combined_counts requires counts mode")
        return self.table.sum(axis=0)


@dataclass(frozen=True)
class DynamicsSettings:
    """Mean-field integration controls."""

    dt: float = 1e-3
    max_steps: int = 200_000
    tolerance: float = 1e-9

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be finite and > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not (self.tolerance > 0):
            raise ValueError("tolerance must be > 0")


@dataclass(frozen=True)
class Scenario:
    """A full market setup: grid, classes with sizes, and run controls.

    budget is a reported diagnostic only; nothing in the dynamics enforces it.
    """

    grid: SalaryGrid
    classes: tuple  # ((ClassParams, N_j), ...)
    rng_seed: int = 0
    budget: float | None = None  # kilodollars
    dynamics: DynamicsSettings = field(default_factory=DynamicsSettings)

    def __post_init__(self):
        if len(self.classes) < 1:
            raise ValueError("scenario needs at least one class")
        for params, count in self.classes:
            if not isinstance(params, ClassParams):
                raise ValueError("each class entry is (ClassParams, N_j)")
            if int(count) < 1:
                raise ValueError("each class needs N_j >= 1")
        object.__setattr__(self, "classes", tuple((p, int(c)) for p, c in self.classes))

    @property
    def n_total(self) -> int:
        return sum(c for _, c in self.classes)

    def class_weights(self) -> np.ndarray:
        n = self.n_total
        return np.array([c / n for _, c in self.classes])


def utility_part(salary, params: ClassParams):
    """The occupancy-free part of the payoff: alpha*lnS - beta*(lnS)^2.

    Accepts scalars or arrays; salary in kilodollars.
    """
    s = np.asarray(salary, dtype=float)
    if np.any(s <= 0):
        raise ValueError("salary must be strictly positive")
    ls = np.log(s)
    out = params.alpha * ls - params.beta * ls * ls
    return float(out) if out.ndim == 0 else out


def payoff(salary: float, occupancy: float, params: ClassParams) -> float:
    """Utility of one agent at a salary level with the given total occupancy.

    Returns alpha*lnS - beta*(lnS)^2 - gamma*ln(occupancy); an empty level
    returns the +infinity sentinel.
    """
    if salary <= 0:
        raise ValueError("salary must be strictly positive")
    if occupancy < 0:
        raise ValueError("occupancy must be nonnegative")
    if occupancy == 0:
        return INFINITE_UTILITY
    return utility_part(salary, params) - params.gamma * math.log(occupancy)


def thermo_payoff(state_index: int, occupancy: float, grid: EnergyGrid) -> float:
    """Thermodynamic payoff -betaT*E_i - ln(occupancy); +inf when empty."""
    if occupancy < 0:
        raise ValueError("occupancy must be nonnegative")
    if occupancy == 0:
        return INFINITE_UTILITY
    e = float(grid.energies[state_index])
    return -grid.betaT * e - math.log(occupancy)
