"""Mean-field evolutionary dynamics: replicator steps and integration.

The mean dynamics of the imitative revision protocol is the replicator ODE

    dx_i/dt = rate * x_i * (h_i - hbar),   hbar = sum_j x_j h_j

with the mean-field payoff h_i = a(S_i) - gamma*ln(N x_i) (Stirling form of
the congestion term). Integration is explicit Euler with adaptive step:
a step is retried at half size when it would push a share negative (error
after 60 halvings) or when it would decrease the potential by more than the
per-step tolerance; the potential along a deterministic trajectory is
nondecreasing to within 1e-12, which doubles as an integration sanity check.

Works against a SalaryGrid + ClassParams pair or an EnergyGrid (the
thermodynamic game: a = -betaT*E, gamma = 1, same machinery).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ClassParams, EnergyGrid, PopulationState, SalaryGrid, utility_part
from .equilibrium import NonConvergenceError
from .potential import potential as pay_potential
from .potential import thermo_potential

__all__ = [
    "RevisionProtocol",
    "TrajectoryRecord",
    "replicator_step",
    "integrate_to_equilibrium",
    "LYAPUNOV_TOLERANCE",
]

LYAPUNOV_TOLERANCE = 1e-12
MAX_HALVINGS = 60


@dataclass(frozen=True)
class RevisionProtocol:
    kind: str = "imitative-replicator"
    rate_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("imitative-replicator", "best-response"):
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if not (math.isfinite(self.rate_scale) and self.rate_scale > 0):
            raise ValueError("rate_scale must be finite and > 0")


@dataclass(frozen=True)
class TrajectoryRecord:
    step: int
    state: PopulationState
    potential: float
    mean_payoff: np.ndarray
    residual: float


def _payoff_terms(grid, params):
    """(a, gamma) for either game flavor."""
    if isinstance(grid, EnergyGrid):
        return -grid.betaT * grid.energies, 1.0
    if params is None:
        raise ValueError("a SalaryGrid needs ClassParams")
    return utility_part(grid.levels, params), params.gamma


def _payoffs(x, a, gamma, n_total):
    """Mean-field payoffs; zero-share levels get 0 (their velocity is 0)."""
    h = np.zeros_like(x)
    pos = x > 0
    h[pos] = a[pos] - gamma * np.log(n_total * x[pos])
    return h


def _velocity(x, a, gamma, n_total, rate):
    h = _payoffs(x, a, gamma, n_total)
    hbar = float(x @ h)
    return rate * x * (h - hbar), hbar


def _best_response_velocity(x, a, gamma, n_total, rate):
    h = _payoffs(x, a, gamma, n_total)
    h = np.where(x > 0, h, np.inf)  # empty levels are infinitely attractive
    target = np.zeros_like(x)
    best = np.flatnonzero(h == h.max())
    target[best] = 1.0 / best.size
    hbar = float(x @ np.where(np.isfinite(h), h, 0.0))
    return rate * (target - x), hbar


def _potential_of(x, grid, params, n_total):
    state = PopulationState.from_shares(x, n_total)
    if isinstance(grid, EnergyGrid):
        return thermo_potential(state, grid).phi_total, state
    return pay_potential(state, grid, params).phi_total, state


def _euler_step(x, a, gamma, n_total, dt, rate, kind):
    vel = _velocity if kind == "imitative-replicator" else _best_response_velocity
    v, _ = vel(x, a, gamma, n_total, rate)
    for halvings in range(MAX_HALVINGS + 1):
        trial = x + dt * v
        if trial.min() >= 0.0:
            return trial / trial.sum(), dt
        dt *= 0.5
    raise RuntimeError(
        f"step size underflow: share still negative after {MAX_HALVINGS} halvings")


def replicator_step(state: PopulationState, grid, params: ClassParams | None,
                    dt: float, protocol: RevisionProtocol | None = None
                    ) -> PopulationState:
    """One explicit step of the mean dynamics, renormalized to the simplex."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    protocol = protocol or RevisionProtocol()
    a, gamma = _payoff_terms(grid, params)
    x = state.combined_shares()
    xn, _ = _euler_step(x, a, gamma, state.n_total, dt, protocol.rate_scale,
                        protocol.kind)
    return PopulationState.from_shares(xn, state.n_total)


def integrate_to_equilibrium(initial_state: PopulationState, grid,
                             params: ClassParams | None = None,
                             protocol: RevisionProtocol | None = None,
                             tolerance: float = 1e-9,
                             max_steps: int = 100_000,
                             dt0: float = 1e-3,
                             dt_max: float = 1.0,
                             ) -> tuple[PopulationState, list[TrajectoryRecord]]:
    """Iterate steps until the velocity's max-norm falls below tolerance.

    Returns the final state and the full trajectory (potential recorded at
    every step). The step size adapts: it halves whenever a step would break
    simplex nonnegativity or decrease the potential by more than 1e-12, and
    grows 5% after each clean step. A state that already satisfies the
    tolerance returns immediately with a single record. Exhausting max_steps
    raises NonConvergenceError carrying the last residual.
    """
    protocol = protocol or RevisionProtocol()
    a, gamma = _payoff_terms(grid, params)
    n_total = initial_state.n_total
    vel = (_velocity if protocol.kind == "imitative-replicator"
           else _best_response_velocity)

    x = initial_state.combined_shares().astype(float).copy()
    phi, state = _potential_of(x, grid, params, n_total)
    v, hbar = vel(x, a, gamma, n_total, protocol.rate_scale)
    residual = float(np.abs(v).max())
    trajectory = [TrajectoryRecord(0, state, phi, np.array([hbar]), residual)]
    if residual < tolerance:
        return state, trajectory

    dt = dt0
    for step in range(1, max_steps + 1):
        attempt = dt
        for _ in range(MAX_HALVINGS + 1):
            xn, used = _euler_step(x, a, gamma, n_total, attempt,
                                   protocol.rate_scale, protocol.kind)
            phin, staten = _potential_of(xn, grid, params, n_total)
            if phin >= phi - LYAPUNOV_TOLERANCE:
                break
            attempt = used * 0.5
        else:
            raise RuntimeError(
                f"step size underflow: potential keeps decreasing after "
                f"{MAX_HALVINGS} halvings (step {step})")
        x, phi, state = xn, phin, staten
        v, hbar = vel(x, a, gamma, n_total, protocol.rate_scale)
        residual = float(np.abs(v).max())
        trajectory.append(TrajectoryRecord(step, state, phi,
                                           np.array([hbar]), residual))
        dt = min(used * 1.05, dt_max)
        if residual < tolerance:
            break
    if residual >= tolerance:
        raise NonConvergenceError(residual, len(trajectory) - 1)
    return state, trajectory
