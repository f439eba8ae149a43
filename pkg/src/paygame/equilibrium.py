"""Closed-form and numerical equilibrium solvers.

Single class: the potential's unique maximizer is a discretized lognormal,

    x_i  propto  (1/S_i) exp[-(ln S_i - mu)^2 / (2 sigma^2)]
    mu = (alpha + gamma) / (2 beta),  sigma^2 = gamma / (2 beta)

Multi-class: each class j is payoff-flat at h*_j on its own level set Omega_j
and strictly worse elsewhere. At equilibrium a level's density is the largest
of the per-class indifference densities

    q_j(i) = exp[(a_j(S_i) - h*_j) / gamma_j] / N,   a_j = alpha_j lnS - beta_j (lnS)^2

and the level belongs to the arg-max class. Two independent solvers use this:
a best-response fixed point on the level assignment (h*_j has a closed form
once Omega_j is fixed), and a direct root-finder on (h*_1..h*_k) mass balances.

Normalization is reported two ways per class: the grid-summation Z and the
multiplier form Z = N exp[lambda/gamma - (alpha+gamma)^2/(4 beta gamma)] with
lambda = h*, plus their relative consistency residual.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit
from scipy.optimize import brentq
from scipy.special import logsumexp

from .core import ClassParams, EnergyGrid, SalaryGrid, utility_part

__all__ = [
    "LognormalParams",
    "EquilibriumSolution",
    "ChebyshevSigma",
    "NonConvergenceError",
    "boltzmann_equilibrium",
    "lognormal_equilibrium",
    "params_to_lognormal",
    "lognormal_to_params",
    "chebyshev_sigma",
    "maximize_potential",
    "maximize_thermo_potential",
    "bipop_equilibrium",
    "bipop_mixture_approx",
    "solve_scenario",
    "interface_continuity",
]


class NonConvergenceError(RuntimeError):
    """Solver ran out of iteration budget; carries the last residual."""

    def __init__(self, residual: float, iterations: int = 0, message: str = ""):
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(
            message
            or f"no convergence after {iterations} iterations; last residual {residual:.3e}"
        )


@dataclass(frozen=True)
class LognormalParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ValueError("sigma must be > 0")


class ChebyshevSigma(NamedTuple):
    sigma: float
    confidence: float


@dataclass
class EquilibriumSolution:
    """Equilibrium densities with per-class partition and payoff levels.

    densities has shape (k, n); row j is zero outside partition[j]. h_star[j]
    is class j's flat equilibrium payoff, lagrange_lambda its normalization
    multiplier (equal to h_star for this game). z_grid / z_lambda are the two
    normalization routes with their relative residual.
    """

    densities: np.ndarray
    partition: tuple
    h_star: np.ndarray
    z_grid: np.ndarray
    z_lambda: np.ndarray
    z_residual: np.ndarray
    lagrange_lambda: np.ndarray
    n_total: int
    residual: float = 0.0
    flatness: float = 0.0
    iterations: int = 0
    degenerate: bool = False
    method: str = "closed-form"

    @property
    def k(self) -> int:
        return self.densities.shape[0]

    @property
    def combined_density(self) -> np.ndarray:
        return self.densities.sum(axis=0)

    def holder(self) -> np.ndarray:
        """Index of the class holding each level (-1 if degenerate overlap)."""
        if self.degenerate:
            return np.full(self.densities.shape[1], -1)
        out = np.zeros(self.densities.shape[1], dtype=np.int64)
        for j, idx in enumerate(self.partition):
            out[idx] = j
        return out


def boltzmann_equilibrium(grid: EnergyGrid) -> np.ndarray:
    """Gibbs-Boltzmann closed form: softmax of -betaT * E."""
    z = -grid.betaT * grid.energies
    x = np.exp(z - z.max())
    x /= x.sum()
    return x


def params_to_lognormal(params: ClassParams) -> LognormalParams:
    mu = (params.alpha + params.gamma) / (2.0 * params.beta)
    sigma = math.sqrt(params.gamma / (2.0 * params.beta))
    return LognormalParams(mu, sigma)


def lognormal_to_params(ln_params: LognormalParams, gamma: float) -> ClassParams:
    """Invert the (mu, sigma) identities; gamma fixes the free scale."""
    if not (gamma > 0):
        raise ValueError("gamma must be > 0")
    if not (ln_params.sigma > 0):
        raise ValueError("sigma must be > 0")
    beta = gamma / (2.0 * ln_params.sigma ** 2)
    alpha = 2.0 * beta * ln_params.mu - gamma
    return ClassParams(alpha, beta, gamma)


def _log_kernel(log_levels: np.ndarray, lp: LognormalParams) -> np.ndarray:
    # ln of (1/S) exp[-(lnS - mu)^2 / (2 sigma^2)]
    return -log_levels - (log_levels - lp.mu) ** 2 / (2.0 * lp.sigma ** 2)


def lognormal_equilibrium(grid: SalaryGrid,
                          params: ClassParams) -> tuple[np.ndarray, LognormalParams]:
    """The unique single-class equilibrium on the grid and its (mu, sigma)."""
    lp = params_to_lognormal(params)
    lk = _log_kernel(grid.log_levels, lp)
    x = np.exp(lk - logsumexp(lk))
    x /= x.sum()
    return x, lp


def chebyshev_sigma(M: float, S_min: float, a: float) -> ChebyshevSigma:
    """Distribution-free sigma bound from the pay range: (lnM - lnS_min)/(2a).

    Also reports the Chebyshev confidence 1 - 1/a^2 of the +-a sigma window.
    Scale-invariant in the salary unit (only the ratio M/S_min enters).
    """
    if not (M > S_min > 0):
        raise ValueError("need M > S_min > 0")
    if not (a > 0):
        raise ValueError("need a > 0")
    return ChebyshevSigma(math.log(M / S_min) / (2.0 * a), 1.0 - 1.0 / (a * a))


# ---------------------------------------------------------------------------
# Projected-gradient maximizer (independent numerical route to the equilibria)
#
# The objective sum(x*a) - gamma*sum(x ln x) on the floored simplex
# {x >= floor, sum x = 1} has exact curvature bounds: smoothness gamma/floor
# and strong concavity gamma (since x <= 1). Accelerated projected gradient
# with those constants needs no line search, which matters here because f
# sits near 500 and per-step improvements drop below double-precision
# resolution long before the iterate itself is converged. Tiny floors make
# the condition number 1/floor, so the driver runs a floor continuation:
# solve at floor 1e-3-ish, reuse as warm start while shrinking the floor
# tenfold per stage down to 1e-8. Coordinates whose true density is below
# the final floor park there; that biases the rest by under 1e-7 in this
# package's use (grids of <= a few hundred levels).

@njit(cache=True)
def _pg_project(v, floor, free):
    # Euclidean projection onto {x >= floor, sum x = 1}, sort-based
    n = v.size
    u = np.sort(v - floor)[::-1]
    css = 0.0
    theta = 0.0
    for i in range(n):
        css += u[i]
        t = (css - free) / (i + 1.0)
        if u[i] - t > 0.0:
            theta = t
    out = np.empty(n)
    for i in range(n):
        w = v[i] - floor - theta
        out[i] = (w if w > 0.0 else 0.0) + floor
    return out


@njit(cache=True)
def _pg_kkt_xerr(x, a, gamma, floor):
    # first-order estimate of the L_inf density error: at the optimum
    # a - gamma(ln x + 1) is a constant on non-parked coordinates, and a
    # payoff slack eps moves the density by about x * eps / gamma
    n = x.size
    lam = 0.0
    wsum = 0.0
    for i in range(n):
        if x[i] > 2.0 * floor:
            lam += x[i] * (a[i] - gamma * (np.log(x[i]) + 1.0))
            wsum += x[i]
    if wsum <= 0.0:
        return np.inf
    lam /= wsum
    worst = 0.0
    for i in range(n):
        if x[i] > 2.0 * floor:
            e = x[i] * abs(a[i] - gamma * (np.log(x[i]) + 1.0) - lam) / gamma
            if e > worst:
                worst = e
    return worst


@njit(cache=True)
def _pg_stage(x0, a, gamma, floor, tol, max_iters):
    n = a.size
    free = 1.0 - n * floor
    x = _pg_project(x0, floor, free)
    y = x.copy()
    L = gamma / floor
    rk = math.sqrt(1.0 / floor)  # sqrt of the condition number at this floor
    beta = (rk - 1.0) / (rk + 1.0)
    it = 0
    while it < max_iters:
        g = np.empty(n)
        for i in range(n):
            g[i] = a[i] - gamma * (np.log(y[i]) + 1.0)
        xn = _pg_project(y + g / L, floor, free)
        y = _pg_project(xn + beta * (xn - x), floor, free)
        x = xn
        it += 1
        if it % 50 == 0 and _pg_kkt_xerr(x, a, gamma, floor) < tol:
            break
    return x, it


def _pg_maximize(a: np.ndarray, gamma: float, start: np.ndarray | None = None,
                 floor: float = 1e-8, tol: float = 1e-9,
                 max_iters: int = 2_000_000) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    n = a.size
    if n * floor >= 0.1:
        raise ValueError("floor too large for this many levels")
    x = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=np.float64)
    stage_floor = max(min(1e-2, 0.1 / n), floor)
    total = 0
    while True:
        last = stage_floor <= floor * 1.0001
        stage_tol = tol if last else max(tol, stage_floor * 1e-4)
        x, used = _pg_stage(x, a, gamma, stage_floor, stage_tol, max_iters - total)
        total += used
        if last:
            break
        if x.min() > 1.5 * stage_floor:
            # nothing parked at this floor; polish here, then confirm that
            # shrinking the floor further would leave the solution untouched
            x, used = _pg_stage(x, a, gamma, stage_floor, tol, max_iters - total)
            total += used
            if x.min() > 1.5 * stage_floor:
                break
        stage_floor = max(stage_floor * 0.1, floor)
    return x


def maximize_potential(grid: SalaryGrid, params: ClassParams,
                       start: np.ndarray | None = None,
                       tol: float = 1e-9, max_iters: int = 2_000_000) -> np.ndarray:
    """Projected-gradient argmax of the mean-field pay-game potential."""
    a = utility_part(grid.levels, params)
    return _pg_maximize(a, params.gamma, start, tol=tol, max_iters=max_iters)


def maximize_thermo_potential(grid: EnergyGrid,
                              start: np.ndarray | None = None,
                              tol: float = 1e-11,
                              max_iters: int = 2_000_000) -> np.ndarray:
    """Projected-gradient argmax of the thermodynamic potential."""
    return _pg_maximize(-grid.betaT * grid.energies, 1.0, start,
                        tol=tol, max_iters=max_iters)


# ---------------------------------------------------------------------------
# Multi-class equilibrium

def _class_arrays(grid, params_list):
    A = np.stack([utility_part(grid.levels, p) for p in params_list])
    gam = np.array([p.gamma for p in params_list])
    return A, gam


def _claim_densities(A, gam, h, n_total):
    """Per-class indifference densities q_j(i) at payoff levels h."""
    return np.exp((A - h[:, None]) / gam[:, None]) / n_total


def _closed_form_h(A_row: np.ndarray, gamma: float, mask: np.ndarray,
                   n_total: int, weight: float) -> float:
    # h with sum_{i in mask} q_j(i) == weight, in closed form
    return gamma * (logsumexp(A_row[mask] / gamma) - math.log(n_total * weight))


def _assignment_solve(grid, params_list, weights, n_total,
                      tol=1e-10, max_iters=500):
    """Best-response fixed point on the level assignment."""
    k = len(params_list)
    n = grid.n
    A, gam = _class_arrays(grid, params_list)

    logk = np.stack([_log_kernel(grid.log_levels, params_to_lognormal(p))
                     for p in params_list])
    init = np.exp(logk - logsumexp(logk, axis=1, keepdims=True)) * weights[:, None]
    holder = init.argmax(axis=0)

    h = np.empty(k)
    x_prev = None
    residual = math.inf
    for it in range(1, max_iters + 1):
        for j in range(k):
            mask = holder == j
            if not mask.any():
                raise NonConvergenceError(
                    float(weights[j]), it,
                    f"class {j} lost every level during assignment iteration")
            h[j] = _closed_form_h(A[j], gam[j], mask, n_total, weights[j])
        q = _claim_densities(A, gam, h, n_total)
        new_holder = q.argmax(axis=0)
        x = q[new_holder, np.arange(n)]
        mass = np.bincount(new_holder, weights=x, minlength=k)
        residual = float(np.abs(mass - weights).max())
        change = math.inf if x_prev is None else float(np.abs(x - x_prev).max())
        if np.array_equal(new_holder, holder) and residual <= tol and change <= 1e-10:
            return new_holder, x, h.copy(), residual, it
        holder, x_prev = new_holder, x
    raise NonConvergenceError(residual, max_iters)


def _direct_solve(grid, params_list, weights, n_total,
                  tol=1e-10, max_outer=100):
    """Root-find the per-class mass balances directly in (h_1..h_k)."""
    k = len(params_list)
    n = grid.n
    A, gam = _class_arrays(grid, params_list)
    all_mask = np.ones(n, dtype=bool)

    def masses(h):
        q = _claim_densities(A, gam, h, n_total)
        hold = q.argmax(axis=0)
        x = q[hold, np.arange(n)]
        return np.bincount(hold, weights=x, minlength=k), x, hold

    # start from each class's solo equilibrium payoff
    h = np.array([_closed_form_h(A[j], gam[j], all_mask, n_total, weights[j])
                  for j in range(k)])
    residual = math.inf
    for outer in range(1, max_outer + 1):
        h_old = h.copy()
        for j in range(k):
            def balance(hj, j=j):
                trial = h.copy()
                trial[j] = hj
                return masses(trial)[0][j] - weights[j]

            lo, hi = h[j] - 1.0, h[j] + 1.0
            for _ in range(200):  # mass is decreasing in h_j; expand to bracket
                if balance(lo) > 0:
                    break
                lo -= max(1.0, hi - lo)
            for _ in range(200):
                if balance(hi) < 0:
                    break
                hi += max(1.0, hi - lo)
            h[j] = brentq(balance, lo, hi, xtol=1e-13, rtol=8.9e-16)
        mass, x, hold = masses(h)
        residual = float(np.abs(mass - weights).max())
        if residual <= tol and float(np.abs(h - h_old).max()) <= 1e-10:
            return hold, x, h, residual, outer
    raise NonConvergenceError(residual, max_outer)


def _z_report(params_list, grid, holder, h, weights, n_total):
    k = len(params_list)
    z_grid = np.empty(k)
    z_lambda = np.empty(k)
    for j, p in enumerate(params_list):
        lp = params_to_lognormal(p)
        mask = holder == j if holder is not None else np.ones(grid.n, dtype=bool)
        kern = np.exp(_log_kernel(grid.log_levels, lp))
        z_grid[j] = kern[mask].sum() / weights[j]
        peak = (p.alpha + p.gamma) ** 2 / (4.0 * p.beta * p.gamma)
        z_lambda[j] = n_total * math.exp(h[j] / p.gamma - peak)
    z_residual = np.abs(z_lambda - z_grid) / z_grid
    return z_grid, z_lambda, z_residual


def _flatness(A, gam, densities, partition, h, n_total):
    worst = 0.0
    for j, idx in enumerate(partition):
        if idx.size == 0:
            continue
        pay = A[j, idx] - gam[j] * np.log(n_total * densities[j, idx])
        worst = max(worst, float(np.abs(pay - h[j]).max() / max(1.0, abs(h[j]))))
    return worst


def _multi_class_solution(grid, params_list, counts, method, tol, max_iters):
    n_total = int(sum(counts))
    weights = np.array([c / n_total for c in counts], dtype=float)
    if np.any(weights <= 0):
        raise ValueError("every class needs at least one agent")

    if method == "fixed-point":
        holder, x, h, residual, iters = _assignment_solve(
            grid, params_list, weights, n_total, tol=tol, max_iters=max_iters)
    elif method == "direct":
        holder, x, h, residual, iters = _direct_solve(
            grid, params_list, weights, n_total, tol=tol, max_outer=max_iters)
    else:
        raise ValueError(f"unknown method {method!r}")

    k = len(params_list)
    densities = np.zeros((k, grid.n))
    densities[holder, np.arange(grid.n)] = x
    partition = tuple(np.flatnonzero(holder == j) for j in range(k))
    A, gam = _class_arrays(grid, params_list)
    z_grid, z_lambda, z_residual = _z_report(
        params_list, grid, holder, h, weights, n_total)
    return EquilibriumSolution(
        densities=densities, partition=partition, h_star=h,
        z_grid=z_grid, z_lambda=z_lambda, z_residual=z_residual,
        lagrange_lambda=h.copy(), n_total=n_total, residual=residual,
        flatness=_flatness(A, gam, densities, partition, h, n_total),
        iterations=iters, method=method)


def _degenerate_solution(grid, params, counts, method):
    """Identical preference classes: labels carry no information."""
    n_total = int(sum(counts))
    weights = np.array([c / n_total for c in counts], dtype=float)
    x, _ = lognormal_equilibrium(grid, params)
    densities = weights[:, None] * x[None, :]
    h_flat = utility_part(grid.s_min, params) - params.gamma * math.log(
        n_total * x[0])
    k = len(counts)
    h = np.full(k, h_flat)
    holder = None
    z_grid, z_lambda, z_residual = _z_report(
        [params] * k, grid, holder, h, np.ones(k), n_total)
    return EquilibriumSolution(
        densities=densities, partition=tuple(np.arange(grid.n) for _ in counts),
        h_star=h, z_grid=z_grid, z_lambda=z_lambda, z_residual=z_residual,
        lagrange_lambda=h.copy(), n_total=n_total, residual=0.0,
        flatness=0.0, iterations=0, degenerate=True, method=method)


def bipop_equilibrium(grid: SalaryGrid,
                      class1: tuple[ClassParams, int],
                      class2: tuple[ClassParams, int],
                      method: str = "fixed-point",
                      tol: float = 1e-10,
                      max_iters: int = 500) -> EquilibriumSolution:
    """Two-class equilibrium: densities, partition, per-class h*.

    method="fixed-point" iterates a best response on the level assignment;
    method="direct" root-finds the mass balances in (h*_1, h*_2). Both land
    on the same solution; the second exists as an independent cross-check.
    Identical ClassParams degenerate to the single-class equilibrium split
    in proportion to class sizes (flagged, partition overlaps by design).
    """
    (p1, n1), (p2, n2) = class1, class2
    if n1 < 1 or n2 < 1:
        raise ValueError("both classes need at least one agent")
    if p1 == p2:
        return _degenerate_solution(grid, p1, (n1, n2), method)
    return _multi_class_solution(grid, [p1, p2], (n1, n2), method, tol, max_iters)


def bipop_mixture_approx(grid: SalaryGrid,
                         class1: tuple[ClassParams, int],
                         class2: tuple[ClassParams, int]) -> np.ndarray:
    """Two-lognormal mixture: per-class grid-normalized kernels, weights N_j/N."""
    (p1, n1), (p2, n2) = class1, class2
    if n1 < 0 or n2 < 0 or n1 + n2 < 1:
        raise ValueError("need a nonempty population")
    total = n1 + n2
    out = np.zeros(grid.n)
    for p, nj in ((p1, n1), (p2, n2)):
        if nj == 0:
            continue
        lk = _log_kernel(grid.log_levels, params_to_lognormal(p))
        xj = np.exp(lk - logsumexp(lk))
        out += (nj / total) * (xj / xj.sum())
    return out


def solve_scenario(scenario, method: str = "fixed-point",
                   tol: float = 1e-10, max_iters: int = 500) -> EquilibriumSolution:
    """Equilibrium for a Scenario of any class count (1 = closed form)."""
    grid = scenario.grid
    params_list = [p for p, _ in scenario.classes]
    counts = [c for _, c in scenario.classes]
    if len(params_list) == 1:
        p, n_total = params_list[0], counts[0]
        x, _ = lognormal_equilibrium(grid, p)
        h_flat = utility_part(grid.s_min, p) - p.gamma * math.log(n_total * x[0])
        h = np.array([h_flat])
        z_grid, z_lambda, z_residual = _z_report(
            params_list, grid, None, h, np.ones(1), n_total)
        A, gam = _class_arrays(grid, params_list)
        densities = x[None, :]
        partition = (np.arange(grid.n),)
        return EquilibriumSolution(
            densities=densities, partition=partition, h_star=h,
            z_grid=z_grid, z_lambda=z_lambda, z_residual=z_residual,
            lagrange_lambda=h.copy(), n_total=n_total, residual=0.0,
            flatness=_flatness(A, gam, densities, partition, h, n_total),
            iterations=0, method="closed-form")
    if len(set(params_list)) == 1:
        return _degenerate_solution(grid, params_list[0], counts, method)
    return _multi_class_solution(grid, params_list, counts, method, tol, max_iters)


def interface_continuity(solution: EquilibriumSolution, grid: SalaryGrid,
                         params_list: Sequence[ClassParams]):
    """Density jumps across partition interfaces vs the analytic-slope bound.

    For each adjacent level pair held by different classes, returns
    (i, i+1, |x_{i+1}-x_i|, bound) with bound = local analytic |dx/dS| times
    grid spacing times 2, the slope taken as the larger of the two adjacent
    classes' analytic profiles at their own levels.
    """
    if solution.degenerate:
        return []
    holder = solution.holder()
    x = solution.combined_density
    out = []
    for i in range(grid.n - 1):
        ja, jb = holder[i], holder[i + 1]
        if ja == jb:
            continue
        ds = grid.levels[i + 1] - grid.levels[i]
        slopes = []
        for j, lev, xi in ((ja, grid.levels[i], x[i]), (jb, grid.levels[i + 1], x[i + 1])):
            p = params_list[j]
            lp = params_to_lognormal(p)
            dlnx_dlns = -1.0 - (math.log(lev) - lp.mu) / lp.sigma ** 2
            slopes.append(abs(xi * dlnx_dlns / lev))
        bound = max(slopes) * ds * 2.0
        out.append((i, i + 1, float(abs(x[i + 1] - x[i])), float(bound)))
    return out
