"""Stochastic agent-based simulation of the pay game.

Each epoch one agent is picked uniformly at random and receives a job offer:
by default the offered level is that of another uniformly drawn agent, so
offers arrive in proportion to current occupancy (imitative law); a uniform-
over-levels law is available instead. The agent accepts when the payoff at
the offered level with one more occupant (an empty level is evaluated at
occupancy 1, not at its unbounded vacant utility) strictly exceeds the payoff
at its current level and occupancy. An optional per-epoch firing hazard
forces the picked agent onto a fresh offer draw unconditionally (re-entry),
default off. A sweep is N epochs.

Stationarity: mean occupancy histograms over two consecutive sweep windows
must differ by less than a threshold in L1 (defaults: window 100 sweeps,
threshold 1e-3).

Randomness comes from numpy's counter-based Philox generator; the algorithm
id travels with every result so runs can be reproduced exactly. Two modes:

- sequential: the reference semantics; one agent at a time against live
  occupancy counts.
- parallel: agents are shuffled once into fixed shards; a sweep runs as
  batches of concurrent decisions against an occupancy snapshot refreshed
  between batches, imitative offers draw from the offering shard's own
  agents (live and race-free), each shard uses its own Philox substream,
  and deltas merge in fixed shard order. Deterministic for a given shard
  count regardless of thread schedule (not bit-identical to sequential,
  which remains the reference).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .core import PopulationState, Scenario, utility_part
from .potential import log_multiplicity

__all__ = ["SimulationResult", "SimulationSnapshot", "agent_simulation",
           "warmup_jit", "RNG_ALGORITHM"]

RNG_ALGORITHM = "philox4x64"
PARALLEL_BATCHES = 64  # occupancy-snapshot refreshes per parallel sweep


@dataclass(frozen=True)
class SimulationSnapshot:
    sweep: int
    counts: np.ndarray           # (k, n) per-class occupancy
    mean_payoff: np.ndarray      # (k,) average payoff per class
    potential: float             # multiplicity-based potential diagnostic
    residual: float              # latest stationarity residual (nan before first window)
    accepted_total: int = 0      # accepted moves since the start of the run


@dataclass
class SimulationResult:
    state: PopulationState
    sweeps: int
    epochs: int
    stationary: bool
    residuals: list = field(default_factory=list)   # (sweep, L1) per window pair
    acceptance: list = field(default_factory=list)  # accepted moves per sweep
    snapshots: list = field(default_factory=list)
    window_mean: np.ndarray | None = None           # last full window's mean shares
    rng_algorithm: str = RNG_ALGORITHM
    seed: int = 0
    mode: str = "sequential"
    offers: str = "imitative"

    @property
    def final_shares(self) -> np.ndarray:
        return self.state.combined_counts() / self.state.n_total


@njit(cache=True)
def _sweep_seq(agent_level, agent_class, n_tot, n_cls, A, GAM, logtab,
               picks, offer_agents, offer_levels,
               fire_flags, fire_agents, fire_levels, imitative):
    accepted = 0
    m = picks.shape[0]
    for t in range(m):
        u = picks[t]
        i = agent_level[u]
        c = agent_class[u]
        if fire_flags.shape[0] != 0 and fire_flags[t] == 1:
            if imitative:
                j = agent_level[fire_agents[t]]
            else:
                j = fire_levels[t]
            if j != i:
                n_tot[i] -= 1
                n_tot[j] += 1
                n_cls[c, i] -= 1
                n_cls[c, j] += 1
                agent_level[u] = j
                accepted += 1
            continue
        if imitative:
            j = agent_level[offer_agents[t]]
        else:
            j = offer_levels[t]
        if j == i:
            continue
        # post-move comparison: offered level counted with this agent added,
        # current level counted as-is (so an empty offer is read at 1, not 0)
        cur = A[c, i] - GAM[c] * logtab[n_tot[i] - 1]
        new = A[c, j] - GAM[c] * logtab[n_tot[j]]
        if new > cur:
            n_tot[i] -= 1
            n_tot[j] += 1
            n_cls[c, i] -= 1
            n_cls[c, j] += 1
            agent_level[u] = j
            accepted += 1
    return accepted


@njit(cache=True, parallel=True)
def _sweep_par(agent_level, agent_class, ntot_snap, n_tot, n_cls,
               deltas_tot, deltas_cls, shard_accepted, A, GAM, logtab,
               picks2, offa2, offl2, ff2, fa2, fl2, starts, plens,
               imitative, n_batches):
    # The sweep runs as n_batches parallel rounds. Payoffs are evaluated
    # against an occupancy snapshot refreshed between rounds, so decision
    # staleness is bounded by one batch of moves instead of a whole sweep.
    # Imitative offers stay inside the offering shard: each shard is a
    # uniform sample of the population (agents are shuffled at setup) and
    # only its own worker writes its agents' levels, so the read is live
    # yet race-free. Serial merge order keeps runs bit-reproducible.
    S = plens.shape[0]
    n = n_tot.shape[0]
    k = n_cls.shape[0]
    for b in range(n_batches):
        for i in range(n):
            ntot_snap[i] = n_tot[i]
        for s in range(S):
            for i in range(n):
                deltas_tot[s, i] = 0
            for c in range(k):
                for i in range(n):
                    deltas_cls[s, c, i] = 0
        for s in prange(S):
            base = starts[s]
            lo = (plens[s] * b) // n_batches
            hi = (plens[s] * (b + 1)) // n_batches
            acc = 0
            for t in range(lo, hi):
                u = base + picks2[s, t]
                i = agent_level[u]
                c = agent_class[u]
                if ff2.shape[1] != 0 and ff2[s, t] == 1:
                    if imitative:
                        j = agent_level[base + fa2[s, t]]
                    else:
                        j = fl2[s, t]
                else:
                    if imitative:
                        j = agent_level[base + offa2[s, t]]
                    else:
                        j = offl2[s, t]
                    if j == i:
                        continue
                    ni = ntot_snap[i]
                    if ni < 1:
                        ni = 1  # snapshot may predate this agent's arrival
                    cur = A[c, i] - GAM[c] * logtab[ni - 1]
                    new = A[c, j] - GAM[c] * logtab[ntot_snap[j]]
                    if not (new > cur):
                        continue
                if j != i:
                    deltas_tot[s, i] -= 1
                    deltas_tot[s, j] += 1
                    deltas_cls[s, c, i] -= 1
                    deltas_cls[s, c, j] += 1
                    agent_level[u] = j
                    acc += 1
            shard_accepted[s] += acc
        for s in range(S):
            for i in range(n):
                n_tot[i] += deltas_tot[s, i]
            for c in range(k):
                for i in range(n):
                    n_cls[c, i] += deltas_cls[s, c, i]


def _largest_remainder(total: int, shares: np.ndarray) -> np.ndarray:
    raw = shares / shares.sum() * total
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def _initial_allocation(n: int, class_sizes) -> np.ndarray:
    """Uniform-over-levels start for every class, deterministic rounding."""
    uniform = np.full(n, 1.0 / n)
    return np.stack([_largest_remainder(nj, uniform) for nj in class_sizes])


def _mean_payoffs(n_cls, n_tot, A, GAM) -> np.ndarray:
    out = np.zeros(A.shape[0])
    occ = n_tot > 0
    logn = np.zeros_like(n_tot, dtype=float)
    logn[occ] = np.log(n_tot[occ])
    for c in range(A.shape[0]):
        w = n_cls[c]
        total = w.sum()
        if total > 0:
            out[c] = float(w @ (A[c] - GAM[c] * logn)) / total
    return out


def _potential_diag(n_cls, n_tot, A, GAM, n_total) -> float:
    """Multiplicity potential; for several classes the congestion weight is
    the class-size-weighted mean gamma (diagnostic only)."""
    w = n_cls.sum(axis=1) / n_total
    gbar = float(w @ GAM)
    lin = sum(float(n_cls[c] @ A[c]) for c in range(A.shape[0])) / n_total
    return lin + gbar / n_total * log_multiplicity(n_tot.astype(float), n_total)


def agent_simulation(scenario: Scenario, *, offers: str = "imitative",
                     mode: str = "sequential", shards: int = 8,
                     window: int = 100, threshold: float = 1e-3,
                     fire_hazard: float = 0.0, epochs_max: int | None = None,
                     snapshot_cadence: int = 0,
                     seed: int | None = None) -> SimulationResult:
    """Run the stochastic game to stationarity (or the epoch budget).

    epochs_max bounds total agent updates; the default allows 3000 sweeps.
    snapshot_cadence > 0 records a SimulationSnapshot every that many sweeps.
    """
    if offers not in ("imitative", "uniform"):
        raise ValueError(f"unknown offer law {offers!r}")
    if mode not in ("sequential", "parallel"):
        raise ValueError(f"unknown mode {mode!r}")
    if not (0.0 <= fire_hazard < 1.0):
        raise ValueError("fire_hazard must be in [0, 1)")
    if window < 1 or threshold <= 0:
        raise ValueError("stationarity window >= 1 and threshold > 0 required")

    grid = scenario.grid
    n = grid.n
    params_list = [p for p, _ in scenario.classes]
    class_sizes = [c for _, c in scenario.classes]
    k = len(params_list)
    n_total = scenario.n_total
    seed = scenario.rng_seed if seed is None else seed
    if seed is None or int(seed) < 0:
        raise ValueError("a nonnegative seed is required for reproducibility")
    seed = int(seed)
    if epochs_max is None:
        epochs_max = 3000 * n_total
    imitative = offers == "imitative"

    n_cls = _initial_allocation(n, class_sizes)
    n_tot = n_cls.sum(axis=0)
    agent_level = np.repeat(np.tile(np.arange(n, dtype=np.int64), k),
                            n_cls.ravel())
    agent_class = np.repeat(np.arange(k, dtype=np.int64), class_sizes)

    A = np.stack([utility_part(grid.levels, p) for p in params_list])
    GAM = np.array([p.gamma for p in params_list])
    logtab = np.log(np.arange(1, n_total + 2, dtype=np.float64))

    empty_i = np.empty(0, dtype=np.int64)
    empty_u = np.empty(0, dtype=np.uint8)

    if mode == "parallel":
        shards = max(1, min(int(shards), n_total))
        base, rem = divmod(n_total, shards)
        lens = np.full(shards, base, dtype=np.int64)
        lens[:rem] += 1
        starts = np.concatenate(([0], np.cumsum(lens)[:-1])).astype(np.int64)
        width = int(lens.max())
        children = np.random.SeedSequence(seed).spawn(shards + 1)
        # each shard must hold a uniform sample of the population so that
        # shard-local imitation is unbiased: shuffle the agents once
        layout = np.random.Generator(np.random.Philox(children[0]))
        perm = layout.permutation(n_total)
        agent_level = agent_level[perm]
        agent_class = agent_class[perm]
        gens = [np.random.Generator(np.random.Philox(child))
                for child in children[1:]]
    else:
        gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))

    max_sweeps, partial = divmod(int(epochs_max), n_total)

    residuals: list = []
    acceptance: list = []
    snapshots: list = []
    win_sum = np.zeros(n)
    prev_mean: np.ndarray | None = None
    last_mean: np.ndarray | None = None
    last_residual = math.nan
    stationary = False
    sweeps_run = 0
    epochs_run = 0

    def run_sweep(m: int) -> int:
        if mode == "sequential":
            picks = gen.integers(0, n_total, m, dtype=np.int64)
            offa = gen.integers(0, n_total, m, dtype=np.int64) if imitative else empty_i
            offl = empty_i if imitative else gen.integers(0, n, m, dtype=np.int64)
            if fire_hazard > 0.0:
                ff = (gen.random(m) < fire_hazard).astype(np.uint8)
                fa = gen.integers(0, n_total, m, dtype=np.int64) if imitative else empty_i
                fl = empty_i if imitative else gen.integers(0, n, m, dtype=np.int64)
            else:
                ff, fa, fl = empty_u, empty_i, empty_i
            return int(_sweep_seq(agent_level, agent_class, n_tot, n_cls, A, GAM,
                                  logtab, picks, offa, offl, ff, fa, fl, imitative))
        # parallel: batched rounds with refreshed occupancy snapshots,
        # shard-local offers, per-shard substreams, fixed merge order
        picks2 = np.empty((shards, width), dtype=np.int64)
        offa2 = np.empty((shards, width if imitative else 0), dtype=np.int64)
        offl2 = np.empty((shards, 0 if imitative else width), dtype=np.int64)
        firing = fire_hazard > 0.0
        ff2 = np.zeros((shards, width if firing else 0), dtype=np.uint8)
        fa2 = np.empty((shards, width if (firing and imitative) else 0), dtype=np.int64)
        fl2 = np.empty((shards, 0 if (not firing or imitative) else width), dtype=np.int64)
        frac = m / n_total  # partial sweeps shorten every shard proportionally
        plens = (lens * frac).astype(np.int64) if m < n_total else lens
        for s in range(shards):
            ls = int(plens[s])
            picks2[s, :ls] = gens[s].integers(0, lens[s], ls, dtype=np.int64)
            if imitative:
                offa2[s, :ls] = gens[s].integers(0, lens[s], ls, dtype=np.int64)
            else:
                offl2[s, :ls] = gens[s].integers(0, n, ls, dtype=np.int64)
            if firing:
                ff2[s, :ls] = (gens[s].random(ls) < fire_hazard).astype(np.uint8)
                if imitative:
                    fa2[s, :ls] = gens[s].integers(0, lens[s], ls, dtype=np.int64)
                else:
                    fl2[s, :ls] = gens[s].integers(0, n, ls, dtype=np.int64)
        ntot_snap = np.empty(n, dtype=np.int64)
        deltas_tot = np.zeros((shards, n), dtype=np.int64)
        deltas_cls = np.zeros((shards, k, n), dtype=np.int64)
        shard_accepted = np.zeros(shards, dtype=np.int64)
        _sweep_par(agent_level, agent_class, ntot_snap, n_tot, n_cls,
                   deltas_tot, deltas_cls, shard_accepted, A, GAM, logtab,
                   picks2, offa2, offl2, ff2, fa2, fl2, starts, plens,
                   imitative, PARALLEL_BATCHES)
        return int(shard_accepted.sum())

    def take_snapshot(sweep):
        snapshots.append(SimulationSnapshot(
            sweep=sweep, counts=n_cls.copy(),
            mean_payoff=_mean_payoffs(n_cls, n_tot, A, GAM),
            potential=_potential_diag(n_cls, n_tot, A, GAM, n_total),
            residual=last_residual, accepted_total=sum(acceptance)))

    if snapshot_cadence > 0:
        take_snapshot(0)

    for sweep in range(1, max_sweeps + 1):
        acceptance.append(run_sweep(n_total))
        epochs_run += n_total
        sweeps_run = sweep
        win_sum += n_tot
        if sweep % window == 0:
            mean = win_sum / (window * n_total)
            win_sum[:] = 0.0
            if prev_mean is not None:
                last_residual = float(np.abs(mean - prev_mean).sum())
                residuals.append((sweep, last_residual))
            prev_mean, last_mean = mean, mean
            if residuals and last_residual < threshold:
                stationary = True
        if snapshot_cadence > 0 and sweep % snapshot_cadence == 0:
            take_snapshot(sweep)
        if stationary:
            break

    if not stationary and partial > 0 and sweeps_run == max_sweeps:
        acceptance.append(run_sweep(partial))
        epochs_run += partial

    state = PopulationState.from_counts(n_cls)
    return SimulationResult(
        state=state, sweeps=sweeps_run, epochs=epochs_run, stationary=stationary,
        residuals=residuals, acceptance=acceptance, snapshots=snapshots,
        window_mean=last_mean, seed=seed, mode=mode, offers=offers)


def warmup_jit():
    """Compile both kernels on a toy scenario (cached across processes)."""
    from .core import ClassParams, SalaryGrid
    grid = SalaryGrid.uniform(20.0, 3000.0, 5)
    sc = Scenario(grid=grid, classes=((ClassParams(215.0, 20.5, 5.0), 50),
                                      (ClassParams(220.5, 19.45, 10.0), 10)),
                  rng_seed=1)
    agent_simulation(sc, epochs_max=3 * 60, mode="sequential", window=1)
    agent_simulation(sc, epochs_max=3 * 60, mode="parallel", shards=2, window=1)
    agent_simulation(sc, epochs_max=60, mode="sequential", window=1,
                     offers="uniform", fire_hazard=0.01)
