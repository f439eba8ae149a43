"""Mean-field replicator integration and its Lyapunov guarantee."""
import numpy as np
import pytest

from paygame.core import ClassParams, EnergyGrid, PopulationState, SalaryGrid
from paygame.dynamics import (LYAPUNOV_TOLERANCE, RevisionProtocol,
                              integrate_to_equilibrium, replicator_step)
from paygame.equilibrium import (NonConvergenceError, boltzmann_equilibrium,
                                 lognormal_equilibrium)

CLASS1 = ClassParams(215.0, 20.5, 5.0)


def uniform_state(n, n_total=100_000):
    return PopulationState.from_shares(np.full(n, 1.0 / n), n_total)


def assert_monotone_potential(trajectory):
    phis = [rec.potential for rec in trajectory]
    for a, b in zip(phis, phis[1:]):
        assert b >= a - LYAPUNOV_TOLERANCE


class TestThermoGame:
    def test_converges_to_boltzmann(self):
        rng = np.random.default_rng(123)
        grid = EnergyGrid(rng.uniform(0.0, 1.0, size=10), betaT=1.0)
        state, traj = integrate_to_equilibrium(uniform_state(10), grid)
        target = boltzmann_equilibrium(grid)
        assert np.abs(state.combined_shares() - target).max() < 1e-6
        assert_monotone_potential(traj)

    def test_residuals_recorded(self):
        grid = EnergyGrid(np.array([0.0, 0.3, 0.9]), betaT=1.0)
        _, traj = integrate_to_equilibrium(uniform_state(3), grid)
        assert traj[0].step == 0
        assert traj[-1].residual < 1e-9
        assert all(np.isfinite(rec.residual) for rec in traj)


class TestPayGame:
    def test_converges_to_lognormal(self):
        grid = SalaryGrid.uniform(20.0, 3000.0, 100)
        state, traj = integrate_to_equilibrium(uniform_state(100), grid, CLASS1)
        dens, _ = lognormal_equilibrium(grid, CLASS1)
        l1 = float(np.abs(state.combined_shares() - dens).sum())
        assert l1 < 1e-3
        assert l1 < 1e-8  # measured 3.7e-10; the loose bound is the contract
        assert_monotone_potential(traj)

    def test_equilibrium_start_returns_immediately(self):
        grid = SalaryGrid.uniform(20.0, 3000.0, 100)
        dens, _ = lognormal_equilibrium(grid, CLASS1)
        state0 = PopulationState.from_shares(dens, 100_000)
        state, traj = integrate_to_equilibrium(state0, grid, CLASS1,
                                               tolerance=1e-6)
        assert len(traj) == 1
        assert traj[0].step == 0
        assert np.array_equal(state.combined_shares(), dens)

    def test_missing_params_rejected(self):
        grid = SalaryGrid.uniform(20.0, 3000.0, 10)
        with pytest.raises(ValueError):
            integrate_to_equilibrium(uniform_state(10), grid, None)


class TestReplicatorStep:
    def test_preserves_simplex(self):
        grid = SalaryGrid.uniform(20.0, 3000.0, 20)
        state = uniform_state(20)
        nxt = replicator_step(state, grid, CLASS1, dt=1e-3)
        shares = nxt.combined_shares()
        assert abs(shares.sum() - 1.0) < 1e-12
        assert np.all(shares >= 0)

    def test_fixed_point_at_equilibrium(self):
        grid = EnergyGrid(np.array([0.0, 0.5, 1.5]), betaT=1.0)
        target = boltzmann_equilibrium(grid)
        state = PopulationState.from_shares(target, 1000)
        nxt = replicator_step(state, grid, None, dt=0.1)
        assert np.abs(nxt.combined_shares() - target).max() < 1e-12

    def test_protocol_validation(self):
        with pytest.raises(ValueError):
            RevisionProtocol(kind="smith")
        with pytest.raises(ValueError):
            RevisionProtocol(rate_scale=0.0)


class TestNonConvergence:
    def test_budget_exhaustion_raises_with_residual(self):
        grid = SalaryGrid.uniform(20.0, 3000.0, 100)
        with pytest.raises(NonConvergenceError) as info:
            integrate_to_equilibrium(uniform_state(100), grid, CLASS1,
                                     max_steps=3)
        assert info.value.residual > 0
        assert info.value.iterations == 3
