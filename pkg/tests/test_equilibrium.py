"""Closed-form equilibria, the potential maximizer, and the two-class solver."""
import math

import numpy as np
import pytest

from paygame.core import ClassParams, EnergyGrid, SalaryGrid, Scenario, payoff
from paygame.equilibrium import (ChebyshevSigma, NonConvergenceError,
                                 bipop_equilibrium, bipop_mixture_approx,
                                 boltzmann_equilibrium, chebyshev_sigma,
                                 interface_continuity, lognormal_equilibrium,
                                 lognormal_to_params, maximize_potential,
                                 maximize_thermo_potential, params_to_lognormal,
                                 solve_scenario)

CLASS1 = ClassParams(215.0, 20.5, 5.0)
CLASS2 = ClassParams(220.5, 19.45, 10.0)
N1, N2 = 950_000, 50_000
MU1 = 220.0 / 41.0
SIGMA1 = math.sqrt(5.0 / 41.0)


def benchmark_grid():
    return SalaryGrid.uniform(20.0, 3000.0, 100)


class TestBoltzmann:
    def test_two_equal_states(self):
        grid = EnergyGrid(np.array([0.4, 0.4]), betaT=1.0)
        assert np.allclose(boltzmann_equilibrium(grid), [0.5, 0.5], atol=1e-15)

    def test_zero_temperature_coupling(self):
        grid = EnergyGrid(np.array([0.1, 5.0, 2.0]), betaT=0.0)
        assert np.allclose(boltzmann_equilibrium(grid), 1.0 / 3.0, atol=1e-15)

    def test_log_two_gap(self):
        grid = EnergyGrid(np.array([0.0, math.log(2.0)]), betaT=1.0)
        dens = boltzmann_equilibrium(grid)
        assert dens[0] == pytest.approx(2.0 / 3.0, abs=1e-14)
        assert dens[1] == pytest.approx(1.0 / 3.0, abs=1e-14)

    def test_normalization(self):
        rng = np.random.default_rng(3)
        grid = EnergyGrid(rng.uniform(0, 3, size=17), betaT=1.7)
        assert abs(boltzmann_equilibrium(grid).sum() - 1.0) < 1e-12


class TestLognormalEquilibrium:
    def test_class1_parameters(self):
        _, ln = lognormal_equilibrium(benchmark_grid(), CLASS1)
        assert ln.mu == pytest.approx(5.365853658536586, abs=1e-12)
        assert ln.sigma == pytest.approx(0.34921514788478913, abs=1e-12)

    def test_class2_parameters(self):
        _, ln = lognormal_equilibrium(benchmark_grid(), CLASS2)
        assert ln.mu == pytest.approx(5.925449871465296, abs=1e-12)
        assert ln.sigma == pytest.approx(math.sqrt(10.0 / 38.9), abs=1e-15)

    def test_density_normalized_and_positive(self):
        dens, _ = lognormal_equilibrium(benchmark_grid(), CLASS1)
        assert abs(dens.sum() - 1.0) < 1e-12
        assert np.all(dens > 0)

    def test_density_peak_location(self):
        # log-density derivative zero at S* = exp(mu - sigma^2)
        fine = SalaryGrid.log_uniform(20.0, 3000.0, 4001)
        dens, ln = lognormal_equilibrium(fine, CLASS1)
        peak = fine.levels[int(np.argmax(dens))]
        target = math.exp(ln.mu - ln.sigma ** 2)
        assert target == pytest.approx(189.37, abs=0.05)
        spacing = fine.levels[1] / fine.levels[0]
        assert abs(math.log(peak / target)) < math.log(spacing) * 1.5


class TestParameterMaps:
    def test_unit_triple(self):
        ln = params_to_lognormal(ClassParams(1.0, 1.0, 1.0))
        assert ln.mu == pytest.approx(1.0, abs=1e-15)
        assert ln.sigma == pytest.approx(math.sqrt(0.5), abs=1e-15)

    def test_round_trip(self):
        ln = params_to_lognormal(CLASS1)
        back = lognormal_to_params(ln, CLASS1.gamma)
        assert back.alpha == pytest.approx(CLASS1.alpha, abs=1e-12)
        assert back.beta == pytest.approx(CLASS1.beta, abs=1e-12)

    def test_class1_forward(self):
        ln = params_to_lognormal(CLASS1)
        assert ln.mu == pytest.approx(5.36585, abs=5e-6)
        assert ln.sigma == pytest.approx(0.34922, abs=5e-6)

    def test_inverse_rejects_bad_inputs(self):
        ln = params_to_lognormal(CLASS1)
        with pytest.raises(ValueError):
            lognormal_to_params(ln, 0.0)
        with pytest.raises(ValueError):
            lognormal_to_params(type(ln)(mu=1.0, sigma=-0.2), 1.0)


class TestChebyshevSigma:
    def test_confidence_at_ten(self):
        assert chebyshev_sigma(3000.0, 20.0, 10.0).confidence >= 0.99

    def test_unit_sigma(self):
        r = chebyshev_sigma(20.0 * math.e ** 2, 20.0, 1.0)
        assert r.sigma == pytest.approx(1.0, abs=1e-12)

    def test_benchmark_range(self):
        r = chebyshev_sigma(3000.0, 20.0, 10.0)
        assert r.sigma == pytest.approx(math.log(150.0) / 20.0, abs=1e-15)
        assert r.sigma == pytest.approx(0.2505, abs=5e-5)
        assert isinstance(r, ChebyshevSigma)

    def test_ordering_violation(self):
        with pytest.raises(ValueError):
            chebyshev_sigma(10.0, 20.0, 2.0)


class TestPotentialMaximizer:
    def test_pay_game_matches_closed_form(self):
        grid = benchmark_grid()
        x = maximize_potential(grid, CLASS1)
        dens, _ = lognormal_equilibrium(grid, CLASS1)
        assert abs(x.sum() - 1.0) < 1e-9
        assert np.abs(x - dens).max() < 1e-6

    def test_thermo_game_matches_boltzmann(self):
        grid = EnergyGrid(np.linspace(0.0, 4.0, 40), betaT=1.0)
        x = maximize_thermo_potential(grid)
        assert np.abs(x - boltzmann_equilibrium(grid)).max() < 1e-6

    def test_warm_start_accepted(self):
        grid = benchmark_grid()
        dens, _ = lognormal_equilibrium(grid, CLASS1)
        x = maximize_potential(grid, CLASS1, start=dens)
        assert np.abs(x - dens).max() < 1e-6


class TestBipopEquilibrium:
    @pytest.fixture(scope="class")
    @staticmethod
    def solution():
        return bipop_equilibrium(benchmark_grid(), (CLASS1, N1), (CLASS2, N2))

    def test_methods_agree(self, solution):
        direct = bipop_equilibrium(benchmark_grid(), (CLASS1, N1), (CLASS2, N2),
                                   method="direct")
        assert np.abs(solution.densities - direct.densities).max() < 1e-9
        assert np.allclose(solution.h_star, direct.h_star, atol=1e-9)

    def test_equilibrium_payoffs(self, solution):
        assert solution.h_star[0] == pytest.approx(503.6594437811476, abs=1e-6)
        assert solution.h_star[1] == pytest.approx(532.5001840882761, abs=1e-6)

    def test_partition_structure(self, solution):
        omega1, omega2 = (set(map(int, p)) for p in solution.partition)
        assert omega1.isdisjoint(omega2)
        assert omega1 | omega2 == set(range(100))
        # low class: one contiguous block; high class: the floor level plus the top block
        assert omega1 == set(range(1, 15))
        assert omega2 == {0} | set(range(15, 100))

    def test_partition_salary_ranges(self, solution):
        grid = benchmark_grid()
        omega1 = sorted(map(int, solution.partition[0]))
        assert grid.levels[omega1[0]] == pytest.approx(50.101, abs=1e-3)
        assert grid.levels[omega1[-1]] == pytest.approx(441.414, abs=1e-3)

    def test_every_level_occupied(self, solution):
        combined = solution.densities.sum(axis=0)
        assert np.all(combined > 0)
        assert abs(combined.sum() - 1.0) < 1e-9

    def test_payoff_flat_inside_own_region(self, solution):
        grid = benchmark_grid()
        combined = solution.densities.sum(axis=0)
        n_total = N1 + N2
        for j, params in enumerate((CLASS1, CLASS2)):
            for i in map(int, solution.partition[j]):
                h = payoff(grid.levels[i], combined[i] * n_total, params)
                assert h == pytest.approx(solution.h_star[j], abs=1e-6)

    def test_payoff_lower_outside_own_region(self, solution):
        grid = benchmark_grid()
        combined = solution.densities.sum(axis=0)
        n_total = N1 + N2
        for j, params in enumerate((CLASS1, CLASS2)):
            other = set(range(100)) - set(map(int, solution.partition[j]))
            for i in other:
                h = payoff(grid.levels[i], combined[i] * n_total, params)
                assert h < solution.h_star[j] - 1e-9

    def test_normalization_routes_agree(self, solution):
        assert np.allclose(solution.z_grid, solution.z_lambda, rtol=1e-10)
        assert np.all(np.asarray(solution.z_residual) < 1e-10)

    def test_interface_jumps_within_resolution(self, solution):
        records = interface_continuity(solution, benchmark_grid(),
                                       [CLASS1, CLASS2])
        assert len(records) >= 1
        for left, right, jump, bound in records:
            assert 0 <= left < right < 100
            assert jump < bound

    def test_non_convergence_raises(self):
        with pytest.raises(NonConvergenceError) as info:
            bipop_equilibrium(benchmark_grid(), (CLASS1, N1), (CLASS2, N2),
                              max_iters=1)
        assert info.value.residual > 0


class TestMixtureApprox:
    def test_weights_and_normalization(self):
        mix = bipop_mixture_approx(benchmark_grid(), (CLASS1, N1), (CLASS2, N2))
        assert abs(mix.sum() - 1.0) < 1e-12
        d1, _ = lognormal_equilibrium(benchmark_grid(), CLASS1)
        d2, _ = lognormal_equilibrium(benchmark_grid(), CLASS2)
        assert np.allclose(mix, 0.95 * d1 + 0.05 * d2, atol=1e-15)

    def test_distance_to_exact_solution(self):
        mix = bipop_mixture_approx(benchmark_grid(), (CLASS1, N1), (CLASS2, N2))
        sol = bipop_equilibrium(benchmark_grid(), (CLASS1, N1), (CLASS2, N2))
        l1 = float(np.abs(sol.densities.sum(axis=0) - mix).sum())
        assert l1 == pytest.approx(0.04079374770104288, abs=1e-9)


class TestSolveScenario:
    def test_single_class_closed_form(self):
        sc = Scenario(grid=benchmark_grid(), classes=((CLASS1, 100_000),))
        sol = solve_scenario(sc)
        dens, _ = lognormal_equilibrium(benchmark_grid(), CLASS1)
        assert np.abs(sol.densities[0] - dens).max() == 0.0
        assert sol.method == "closed-form"

    def test_two_class_delegates(self):
        sc = Scenario(grid=benchmark_grid(),
                      classes=((CLASS1, N1), (CLASS2, N2)))
        sol = solve_scenario(sc)
        ref = bipop_equilibrium(benchmark_grid(), (CLASS1, N1), (CLASS2, N2))
        assert np.abs(sol.densities - ref.densities).max() < 1e-12
