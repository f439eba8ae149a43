"""Potential-game toolkit for pay distributions.

Agents pick salary levels; the payoff trades a concave benefit of pay
against congestion at popular levels. The game admits an exact potential,
so equilibria are potential maximizers and take a lognormal shape in the
salary variable. The package covers the closed forms, replicator and
best-response dynamics, a large agent-based simulator with one or two
interacting classes, and distribution fitting (lognormal body, Pareto
tail) for simulated or external histograms.
"""
from .core import (INFINITE_UTILITY, ClassParams, DynamicsSettings, EnergyGrid,
                   PopulationState, SalaryGrid, Scenario, payoff, thermo_payoff,
                   utility_part)
from .potential import (PotentialBreakdown, entropy_stirling, helmholtz_check,
                        log_factorial, log_multiplicity, potential,
                        stirling_entropy_gap, thermo_potential)
from .equilibrium import (ChebyshevSigma, EquilibriumSolution, LognormalParams,
                          NonConvergenceError, bipop_equilibrium,
                          bipop_mixture_approx, boltzmann_equilibrium,
                          chebyshev_sigma, interface_continuity,
                          lognormal_equilibrium, lognormal_to_params,
                          maximize_potential, maximize_thermo_potential,
                          params_to_lognormal, solve_scenario)
from .dynamics import (RevisionProtocol, TrajectoryRecord,
                       integrate_to_equilibrium, replicator_step)
from .abm import (RNG_ALGORITHM, SimulationResult, SimulationSnapshot,
                  agent_simulation)
from .abm import warmup_jit as _abm_warmup
from .fitting import (FitResult, InsufficientDataError, distribution_distance,
                      fit_lognormal, fit_powerlaw_tail)

__version__ = "0.1.0"


def warmup_jit():
    """Compile the jitted kernels on toy problems; call before timing runs."""
    import numpy as _np

    _abm_warmup()
    maximize_thermo_potential(EnergyGrid(_np.array([0.0, 0.5, 1.0]), betaT=1.0))

__all__ = [
    "INFINITE_UTILITY", "ClassParams", "DynamicsSettings", "EnergyGrid",
    "PopulationState", "SalaryGrid", "Scenario", "payoff", "thermo_payoff",
    "utility_part",
    "PotentialBreakdown", "entropy_stirling", "helmholtz_check",
    "log_factorial", "log_multiplicity", "potential", "stirling_entropy_gap",
    "thermo_potential",
    "ChebyshevSigma", "EquilibriumSolution", "LognormalParams",
    "NonConvergenceError", "bipop_equilibrium", "bipop_mixture_approx",
    "boltzmann_equilibrium", "chebyshev_sigma", "interface_continuity",
    "lognormal_equilibrium", "lognormal_to_params", "maximize_potential",
    "maximize_thermo_potential", "params_to_lognormal", "solve_scenario",
    "RevisionProtocol", "TrajectoryRecord", "integrate_to_equilibrium",
    "replicator_step",
    "RNG_ALGORITHM", "SimulationResult", "SimulationSnapshot",
    "agent_simulation", "warmup_jit",
    "FitResult", "InsufficientDataError", "distribution_distance",
    "fit_lognormal", "fit_powerlaw_tail",
    "__version__",
]
