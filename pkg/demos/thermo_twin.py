"""The thermodynamic reading of the same machinery.

With payoff -betaT*E - ln N the game's equilibrium is the Gibbs-Boltzmann
distribution and the potential is (minus) a free energy per particle. The
demo draws random energy levels, recovers Boltzmann three ways, and checks
the free-energy identity phi = -(betaT/N)(E - S/betaT) on a random state.
"""
import numpy as np

from paygame import (EnergyGrid, PopulationState, boltzmann_equilibrium,
                     helmholtz_check, integrate_to_equilibrium,
                     maximize_thermo_potential)

rng = np.random.default_rng(2024)
grid = EnergyGrid(energies=rng.uniform(0.0, 1.0, 10), betaT=1.0)

boltzmann = boltzmann_equilibrium(grid)
print("Boltzmann closed form:", np.array2string(boltzmann, precision=4))

uniform = PopulationState.from_shares(np.full(10, 0.1))
final, trajectory = integrate_to_equilibrium(uniform, grid, tolerance=1e-12)
print(f"replicator ({len(trajectory) - 1} steps): "
      f"L_inf {np.abs(final.shares()[0] - boltzmann).max():.2e}")

gradient = maximize_thermo_potential(grid)
print(f"projected gradient: L_inf {np.abs(gradient - boltzmann).max():.2e}")

counts = rng.multinomial(100_000, boltzmann)
state = PopulationState.from_counts(counts[None, :])
phi, free_form, gap = helmholtz_check(state, grid)
print(f"potential {phi:.6f} vs free-energy form {free_form:.6f} "
      f"(difference {gap:.2e})")
