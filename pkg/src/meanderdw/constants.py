"""Physical constants (SI, CODATA 2018)."""

import math

MU0 = 4e-7 * math.pi          # vacuum permeability [T m/A]
KB = 1.380649e-23             # Boltzmann constant [J/K]
HBAR = 1.054571817e-34        # reduced Planck constant [J s]
QE = 1.602176634e-19          # elementary charge [C]

# Landau-Lifshitz gyromagnetic ratio [rad/(s T)]
GAMMA_LL = 1.7595e11
