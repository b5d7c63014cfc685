"""Physical constants (CODATA 2018), pinned so test tolerances are meaningful."""

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J/K
MU_B = 9.2740100783e-24  # J/T
