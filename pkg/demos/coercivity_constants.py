"""Coercivity and shift constants for a resonance at the first eigenvalue.

With a slope bound of half the spectral gap the exact coercivity constant
equals half the gap; the sampled estimate is an upper bracket.
"""

from steklov.assembly import assemble_operators
from steklov.eigen import solve_spectrum_schur
from steklov.mesh import generate_disk_mesh
from steklov.trace import GammaField, diagnostics_report, resonance_gap

ops = assemble_operators(generate_disk_mesh(1.0, 0.05))
basis = solve_spectrum_schur(ops, 24)
gap = resonance_gap(basis, 1)
gamma = GammaField.constant(ops, 0.5 * gap, gap)
for key, value in diagnostics_report(basis, 1, gamma, ops, samples=2000, seed=1).items():
    print(f"{key:>12}: {value}")
