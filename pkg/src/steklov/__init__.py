"""Weighted Steklov eigenproblems and resonant nonlinear boundary problems.

Pipeline: :mod:`~steklov.mesh` builds a triangulation, :mod:`~steklov.assembly`
the P1 forms, :mod:`~steklov.eigen` the eigenpairs, :mod:`~steklov.trace`
the boundary-trace splitting and coercivity constants, and
:mod:`~steklov.resonance` the continuation solver. :mod:`~steklov.oracles`
holds independent reference computations.
"""

from .assembly import Operators, WeightField, assemble_operators
from .config import DEFAULT, Tolerances
from .eigen import SteklovBasis, check_first_eigenfunction, solve_spectrum_inductive, solve_spectrum_schur, verify_basis
from .mesh import Mesh, generate_annulus_mesh, generate_disk_mesh, generate_square_mesh, split_upper_lower
from .resonance import NonlinearityDef, homotopy_solve, project_rhs, validate_hypotheses, verify_solution
from .trace import GammaField, apply_dtn, coercivity_functional, estimate_delta, split

__version__ = "0.1.0"
