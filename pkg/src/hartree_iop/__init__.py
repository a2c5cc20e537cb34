"""Defocusing Hartree equations with a nonlocal exchange term: eigenproblems,
ground states, the inverse optimal problem for the exchange kernel and its dual."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .grid import (Grid, GridSpec, Potential, RieszTable, build_grid, build_potential,
                   build_riesz, potential_from_values, riesz_diagonal)
from .iop import (BranchPoint, DualOptions, DualSolution, IopSolution, PerturbationReport,
                  PrincipalSolution, ScfOptions, branch_sweep, dual_solve, iop_solve,
                  kernel_perturbation_probe, phat, principal_solve, recover_u_from_diagonals)
from .operators import (HartreeProblem, Kernel, OperatorMatrix, assemble_operator,
                        hartree_potential, laplacian_matrix, lmu_dist2, lmu_inner, lmu_norm2)
from .spectral import (EigenPair, concavity_probe, dlambda1, eigenpair, lambda1,
                       principal_eigenpair, rayleigh)
from .variational import (DescentOptions, GroundState, energy, energy_grad, ground_state,
                          hessian_matrix, hessian_min_eig)
