"""Boundary null controls for the heat equation with a dynamic (Wentzell) boundary.

Two independent routes produce a Dirichlet control at x = 0: the moment
method over the boundary-eigenparameter spectrum, and penalized HUM solved
by conjugate gradients on a method-of-lines discretization.
"""

from .errors import (BracketFailure, BreakdownZeroDenominator, GridTooCoarse, IllConditioned,
                     IndexMismatch, MaxIterReached, ShapeMismatch, SingularSystem, WentzellError)
from .hum import HumConfig, HumResult, gradient_residual, hum_cg, j_eps
from .moment import (BiorthogonalElement, ExpFamily, MomentResult, biorthogonal, gram_matrix,
                     moment_control, verify_null_modes)
from .pde import (Trajectory, dual_pairing, duality_check, inner_H, norm_H, norm_Hminus1,
                  solve_adjoint, solve_elliptic, solve_forward)
from .spectral import (Direction, Eigenpair, Kind, Regime, SpectralCoeffs, WentzellParams,
                       characteristic_residual, eigenfunction_eval, expand,
                       nonpositive_eigenvalue, positive_eigenvalues, spectral_solution, spectrum)
from .state import Control, Grid, State

__version__ = "0.1.0"
