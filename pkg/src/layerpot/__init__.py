"""Near-singular Laplace and Stokes layer potentials on implicit surfaces.

Grid-projection quadrature, erf-regularised kernels and a multi-delta
extrapolation that removes the leading regularisation errors.
"""
import numba as _numba

# prefer threading layers that do not need TBB
_numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .errors import *  # noqa: E402,F401,F403
from .extrapolation import ExtrapolationPlan, solve_weights, solve_weights_batch  # noqa: E402
from .quadrature import QuadratureRule, generate_rule, integrate  # noqa: E402
from .surface import SURFACES, ImplicitSurface, closest_point, closest_points  # noqa: E402

__version__ = "0.1.0"
