"""Gaussian-primitive field reconstruction from sparse observations.

Partition-of-unity scaffolds, fixed-dictionary least squares, and the
sweeps that check their approximation and bias-variance behaviour.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND, get_num_threads, set_num_threads
from .errors import (
    ConditioningError,
    DegeneracyError,
    DegenerateSupportError,
    DimensionError,
    NumericalDegeneracyError,
    ParameterError,
    SizeError,
    SplatfieldError,
    UndefinedRatioError,
)
from .field import (
    Domain,
    GridField,
    QuadratureRule,
    default_quadrature,
    make_constant,
    make_fourier_random,
    make_lamb_oseen,
    make_taylor_green,
    midpoint_rule,
    l2_norm_sq,
    rel_l2_error,
    roughness,
    sample_grid,
    smooth_grid,
)
from .centers import (
    CenterSet,
    farthest_point_sample,
    fill_distance,
    grid_centers,
    separation_radius,
)
from .primitives import (
    PrimitiveSet,
    ScaffoldEval,
    basis_eval,
    eval_scaffold,
    moment_sum,
    oracle_scaffold,
    shepard_weights,
)
from .estimator import (
    BiasVarianceReport,
    Dictionary,
    LeastSquaresFit,
    bias_variance_mc,
    design_matrix,
    fit_least_squares,
    gram_matrix,
    observe,
    optimal_k,
    project_l2,
    spectral_stability,
)
from .sweep import SweepResult, ls_sweep, optk_table, oracle_sweep, rate_fit
