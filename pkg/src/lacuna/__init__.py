"""Computational toolkit for averaging operators on homogeneous groups.

Exact graded Lie algebras with a BCH group law, weighted point-cloud
measures, grid convolution operators, and experiment drivers for decay,
orthogonality, and smoothing properties of lacunary averages.
"""

__version__ = "0.1.0"

from .algebra import (
    GradedLieAlgebra,
    ad_kernel_dim,
    ad_matrix,
    bch,
    bracket,
    check_stratified,
    dump_algebra,
    generator_test,
    graded_algebra,
    load_algebra,
    nested_bracket,
)
from .algebras import REGISTRY, abelian, engel, filiform, free_step2, get_algebra, heisenberg
from .errors import LacunaError
from .fitting import DecayFit, fit_loglog
from .gridfn import Grid, GridFunction, from_callable, interpolate, l2_inner, lp_norm, quadrature
from .group import (
    commutator,
    dilate,
    hom_norm,
    identity,
    inverse,
    multiply,
    quasi_triangle_const,
    right_derivative,
    right_derivative_grid,
    upsilon_compose,
    upsilon_decompose,
)
from .measure import (
    ConvexGauge,
    DiscreteMeasure,
    ca_exponent_fit,
    ca_modulus,
    conv_product,
    convex_boundary_measure,
    convolve_measures,
    curve_measure,
    density_estimate,
    dilate_measure,
    euclidean_ball_gauge,
    fourier_decay_fit,
    fourier_transform,
    horizontal_sphere,
    koranyi_ball_gauge,
    koranyi_sphere,
    load_measure,
    dump_measure,
    make_measure,
    point_mass,
    reflect_measure,
    tilted_sphere,
)
from .operator import (
    SignSequence,
    average,
    build_psi,
    lacunary_maximal,
    lp_pieces,
    op_norm_l2,
    psi_cloud,
    randomized_sum,
    sign_sequence,
    square_function,
    t_ell_pieces,
)
from .sampling import sphere_points
from .verify import (
    almost_orthogonality_experiment,
    convex_double_point,
    hormander_integral,
    hormander_kernel,
    hormander_sum,
    l2_decay_experiment,
    mean_value_check,
)
