"""Haar-measure convergence, information divergence and rate-distortion on compact groups."""
from .errors import *  # noqa: F401,F403
from .groups import (
    FiniteGroup,
    GroupAction,
    Subgroup,
    build_group,
    builtin_group,
    check_axioms,
    coset_analysis,
    cube_rotations,
    cyclic,
    dihedral,
    invariant_distributions,
    left_coset,
    parse_group,
    subgroup_closure,
    symmetric,
)
from .measures import (
    GroupDistribution,
    compensation_identity_residual,
    convolve,
    density,
    divergence,
    entropy,
    haar_check,
    n_fold,
    point_mass,
    support,
    total_variation,
    translate,
    uniform,
    uniform_on,
    uniform_on_coset,
)
from .circle import (
    FourierDensity,
    discretize,
    divergence_exact,
    divergence_quadratic,
    fourier_convolve,
    make_density,
    n_fold_fourier,
    parse_fourier,
)
from .distortion import (
    DistortionSpec,
    cosine_spec,
    d_crit,
    d_max,
    distortion_matrix,
    so2_spec,
    table_spec,
    transport_distance,
)
from .ratedist import (
    RDCurve,
    RDPoint,
    bessel_i,
    beta_grid,
    blahut_arimoto,
    log_partition_function,
    partition_function,
    rd_curve,
    sandwich_check,
    uniform_rate_at,
    uniform_rd_point,
)
from .convergence import (
    ConvergenceSeries,
    ObstructionReport,
    decay_bound_check,
    detect_obstruction,
    fit_rate,
    one_bit_floor_check,
    pointwise_density_check,
    rd_convergence_check,
    run_series,
    run_series_fourier,
)

__version__ = "0.1.0"
