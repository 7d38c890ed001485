"""Bures-Wasserstein geometry of determinant-normalized Kronecker SPD matrices.

Pairwise distance reduction, leaf geodesics, geodesic-closure diagnostics,
exact restricted barycenters, and a benchmark harness.
"""

from .errors import (
    ConfigError,
    DimensionMismatch,
    GaugeViolation,
    InconsistentVerdict,
    KronburesError,
    NoConvergence,
    NonPositiveCoordinate,
    NotCommuting,
    NotInModel,
    NotOnLeaf,
    NotPositiveDefinite,
    NotSimultaneouslyDiagonalizable,
    NumericalConsistencyError,
    ParameterOutOfRange,
    TraceNotZero,
)
from .spd_core import (
    EigenDecomposition,
    SpdMatrix,
    gauge_normalize,
    kron,
    log_det,
    partial_trace_1,
    partial_trace_2,
    spd_inv_sqrt,
    spd_sqrt,
    symmetrize,
)
from .bures_metric import (
    GeodesicCurve,
    TransportMap,
    bures_distance_sq,
    commuting_geodesic_eval,
    gaussian_w2_sq,
    geodesic,
    geodesic_eval,
    transport_map,
)
from .kron_model import (
    FactorLeaf,
    KroneckerPoint,
    LeafKind,
    MatrixNormalLaw,
    PairwiseSpectrum,
    col_leaf,
    embed,
    homothety_distance,
    leaf_geodesic,
    leaf_membership,
    matrix_normal_w2_sq,
    pairwise_bures_sq_reduced,
    point_from_json,
    point_to_json,
    recover_factors,
    row_leaf,
)
from .closure_diagnostics import (
    ClosureVerdict,
    CommutingChart,
    DepartureCoefficients,
    FactorTransports,
    RigidityVerdict,
    SqrtProfile,
    TangencyReport,
    build_chart,
    classify_closure_commuting,
    delta_diag,
    delta_geo_asymptote,
    delta_geo_closed_form,
    delta_geo_svd,
    endpoint_rigidity_classify,
    factor_transports,
    pattern_2x2_check,
    pi_residual,
    profile_matrix,
    pullback_metric_isotropic,
    sqrt_profile_at,
    whitened_initial_velocity,
    write_departure_profile,
)
from .barycenter import (
    LeafBarycenter,
    PerronSolution,
    SliceBarycenter,
    SliceData,
    bw_barycenter,
    bw_stationarity_residual,
    coefficient_matrix,
    leaf_barycenter,
    log_coordinate_oracle,
    objective_J,
    perron_singular_pair,
    slice_barycenter,
    slice_data_from_json,
    slice_data_to_json,
    slice_objective,
)

__version__ = "0.1.0"
