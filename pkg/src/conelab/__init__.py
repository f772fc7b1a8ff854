"""Finite-scale laboratory for asymptotic cones of metric spaces and groups."""

__version__ = "0.1.0"

from .cayley import (
    BallSpace,
    CayleyBall,
    GroupFamily,
    ball,
    classify_growth,
    export_ball_metric,
    growth_table,
    make_group,
    word_distance,
)
from .diagnostics import (
    MinkowskiEstimate,
    PropernessReport,
    ScaleSchedule,
    minkowski_estimate,
    properness_diagnostic,
    separability_evidence,
)
from .errors import ConelabError, DomainError, InputError, ParseError, ResourceError
from .germ import GermExpr, Ordering, compare, parse_germ, ratio_class
from .metric import (
    FiniteMetric,
    RescaledView,
    annulus,
    ball_points,
    gh_lower_bound,
    labeled_distortion,
    rescale,
    validate_metric,
)
from .packing import PackingQuery, PackingResult, packing_number, packing_profile, verify_test_set
from .realize import (
    RealizationPoint,
    RealizationSpace,
    build_realization,
    check_metric_axioms,
    cone_recovery_check,
    off_slice_bound_check,
    realization_distance,
    slice_isometry_check,
)
from .trees import (
    ConeClassEvidence,
    DeltaEstimate,
    ValencyProfile,
    branch_isolation,
    classify_cone_evidence,
    delta_estimate,
    four_point_delta,
    valency_profile,
)
