"""Generalized top-k and k-support norms, monotonicity checkers and l0 recovery."""

from .errors import (
    CombinatorialBlowup, DimensionMismatch, GradedNormsError, InvalidNormSpec, NonConvergence,
    NotInSubspace,
)
from .gradedness import (
    GradednessVerdict, check_level_set_sphere_identity, classify_gradedness,
    dc_level_membership, grade_vector, l0_from_ksupport, l0_from_topk,
)
from .norms import (
    Atomic, DualPair, Lp, NormSpec, WeightedLp, bidual_eval, dual_pair_construct,
    dual_pair_search, dual_then_restrict_eval, norm_from_dict, parse_norm_spec,
    restrict_eval, restrict_then_dual_eval,
)
from .properties import (
    PropertyReport, check_birkhoff, check_dual_pair_support, check_monotonic,
    check_om_rotund_implies_osm, check_orthant_monotonic, check_orthant_strictly_monotonic,
    check_permutation_invariant, check_restriction_duality, replay,
)
from .topk import (
    KSupportNorm, NormSequenceReport, TopKNorm, ksupport_ball_contains, ksupport_eval,
    ksupport_sequence, topk_ball_contains, topk_eval, topk_sequence,
)
from .vectors import (
    IndexSet, as_vector, hadamard, l0, numeric_support, project, sign, sorted_abs_desc,
    subsets_of_size_at_most, support,
)

# restriction-duality names used in the literature on orthant-monotonic norms
star_K_eval = dual_then_restrict_eval
K_star_eval = restrict_then_dual_eval

__version__ = "0.1.0"
