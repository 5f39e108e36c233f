from .certificates import (
    PullbackReport,
    StabilityCertificate,
    SubSuperReport,
    build_v0,
    check_sub_super,
    choose_epsilon,
    pullback_data,
    stable_certificate,
    torsion_profile,
)
from .free_boundary import (
    FreeBoundary,
    NondegeneracyReport,
    asymmetry,
    chord_tolerance,
    fb_distance,
    fb_hausdorff,
    free_boundary,
    nondegeneracy,
)
from .moving_plane import ReflectionSweep, corrected_field, moving_plane_audit
from .nonuniqueness import NonuniquenessReport, nonuniqueness_demo

__all__ = [
    "FreeBoundary", "NondegeneracyReport", "NonuniquenessReport", "PullbackReport",
    "ReflectionSweep", "StabilityCertificate", "SubSuperReport", "asymmetry", "build_v0",
    "check_sub_super", "choose_epsilon", "chord_tolerance", "corrected_field", "fb_distance",
    "fb_hausdorff", "free_boundary", "moving_plane_audit", "nondegeneracy", "nonuniqueness_demo",
    "pullback_data", "stable_certificate", "torsion_profile",
]
