"""Cut-and-project model sets over R^d: Delone and approximate-lattice
diagnostics, transverse-measure estimation, and empirical verification of
transverse recurrence and intersection-density predictions against
window-volume oracles."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyPatch,
    InjectivityViolated,
    MeyerlabError,
    NoHits,
    NotAReturnTime,
    RadiusExceedsValidity,
    RegionTooLarge,
    ExtentTooSmall,
    SingularBasis,
    WindowTooSmall,
)
from .euclid import (
    Box,
    LatticeBasis,
    Window,
    box_dilate,
    box_erode,
    box_intersect,
    box_volume,
    centered_box,
    covolume,
    enumerate_lattice,
)
from .pointset import (
    Patch,
    WitnessReport,
    accumulation_margin,
    approx_subgroup_witness,
    covering_radius,
    difference_set,
    iterated_sumset,
    min_gap,
    nearest_distances,
    patch_distance,
    return_time_set,
)
from .cutproject import (
    HullPoint,
    Scheme,
    TransversalPoint,
    act,
    hull_patch,
    internal_infimum_trace,
    intersection_window,
    load_scheme,
    model_set,
    predicted_density,
    predicted_intersection_density,
    sample_hull,
    sample_transversal,
    save_scheme,
    scheme_from_dict,
    scheme_to_dict,
)
from .transverse import (
    CompactlySupportedTestFn,
    IdentityReport,
    SectionReport,
    StagesReport,
    add_fns,
    box_indicator_fn,
    change_of_section_check,
    estimate_transverse_measure,
    injective_probe_bound,
    nk_separation,
    periodize,
    shift_fn,
    stages_check,
    verify_transverse_identity,
)
from .ergodic import (
    ConvenientReport,
    ConvenientRow,
    ConvenientSequence,
    DensityTrace,
    IntersectionRow,
    RecurrenceHit,
    StaircaseStep,
    StaircaseTrial,
    geometric_grid,
    intersection_density_experiment,
    intersection_trial,
    lower_density,
    poincare_trial,
    recurrence_search,
    transversal_average,
    transverse_poincare_experiment,
    verify_convenient,
)

__all__ = [
    "__version__",
    "Box",
    "LatticeBasis",
    "Window",
    "box_dilate",
    "box_erode",
    "box_intersect",
    "box_volume",
    "centered_box",
    "covolume",
    "enumerate_lattice",
    "Patch",
    "WitnessReport",
    "accumulation_margin",
    "approx_subgroup_witness",
    "covering_radius",
    "difference_set",
    "iterated_sumset",
    "min_gap",
    "nearest_distances",
    "patch_distance",
    "return_time_set",
    "HullPoint",
    "Scheme",
    "TransversalPoint",
    "act",
    "hull_patch",
    "internal_infimum_trace",
    "intersection_window",
    "load_scheme",
    "model_set",
    "predicted_density",
    "predicted_intersection_density",
    "sample_hull",
    "sample_transversal",
    "save_scheme",
    "scheme_from_dict",
    "scheme_to_dict",
    "CompactlySupportedTestFn",
    "IdentityReport",
    "SectionReport",
    "StagesReport",
    "add_fns",
    "box_indicator_fn",
    "change_of_section_check",
    "estimate_transverse_measure",
    "injective_probe_bound",
    "nk_separation",
    "periodize",
    "shift_fn",
    "stages_check",
    "verify_transverse_identity",
    "ConvenientReport",
    "ConvenientRow",
    "ConvenientSequence",
    "DensityTrace",
    "IntersectionRow",
    "RecurrenceHit",
    "StaircaseStep",
    "StaircaseTrial",
    "geometric_grid",
    "intersection_density_experiment",
    "intersection_trial",
    "lower_density",
    "poincare_trial",
    "recurrence_search",
    "transversal_average",
    "transverse_poincare_experiment",
    "verify_convenient",
    "ConfigError",
    "DimensionMismatch",
    "EmptyPatch",
    "InjectivityViolated",
    "MeyerlabError",
    "NoHits",
    "NotAReturnTime",
    "RadiusExceedsValidity",
    "RegionTooLarge",
    "ExtentTooSmall",
    "SingularBasis",
    "WindowTooSmall",
]
