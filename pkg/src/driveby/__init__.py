"""Drive-by sensing toolkit: bus selection, coverage objectives, and map reconstruction."""

from .errors import (
    DataError,
    DegenerateInputError,
    InsufficientDataError,
    NumericalError,
    SchemaError,
)
from .geo import EARTH_RADIUS_M, haversine_m, pairwise_distances_m
from .greedy import (
    BRUTE_FORCE_BUDGET,
    PropertyReport,
    SelectionResult,
    brute_force_select,
    check_monotone_submodular,
    greedy_select,
    lazy_greedy_select,
    random_select,
)
from .imputation import (
    CompletionFactors,
    ObservationSet,
    impute_vbmc_cs,
    impute_vbsf_cs,
    mre,
)
from .objectives import (
    GainState,
    PercentCoverage,
    PercentStopCoverage,
    RegressiveFacilityLocation,
    SpatialFacilityLocation,
    fls_gain,
    flst_gain_reference,
    incremental_gain,
    make_objective,
    pc_gain,
    psc_gain,
    rfl_gain,
)
from .occupancy import (
    LocationSet,
    OccupancyTensor,
    Stop,
    TimeGrid,
    TimedVisit,
    build_occupancy,
    load_gtfs,
    sampling_matrix,
    subsample_stops,
)
from .similarity import (
    DEFAULT_LAMBDA_PER_KM,
    autoregressive_temporal_similarity,
    causal_kernel,
    distance_matrix,
    exponential_similarity,
    fit_lambda,
    normalized_similarity,
    temporal_similarity_from_data,
)
from .simgen import (
    SpatioTemporalMatrix,
    SpectralBasis,
    simulate_ar,
    simulate_factored,
    spectral_basis,
)

__version__ = "0.1.0"

__all__ = [
    "BRUTE_FORCE_BUDGET",
    "CompletionFactors",
    "DEFAULT_LAMBDA_PER_KM",
    "DataError",
    "DegenerateInputError",
    "EARTH_RADIUS_M",
    "GainState",
    "InsufficientDataError",
    "LocationSet",
    "NumericalError",
    "ObservationSet",
    "OccupancyTensor",
    "PercentCoverage",
    "PercentStopCoverage",
    "PropertyReport",
    "RegressiveFacilityLocation",
    "SchemaError",
    "SelectionResult",
    "SpatialFacilityLocation",
    "SpatioTemporalMatrix",
    "SpectralBasis",
    "Stop",
    "TimeGrid",
    "TimedVisit",
    "autoregressive_temporal_similarity",
    "brute_force_select",
    "build_occupancy",
    "causal_kernel",
    "check_monotone_submodular",
    "distance_matrix",
    "exponential_similarity",
    "fit_lambda",
    "fls_gain",
    "flst_gain_reference",
    "greedy_select",
    "haversine_m",
    "impute_vbmc_cs",
    "impute_vbsf_cs",
    "incremental_gain",
    "lazy_greedy_select",
    "load_gtfs",
    "make_objective",
    "mre",
    "normalized_similarity",
    "pairwise_distances_m",
    "pc_gain",
    "psc_gain",
    "random_select",
    "rfl_gain",
    "sampling_matrix",
    "simulate_ar",
    "simulate_factored",
    "spectral_basis",
    "subsample_stops",
    "__version__",
]
