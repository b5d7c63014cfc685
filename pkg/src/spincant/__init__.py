"""Exact density-matrix evolution of a damped cantilever coupled to one spin-1/2."""

from .coefficients import (
    BasisCoefficients,
    DiagonalCoefficients,
    OffDiagonalCoefficients,
    OverflowGuardError,
    eval_basis,
    eval_diagonal,
    eval_offdiagonal,
)
from .density import (
    DensityField,
    GridSpec,
    ResourceLimitError,
    load_binary,
    rho_diag,
    rho_offdiag,
    sample_field,
    to_binary,
    to_csv,
)
from .diagnostics import (
    DecoherenceProfile,
    MscsWindow,
    PeakGeometry,
    ResolutionTime,
    Thresholds,
    decoherence_profile,
    distance_scaling_note,
    peak_geometry,
    profile_to_csv,
    resolution_time,
    temperature_thresholds,
    thresholds_to_json,
)
from .params import (
    DimensionlessParams,
    DomainError,
    InitialState,
    PhysicalSetup,
    Quanta,
    RegimeWarning,
    UnsupportedRegimeError,
    derive_dimensionless,
    derive_quanta,
    validate_regime,
)

__version__ = "0.1.0"

__all__ = [
    "BasisCoefficients",
    "DecoherenceProfile",
    "DensityField",
    "DiagonalCoefficients",
    "DimensionlessParams",
    "DomainError",
    "GridSpec",
    "InitialState",
    "MscsWindow",
    "OffDiagonalCoefficients",
    "OverflowGuardError",
    "PeakGeometry",
    "PhysicalSetup",
    "Quanta",
    "RegimeWarning",
    "ResolutionTime",
    "ResourceLimitError",
    "Thresholds",
    "UnsupportedRegimeError",
    "decoherence_profile",
    "derive_dimensionless",
    "derive_quanta",
    "distance_scaling_note",
    "eval_basis",
    "eval_diagonal",
    "eval_offdiagonal",
    "load_binary",
    "peak_geometry",
    "profile_to_csv",
    "resolution_time",
    "rho_diag",
    "rho_offdiag",
    "sample_field",
    "temperature_thresholds",
    "thresholds_to_json",
    "to_binary",
    "to_csv",
    "validate_regime",
    "__version__",
]
