"""Numerical cross-checks that share no algebra with the closed forms."""

from .characteristics import (
    AccuracyError,
    BasisSamples,
    DiagonalSamples,
    OffDiagonalSamples,
    SuiteReport,
    ehrenfest_reference,
    integrate_basis,
    integrate_characteristics,
    log_density_fourier,
    measure_rk4_order,
    random_tuple_suite,
    relative_gap,
    trace_characteristic,
)
from .grid import GridFrame, GridRun, GridRunSpec, StabilityError, grid_solver

__all__ = [
    "AccuracyError",
    "BasisSamples",
    "DiagonalSamples",
    "GridFrame",
    "GridRun",
    "GridRunSpec",
    "OffDiagonalSamples",
    "StabilityError",
    "SuiteReport",
    "ehrenfest_reference",
    "grid_solver",
    "integrate_basis",
    "integrate_characteristics",
    "log_density_fourier",
    "measure_rk4_order",
    "random_tuple_suite",
    "relative_gap",
    "trace_characteristic",
]
