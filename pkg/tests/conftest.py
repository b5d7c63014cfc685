"""Shared fixtures. The 512^2 grid run is expensive, so it is computed once
per session and reused by both the grid tests and the acceptance gate."""

from __future__ import annotations

import time

import pytest

from spincant.oracle.grid import GridRunSpec, grid_solver
from spincant.params import DimensionlessParams, InitialState

REF_P = DimensionlessParams(eta=2.0, beta=0.05, big_d=10.0)
REF_INIT = InitialState(z0=1.0, p0=0.5)
REF_FRAME_TAUS = (0.0, 0.5, 1.0, 2.0, 3.7, 5.0)


@pytest.fixture(scope="session")
def reference_grid_run():
    """(GridRun, wall seconds) for the eta=2 reference case at 512^2."""
    spec = GridRunSpec(z_min=-12.0, z_max=12.0, n=512, frame_taus=REF_FRAME_TAUS)
    t0 = time.time()
    run = grid_solver(REF_P, REF_INIT, spec)
    return run, time.time() - t0
