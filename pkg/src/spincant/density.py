"""Assemble the 2x2 spin-block density matrix in real space and sample it.

Coordinates are (R, r) with R = (z + z')/2, r = z - z'. Each block is the
analytic inverse Fourier transform (over k, conjugate to R) of the Gaussian
characteristic solution, so no numerics enter beyond evaluating exponentials.

Normalization convention: diagonal blocks are scaled so the r = 0 slice
integrates over R to |a|^2 resp. |b|^2 at every tau (analytic Gaussian
integral, exact). The coherence blocks inherit the tau = 0 product-state
scale and are never rescaled, which keeps the decoherence decay observable.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .coefficients import eval_diagonal, eval_offdiagonal
from .params import DimensionlessParams, DomainError, InitialState

__all__ = [
    "BLOCK_ORDER",
    "DensityField",
    "GridSpec",
    "ResourceLimitError",
    "load_binary",
    "rho_diag",
    "rho_offdiag",
    "sample_field",
    "to_binary",
    "to_csv",
]

BLOCK_ORDER = ("pp", "mm", "pm", "mp")

_BLOCK_BY_PAIR = {
    (0.5, 0.5): "pp",
    (-0.5, -0.5): "mm",
    (0.5, -0.5): "pm",
    (-0.5, 0.5): "mp",
}


class ResourceLimitError(RuntimeError):
    """Requested grid exceeds the configured point budget."""


@dataclass(frozen=True)
class GridSpec:
    """Sampling grid. kind "Rr" uses (R, r) axes; "zzp" uses (z, z')."""

    x_min: float
    x_max: float
    n_x: int
    y_min: float
    y_max: float
    n_y: int
    kind: str = "Rr"

    def __post_init__(self) -> None:
        if self.kind not in ("Rr", "zzp"):
            raise DomainError(f"grid kind must be 'Rr' or 'zzp', got {self.kind!r}")
        for lo, hi, n, ax in (
            (self.x_min, self.x_max, self.n_x, "x"),
            (self.y_min, self.y_max, self.n_y, "y"),
        ):
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
                raise DomainError(f"{ax} range must be finite with max > min")
            if n < 2:
                raise DomainError(f"{ax} count must be >= 2, got {n}")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.linspace(self.x_min, self.x_max, self.n_x),
            np.linspace(self.y_min, self.y_max, self.n_y),
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "x_min": self.x_min,
            "x_max": self.x_max,
            "n_x": self.n_x,
            "y_min": self.y_min,
            "y_max": self.y_max,
            "n_y": self.n_y,
        }


@dataclass(frozen=True)
class DensityField:
    """All four spin blocks sampled on one grid, immutable once built.

    Block arrays are indexed [i_x, i_y] matching GridSpec.axes(). Moduli are
    computed on demand; only the complex values are stored.
    """

    grid: GridSpec
    tau: float
    blocks: dict = field(repr=False)
    provenance: dict = field(default_factory=dict)

    def block(self, key: str) -> np.ndarray:
        if key not in self.blocks:
            raise KeyError(f"unknown block {key!r}; have {sorted(self.blocks)}")
        return self.blocks[key]

    def modulus(self, key: str) -> np.ndarray:
        return np.abs(self.block(key))


def _provenance(p: DimensionlessParams, init: InitialState, tau: float) -> dict:
    raw = (
        f"eta={p.eta!r} beta={p.beta!r} big_d={p.big_d!r} "
        f"z0={init.z0!r} p0={init.p0!r} "
        f"amp_up={init.amp_up!r} amp_down={init.amp_down!r} tau={tau!r}"
    )
    return {
        "eta": p.eta,
        "beta": p.beta,
        "big_d": p.big_d,
        "z0": init.z0,
        "p0": init.p0,
        "amp_up": [init.amp_up.real, init.amp_up.imag],
        "amp_down": [init.amp_down.real, init.amp_down.imag],
        "hash": hashlib.sha256(raw.encode()).hexdigest(),
    }


def rho_diag(
    p: DimensionlessParams,
    init: InitialState,
    tau: float,
    s: float,
    R,
    r,
):
    """Diagonal block value(s) at (R, r); broadcasts over array inputs.

    The r = 0 slice integrates over R to |amp|^2 of the matching spin state.
    """
    if abs(abs(s) - 0.5) > 1e-12:
        raise DomainError(f"s must be +-1/2, got {s!r}")
    R = np.asarray(R, dtype=float)
    r = np.asarray(r, dtype=float)
    d = eval_diagonal(p, init, tau)
    ss = d.sigma_star_sq
    if s > 0:
        weight, b2, c2 = abs(init.amp_up) ** 2, d.b2_up, d.c2_up
    else:
        weight, b2, c2 = abs(init.amp_down) ** 2, d.b2_down, d.c2_down
    re = (
        -((R - b2) ** 2) / (4.0 * ss)
        + (d.b1 * d.b1 / (4.0 * ss) - d.c1) * r * r
    )
    im = r * (c2 - d.b1 * (b2 - R) / (2.0 * ss))
    out = weight / (2.0 * math.sqrt(math.pi * ss)) * np.exp(re + 1j * im)
    return out if out.shape else complex(out)


def rho_offdiag(
    p: DimensionlessParams,
    init: InitialState,
    tau: float,
    branch: tuple[float, float],
    R,
    r,
):
    """Coherence block value(s) at (R, r) for branch (+1/2,-1/2) or its mirror.

    The mirror branch is conj(rho_pm(R, -r)) (Hermiticity), which is the same
    closed form with the spin sign flipped.
    """
    if branch == (-0.5, 0.5):
        return np.conj(rho_offdiag(p, init, tau, (0.5, -0.5), R, np.negative(r)))
    if branch != (0.5, -0.5):
        raise DomainError(f"branch must be (+-1/2, -+1/2), got {branch!r}")
    R = np.asarray(R, dtype=float)
    r = np.asarray(r, dtype=float)
    d = eval_diagonal(p, init, tau)
    o = eval_offdiagonal(p, init, tau)
    e = p.eta
    ss = d.sigma_star_sq
    amp = init.amp_up * np.conj(init.amp_down)
    u = -(o.b11 * r + e * o.b10)
    v = o.b20 - R
    re = (u * u - v * v) / (4.0 * ss) - e * o.c11 * r - o.c12 * r * r - e * e * o.c10
    im = u * v / (2.0 * ss) + o.c21 * r + e * o.c20
    out = amp / (2.0 * math.sqrt(math.pi * ss)) * np.exp(re + 1j * im)
    return out if out.shape else complex(out)


def sample_field(
    p: DimensionlessParams,
    init: InitialState,
    tau: float,
    grid: GridSpec,
    max_points: int = 4096 * 4096,
) -> DensityField:
    """Sample all four blocks on the grid; immutable result.

    Raises ResourceLimitError when n_x * n_y exceeds max_points.
    """
    if grid.n_x * grid.n_y > max_points:
        raise ResourceLimitError(
            f"grid {grid.n_x}x{grid.n_y} exceeds the {max_points}-point budget"
        )
    xs, ys = grid.axes()
    if grid.kind == "Rr":
        R = xs[:, None]
        r = ys[None, :]
    else:
        # axes are (z, z'); the solution's frame is R = (z+z')/2, r = z-z'
        z = xs[:, None]
        zp = ys[None, :]
        R = 0.5 * (z + zp)
        r = z - zp
    blocks = {
        "pp": rho_diag(p, init, tau, 0.5, R, r),
        "mm": rho_diag(p, init, tau, -0.5, R, r),
        "pm": rho_offdiag(p, init, tau, (0.5, -0.5), R, r),
        "mp": rho_offdiag(p, init, tau, (-0.5, 0.5), R, r),
    }
    for arr in blocks.values():
        arr.setflags(write=False)
    return DensityField(
        grid=grid, tau=tau, blocks=blocks, provenance=_provenance(p, init, tau)
    )


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_csv(fieldv: DensityField, path: str) -> None:
    """Long-format CSV: R, r, block, re, im (axis values in the grid's frame)."""
    xs, ys = fieldv.grid.axes()
    lines = ["R,r,block,re,im"]
    for name in BLOCK_ORDER:
        arr = fieldv.blocks[name]
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                v = complex(arr[i, j])
                lines.append(
                    f"{float(x)!r},{float(y)!r},{name},{v.real!r},{v.imag!r}"
                )
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def to_binary(fieldv: DensityField, path: str) -> None:
    """Raw little-endian float64 pairs (re, im), blocks concatenated in
    BLOCK_ORDER, each row-major (n_x, n_y); sidecar JSON at path + '.json'.
    Round-trips bit-exactly through load_binary."""
    payload = b"".join(
        np.ascontiguousarray(fieldv.blocks[name], dtype="<c16").tobytes()
        for name in BLOCK_ORDER
    )
    sidecar = {
        "format": "spincant-density-v1",
        "dtype": "<f8",
        "layout": "re,im interleaved, blocks concatenated, row-major",
        "blocks": list(BLOCK_ORDER),
        "shape": [fieldv.grid.n_x, fieldv.grid.n_y],
        "grid": fieldv.grid.to_dict(),
        "tau": fieldv.tau,
        "provenance": fieldv.provenance,
    }
    _atomic_write(path, payload)
    _atomic_write(
        path + ".json", (json.dumps(sidecar, indent=2, sort_keys=True) + "\n").encode()
    )


def load_binary(path: str) -> DensityField:
    with open(path + ".json", "rb") as fh:
        sidecar = json.load(fh)
    if sidecar.get("format") != "spincant-density-v1":
        raise DomainError(f"unrecognized sidecar format in {path + '.json'}")
    grid = GridSpec(**sidecar["grid"])
    n = grid.n_x * grid.n_y
    raw = np.fromfile(path, dtype="<c16")
    want = n * len(sidecar["blocks"])
    if raw.size != want:
        raise DomainError(
            f"{path}: expected {want} complex values, found {raw.size}"
        )
    blocks = {}
    for idx, name in enumerate(sidecar["blocks"]):
        arr = raw[idx * n : (idx + 1) * n].reshape(grid.n_x, grid.n_y).copy()
        arr.setflags(write=False)
        blocks[name] = arr
    return DensityField(
        grid=grid,
        tau=float(sidecar["tau"]),
        blocks=blocks,
        provenance=dict(sidecar.get("provenance", {})),
    )


def trace_by_quadrature(fieldv: DensityField) -> float:
    """Trapezoid estimate of sum_s integral rho_ss(R, 0) dR on this grid.

    Requires an "Rr" grid whose r axis brackets r = 0; the r = 0 slice is
    taken from the nearest grid line, so use an odd n_y for an exact hit.
    """
    if fieldv.grid.kind != "Rr":
        raise DomainError("trace quadrature needs an (R, r) grid")
    xs, ys = fieldv.grid.axes()
    j0 = int(np.argmin(np.abs(ys)))
    total = 0.0
    for name in ("pp", "mm"):
        total += float(np.trapezoid(fieldv.blocks[name][:, j0].real, xs))
    return total
