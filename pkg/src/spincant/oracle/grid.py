"""Brute-force master-equation integrator on a (z, z') grid.

Discretizes the block-diagonal evolution

    d(rho)/dtau = (i/2)(d_zz - d_z'z')rho - (i/2)(z^2 - z'^2)rho
                  + 2i eta (s z - s' z')rho
                  - (beta/2)(z - z')(d_z - d_z')rho - D beta (z - z')^2 rho

with centered second-order differences in space and RK4 in time, zero
(Dirichlet) ghost ring. The step is set from an explicit stability estimate
(largest coefficient magnitude on the domain) and then halved. Hermiticity of
the diagonal blocks is enforced structurally: only the lower triangle is
evolved and the upper half is the conjugate mirror; the (-,+) block is the
conjugate mirror of the evolved (+,-) block.

This solver exists to validate closed forms at small eta, not to be fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..params import DimensionlessParams, DomainError, InitialState

__all__ = [
    "GridFrame",
    "GridRun",
    "GridRunSpec",
    "StabilityError",
    "grid_solver",
]

_RK4_STABILITY_SPAN = 2.8  # |lambda dt| reach of the RK4 region on both axes


class StabilityError(RuntimeError):
    """Raised when the grid integration starts to blow up."""


@dataclass(frozen=True)
class GridRunSpec:
    """Domain, resolution and output times for one grid run."""

    z_min: float
    z_max: float
    n: int
    frame_taus: tuple[float, ...]
    eta_cap: float = 3.0
    dt_override: float | None = None
    monitor_every: int = 50

    def __post_init__(self) -> None:
        if not (math.isfinite(self.z_min) and math.isfinite(self.z_max)):
            raise DomainError("z range must be finite")
        if not self.z_max > self.z_min:
            raise DomainError(f"need z_max > z_min, got [{self.z_min}, {self.z_max}]")
        if self.n < 16:
            raise DomainError(f"n must be >= 16, got {self.n}")
        taus = tuple(float(t) for t in self.frame_taus)
        if not taus:
            raise DomainError("frame_taus must be non-empty")
        if taus[0] < 0.0 or any(b <= a for a, b in zip(taus, taus[1:])):
            raise DomainError("frame_taus must be strictly ascending and >= 0")
        object.__setattr__(self, "frame_taus", taus)
        if self.dt_override is not None and not self.dt_override > 0.0:
            raise DomainError(f"dt_override must be > 0, got {self.dt_override!r}")
        if self.monitor_every < 1:
            raise DomainError("monitor_every must be >= 1")


@dataclass(frozen=True)
class GridFrame:
    tau: float
    blocks: dict[str, np.ndarray] = field(repr=False)
    trace: float
    hermiticity_residual: float


@dataclass(frozen=True)
class GridRun:
    zs: np.ndarray = field(repr=False)
    h: float
    dt: float
    dt_raw: float
    lambda_max: float
    steps: int
    frames: tuple[GridFrame, ...] = field(repr=False)

    def conservation_log(self) -> list[tuple[float, float, float]]:
        return [(f.tau, f.trace, f.hermiticity_residual) for f in self.frames]

    def moments(self, frame_index: int, block: str) -> tuple[float, float]:
        """(<z>, <p>) of one diagonal block; derivative by 5-point stencil."""
        frame = self.frames[frame_index]
        if block not in ("pp", "mm"):
            raise DomainError(f"moments need a diagonal block, got {block!r}")
        arr = frame.blocks[block]
        diag = np.real(np.einsum("ii->i", arr))
        norm = float(np.trapezoid(diag, self.zs))
        if norm < 1e-300:
            raise DomainError(f"block {block!r} carries no weight")
        z_mean = float(np.trapezoid(self.zs * diag, self.zs)) / norm
        # <p> = Re int (-i d_z rho)(z, z'=z) dz; 4th-order interior stencil so
        # the extraction error stays far below the solver's own h^2 error
        n = arr.shape[0]
        g = np.zeros(n, dtype=np.complex128)
        idx = np.arange(2, n - 2)
        g[idx] = (
            -arr[idx + 2, idx] + 8.0 * arr[idx + 1, idx]
            - 8.0 * arr[idx - 1, idx] + arr[idx - 2, idx]
        ) / (12.0 * self.h)
        p_mean = float(np.trapezoid(np.real(-1j * g), self.zs)) / norm
        return z_mean, p_mean


@njit(cache=True)
def _stage(state, rho, acc, out_s, zpad, h, beta, db, eta, sl, sr, ca, cs, tri):
    # acc += ca * F(state); out_s = rho + cs * F(state). Triangle mode only
    # touches j <= i; callers mirror afterwards.
    n = state.shape[0] - 2
    inv_h2 = 1.0 / (h * h)
    inv_2h = 0.5 / h
    for i in range(1, n + 1):
        zi = zpad[i]
        zi2 = zi * zi
        jmax = i if tri else n
        for j in range(1, jmax + 1):
            zj = zpad[j]
            r = zi - zj
            c = state[i, j]
            lap = (
                state[i + 1, j] - 2.0 * c + state[i - 1, j]
                - state[i, j + 1] + 2.0 * c - state[i, j - 1]
            ) * inv_h2
            grad = (
                state[i + 1, j] - state[i - 1, j]
                - state[i, j + 1] + state[i, j - 1]
            ) * inv_2h
            pot = (
                -0.5j * (zi2 - zj * zj)
                + 2.0j * eta * (sl * zi - sr * zj)
                - db * r * r
            )
            f = 0.5j * lap - 0.5 * beta * r * grad + pot * c
            acc[i, j] = acc[i, j] + ca * f
            out_s[i, j] = rho[i, j] + cs * f


@njit(cache=True)
def _mirror(a):
    n = a.shape[0] - 2
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            a[i, j] = np.conj(a[j, i])


@njit(cache=True)
def _max_abs(a):
    n = a.shape[0]
    m = 0.0
    for i in range(n):
        for j in range(n):
            v = abs(a[i, j])
            if v > m:
                m = v
    return m


def _coherent_profile(zs: np.ndarray, init: InitialState) -> np.ndarray:
    return (
        math.pi ** -0.25
        * np.exp(-0.5 * (zs - init.z0) ** 2)
        * np.exp(1j * init.p0 * zs)
    )


class _BlockState:
    """One evolving padded array plus its RK4 scratch."""

    def __init__(self, interior: np.ndarray, sl: float, sr: float):
        n = interior.shape[0]
        self.rho = np.zeros((n + 2, n + 2), dtype=np.complex128)
        self.rho[1:-1, 1:-1] = interior
        self.sl = sl
        self.sr = sr
        self.tri = sl == sr
        self.acc = np.zeros_like(self.rho)
        self.s_a = np.zeros_like(self.rho)
        self.s_b = np.zeros_like(self.rho)

    def step(self, zpad, h, beta, db, eta, dt) -> None:
        # rho <- rho + dt/6 (k1 + 2 k2 + 2 k3 + k4), accumulated in acc while
        # the stage states ping-pong between s_a and s_b. In triangle mode the
        # stage states must be mirrored before the next stencil pass (it reads
        # one superdiagonal); acc's upper half is never read and gets fixed by
        # the final mirror of rho.
        sl, sr, tri = self.sl, self.sr, self.tri
        self.acc[...] = self.rho
        plan = (
            (self.rho, self.s_a, dt / 6.0, dt / 2.0),
            (self.s_a, self.s_b, dt / 3.0, dt / 2.0),
            (self.s_b, self.s_a, dt / 3.0, dt),
        )
        for state, out_s, ca, cs in plan:
            _stage(state, self.rho, self.acc, out_s, zpad, h, beta, db, eta,
                   sl, sr, ca, cs, tri)
            if tri:
                _mirror(out_s)
        _stage(self.s_a, self.rho, self.acc, self.s_b, zpad, h, beta, db, eta,
               sl, sr, dt / 6.0, 0.0, tri)
        self.rho[...] = self.acc
        if tri:
            _mirror(self.rho)

    def interior(self) -> np.ndarray:
        return self.rho[1:-1, 1:-1].copy()


def grid_solver(
    p: DimensionlessParams, init: InitialState, spec: GridRunSpec
) -> GridRun:
    """Integrate all blocks on the grid, emitting frames at spec.frame_taus."""
    if p.eta > spec.eta_cap:
        raise DomainError(
            f"eta = {p.eta:.6g} exceeds the grid oracle cap {spec.eta_cap:.6g}; "
            "large eta needs a domain this solver is not meant for"
        )
    need = 3.0 * p.eta + 5.0
    if spec.z_min > -need or spec.z_max < need:
        raise DomainError(
            f"domain [{spec.z_min}, {spec.z_max}] must contain "
            f"[-{need:.6g}, {need:.6g}] so the displaced peaks stay inside"
        )
    zs = np.linspace(spec.z_min, spec.z_max, spec.n)
    h = float(zs[1] - zs[0])
    zpad = np.zeros(spec.n + 2)
    zpad[1:-1] = zs
    r_span = spec.z_max - spec.z_min
    l_m = max(abs(spec.z_min), abs(spec.z_max))
    db = p.big_d * p.beta
    lambda_max = (
        2.0 / (h * h)
        + p.beta * r_span / h
        + 0.5 * l_m * l_m
        + 2.0 * p.eta * l_m
        + db * r_span * r_span
    )
    dt_raw = _RK4_STABILITY_SPAN / lambda_max
    dt_max = dt_raw / 2.0 if spec.dt_override is None else spec.dt_override

    psi = _coherent_profile(zs, init)
    pure = np.outer(psi, np.conj(psi))
    a, b = init.amp_up, init.amp_down
    blocks = {
        "pp": _BlockState(abs(a) ** 2 * pure, 0.5, 0.5),
        "mm": _BlockState(abs(b) ** 2 * pure, -0.5, -0.5),
        "pm": _BlockState(a * np.conj(b) * pure, 0.5, -0.5),
    }
    ref_max = max(_max_abs(s.rho) for s in blocks.values())
    if ref_max == 0.0:
        ref_max = 1.0

    frames: list[GridFrame] = []
    steps_done = 0
    tau = 0.0

    def emit(t: float) -> None:
        out = {name: s.interior() for name, s in blocks.items()}
        out["mp"] = np.conj(out["pm"].T)
        diag = np.real(np.einsum("ii->i", out["pp"]) + np.einsum("ii->i", out["mm"]))
        trace = float(np.trapezoid(diag, zs))
        herm = max(
            float(np.max(np.abs(out[k] - np.conj(out[k].T)))) for k in ("pp", "mm")
        )
        herm = max(herm, float(np.max(np.abs(out["pm"] - np.conj(out["mp"].T)))))
        for arr in out.values():
            arr.setflags(write=False)
        frames.append(
            GridFrame(tau=t, blocks=out, trace=trace, hermiticity_residual=herm)
        )

    def check(step_no: int, t: float) -> None:
        worst = max(_max_abs(s.rho) for s in blocks.values())
        if not math.isfinite(worst) or worst > 10.0 * ref_max:
            raise StabilityError(
                f"unstable at step {step_no}, tau = {t:.6g}: max|rho| reached "
                f"{worst:.3g} vs initial {ref_max:.3g}; dt = {dt_max:.3g} "
                f"(stability estimate {dt_raw:.3g} at h = {h:.3g}) is too large "
                "or the grid too coarse"
            )

    for t_frame in spec.frame_taus:
        if t_frame == 0.0:
            emit(0.0)
            continue
        span = t_frame - tau
        n_seg = max(1, math.ceil(span / dt_max))
        dt = span / n_seg
        for _ in range(n_seg):
            for s in blocks.values():
                s.step(zpad, h, p.beta, db, p.eta, dt)
            steps_done += 1
            if steps_done % spec.monitor_every == 0:
                check(steps_done, tau)
        tau = t_frame
        check(steps_done, tau)
        emit(tau)

    return GridRun(
        zs=zs,
        h=h,
        dt=dt_max,
        dt_raw=dt_raw,
        lambda_max=lambda_max,
        steps=steps_done,
        frames=tuple(frames),
    )
