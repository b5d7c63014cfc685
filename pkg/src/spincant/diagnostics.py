"""Resolvability and decoherence observables, plus temperature ceilings.

Everything here is assembled from the closed-form Gaussian coefficients:
peak positions and widths of the four density blocks, the first time the
two spin peaks separate cleanly, the coherence damping profile, and the
three laboratory temperature thresholds (static detection, transient
detection, cat-state survival).

All observables are dimensionless except the thresholds, which are kelvin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .coefficients import eval_diagonal, eval_offdiagonal
from .constants import HBAR, K_B
from .density import _atomic_write
from .params import (
    DimensionlessParams,
    DomainError,
    InitialState,
    PhysicalSetup,
    derive_dimensionless,
    derive_quanta,
)

__all__ = [
    "DecoherenceProfile",
    "MscsWindow",
    "PeakGeometry",
    "ResolutionTime",
    "Thresholds",
    "decoherence_profile",
    "distance_scaling_note",
    "mscs_threshold_from_frequency",
    "mscs_threshold_from_mass",
    "peak_geometry",
    "profile_to_csv",
    "resolution_time",
    "temperature_thresholds",
    "thresholds_to_json",
]


@dataclass(frozen=True)
class PeakGeometry:
    """Positions and widths of the four block maxima at one instant.

    Diagonal blocks peak on the z = z' line at m_pp / m_mm, separated by
    delta_d; their Gaussian spot has semi-axis sigma_d along the line and
    sigma_d_prime across it.  The coherence blocks peak off the line at
    m_pm / m_mp (given as (z, z') pairs, mirror images of each other),
    separated by delta_nd; their height is damped by exp(coherence_log)
    relative to tau = 0.
    """

    tau: float
    delta_d: float
    sigma_d: float
    sigma_d_prime: float
    m_pp: float
    m_mm: float
    delta_nd: float
    m_pm: tuple[float, float]
    m_mp: tuple[float, float]
    coherence_log: float


@dataclass(frozen=True)
class ResolutionTime:
    """First time the diagonal peaks separate by their own diameter.

    tau0_exact is the first root of delta_d(tau) - 2*sigma_d(tau) on
    (0, pi]; NaN when no root exists there (resolvable is False then).
    tau0_approx = 2^(1/4)/sqrt(eta) is the large-eta shortcut, inf at
    eta = 0.  Iterating yields (tau0_exact, tau0_approx).
    """

    tau0_exact: float
    tau0_approx: float
    resolvable: bool

    def __iter__(self) -> Iterator[float]:
        yield self.tau0_exact
        yield self.tau0_approx


@dataclass(frozen=True)
class MscsWindow:
    """Verdict on the cat-state window 1 << eta^2 << Q.

    Both "<<" are taken as a factor of `margin`: satisfied means
    eta_sq > margin and quality_factor > margin * eta_sq.
    """

    eta_sq: float
    quality_factor: float
    margin: float
    satisfied: bool


@dataclass(frozen=True)
class Thresholds:
    """Temperature ceilings (kelvin) and the characteristic times for one setup."""

    t_static: float
    t_transient: float
    t_mscs: float
    tau0_approx: float
    tau0_exact: float
    tau_d: float
    mscs_window: MscsWindow


@dataclass(frozen=True)
class DecoherenceProfile:
    """Coherence peak damping sampled on an ascending tau grid.

    damping_factor = exp(coherence_log) is the off-diagonal peak height
    relative to tau = 0, with the width change divided out.  tau_d is the
    characteristic decay time 1/(4 eta^2 D beta), inf when the bath does
    not damp (eta, D or beta zero).
    """

    taus: np.ndarray
    coherence_log: np.ndarray
    damping_factor: np.ndarray
    tau_d: float

    def rows(self) -> Iterator[tuple[float, float, float, float]]:
        for t, lg, f in zip(self.taus, self.coherence_log, self.damping_factor):
            yield float(t), float(lg), float(f), self.tau_d


def _sigma_pair(sigma_star_sq: float, b1: float, c1: float) -> tuple[float, float]:
    """Semi-axes of the diagonal Gaussian spot: along z = z' and across it."""
    along = math.sqrt(2.0 * sigma_star_sq)
    across_curv = c1 - b1 * b1 / (4.0 * sigma_star_sq)
    return along, 1.0 / math.sqrt(2.0 * across_curv)


def peak_geometry(p: DimensionlessParams, init: InitialState, tau: float) -> PeakGeometry:
    """Peak positions, widths and coherence damping of all four blocks at tau."""
    if not math.isfinite(tau) or tau < 0.0:
        raise DomainError(f"tau must be finite and >= 0, got {tau!r}")
    d = eval_diagonal(p, init, tau)
    o = eval_offdiagonal(p, init, tau)
    sigma_d, sigma_d_prime = _sigma_pair(d.sigma_star_sq, d.b1, d.c1)
    # pm block peaks at midpoint b20, separation r = -eta*r0; mp is its mirror
    r_peak = -p.eta * o.r0
    m_pm = (o.b20 + 0.5 * r_peak, o.b20 - 0.5 * r_peak)
    m_mp = (m_pm[1], m_pm[0])
    return PeakGeometry(
        tau=tau,
        delta_d=d.b2_up - d.b2_down,
        sigma_d=sigma_d,
        sigma_d_prime=sigma_d_prime,
        m_pp=d.b2_up,
        m_mm=d.b2_down,
        delta_nd=math.sqrt(2.0) * p.eta * abs(o.r0),
        m_pm=m_pm,
        m_mp=m_mp,
        coherence_log=p.eta**2 * o.xi,
    )


_RESOLVE_SCAN_POINTS = 4096
_RESOLVE_TOL = 1e-10


def resolution_time(p: DimensionlessParams) -> ResolutionTime:
    """First tau in (0, pi] where delta_d reaches the two-sigma diameter.

    Bracketing scan followed by bisection to 1e-10 in tau.  The gap
    delta_d - 2*sigma_d is independent of the initial state (delta_d is a
    difference of drifts, sigma_d a homogeneous width), so none is taken.
    """
    init = InitialState()

    def gap(tau: float) -> float:
        if tau == 0.0:
            d0 = eval_diagonal(p, init, 0.0)
            return -2.0 * _sigma_pair(d0.sigma_star_sq, d0.b1, d0.c1)[0]
        d = eval_diagonal(p, init, tau)
        return (d.b2_up - d.b2_down) - 2.0 * math.sqrt(2.0 * d.sigma_star_sq)

    approx = math.inf if p.eta == 0.0 else 2.0**0.25 / math.sqrt(p.eta)
    taus = np.linspace(0.0, math.pi, _RESOLVE_SCAN_POINTS + 1)
    lo = 0.0
    f_lo = gap(0.0)
    hi = None
    for t in taus[1:]:
        f = gap(float(t))
        if f >= 0.0:
            hi = float(t)
            break
        lo, f_lo = float(t), f
    if hi is None:
        return ResolutionTime(tau0_exact=math.nan, tau0_approx=approx, resolvable=False)
    while hi - lo > _RESOLVE_TOL:
        mid = 0.5 * (lo + hi)
        if gap(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return ResolutionTime(tau0_exact=0.5 * (lo + hi), tau0_approx=approx, resolvable=True)


def mscs_threshold_from_frequency(setup: PhysicalSetup) -> float:
    """Cat-state ceiling via (hbar*omega_c)^(7/4) * k_c^(3/4)."""
    num = setup.quality_factor * (HBAR * setup.omega_c) ** 1.75 * setup.spring_constant**0.75
    return num / (K_B * setup.spin_force**1.5)


def mscs_threshold_from_mass(setup: PhysicalSetup) -> float:
    """Cat-state ceiling via hbar^(7/4) * k_c^(13/8) / m^(7/8); same number
    as the frequency route since omega_c^2 = k_c/m."""
    m = derive_quanta(setup).mass
    num = setup.quality_factor * HBAR**1.75 * setup.spring_constant ** (13.0 / 8.0)
    return num / (K_B * setup.spin_force**1.5 * m ** (7.0 / 8.0))


def _decay_time(p: DimensionlessParams) -> float:
    damp = 4.0 * p.eta**2 * p.big_d * p.beta
    return math.inf if damp == 0.0 else 1.0 / damp


def temperature_thresholds(setup: PhysicalSetup, *, mscs_margin: float = 10.0) -> Thresholds:
    """All three temperature ceilings plus the characteristic times.

    t_static is the ceiling for resolving the static peak separation,
    t_transient = (4Q/pi) * t_static the transient-measurement ceiling,
    t_mscs the cat-state ceiling.  The two algebraic routes to t_mscs must
    agree to 1e-10 relative; a disagreement means a broken install and
    raises RuntimeError.
    """
    if not math.isfinite(mscs_margin) or mscs_margin <= 0.0:
        raise DomainError(f"mscs_margin must be finite and > 0, got {mscs_margin!r}")
    t_static = setup.spin_force**2 / (K_B * setup.spring_constant)
    t_transient = (4.0 * setup.quality_factor / math.pi) * t_static
    t_a = mscs_threshold_from_frequency(setup)
    t_b = mscs_threshold_from_mass(setup)
    if abs(t_a - t_b) > 1e-10 * max(abs(t_a), abs(t_b)):
        raise RuntimeError(
            f"cat-state threshold routes disagree: {t_a!r} vs {t_b!r}; "
            "the two are algebraically identical, so this is a numerics bug"
        )
    p = derive_dimensionless(setup)
    res = resolution_time(p)
    eta_sq = p.eta**2
    window = MscsWindow(
        eta_sq=eta_sq,
        quality_factor=setup.quality_factor,
        margin=mscs_margin,
        satisfied=eta_sq > mscs_margin and setup.quality_factor > mscs_margin * eta_sq,
    )
    return Thresholds(
        t_static=t_static,
        t_transient=t_transient,
        t_mscs=t_a,
        tau0_approx=res.tau0_approx,
        tau0_exact=res.tau0_exact,
        tau_d=_decay_time(p),
        mscs_window=window,
    )


def decoherence_profile(
    p: DimensionlessParams, init: InitialState, taus: np.ndarray
) -> DecoherenceProfile:
    """Coherence damping log and factor on an ascending tau grid."""
    ts = np.asarray(taus, dtype=np.float64)
    if ts.ndim != 1 or ts.size == 0:
        raise DomainError("tau grid must be a non-empty 1-d array")
    if not np.all(np.isfinite(ts)) or ts[0] < 0.0:
        raise DomainError("tau grid must be finite and >= 0")
    if ts.size > 1 and not np.all(np.diff(ts) > 0.0):
        raise DomainError("tau grid must be strictly ascending")
    log = np.empty_like(ts)
    for i, t in enumerate(ts):
        log[i] = p.eta**2 * eval_offdiagonal(p, init, float(t)).xi
    factor = np.exp(log)
    for arr in (ts, log, factor):
        arr.setflags(write=False)
    return DecoherenceProfile(taus=ts, coherence_log=log, damping_factor=factor, tau_d=_decay_time(p))


def distance_scaling_note(
    setup: PhysicalSetup, new_distance_ratio: float, *, gradient_exponent: float = -4.0
) -> Thresholds:
    """Thresholds after moving the spin by a factor in distance.

    Heuristic: the field gradient is assumed to follow a pure power law
    gradient ~ distance**gradient_exponent (default -4, a dipole-dominated
    source).  The actual law depends on the tip geometry, so the exponent
    is configuration, not physics.  Everything downstream of the rescaled
    force is recomputed exactly.
    """
    if not math.isfinite(new_distance_ratio) or new_distance_ratio <= 0.0:
        raise DomainError(
            f"distance ratio must be finite and > 0, got {new_distance_ratio!r}"
        )
    if not math.isfinite(gradient_exponent):
        raise DomainError(f"gradient exponent must be finite, got {gradient_exponent!r}")
    scale = new_distance_ratio**gradient_exponent
    rescaled = PhysicalSetup.create(
        spring_constant=setup.spring_constant,
        quality_factor=setup.quality_factor,
        temperature=setup.temperature,
        omega_c=setup.omega_c,
        spin_force=setup.spin_force * scale,
        g_factor=setup.g_factor,
    )
    return temperature_thresholds(rescaled)


def _json_num(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def thresholds_to_json(t: Thresholds) -> dict:
    """Single JSON-safe object; non-finite values (unresolvable tau0,
    undamped tau_d) map to null."""
    return {
        "t_static_K": _json_num(t.t_static),
        "t_transient_K": _json_num(t.t_transient),
        "t_mscs_K": _json_num(t.t_mscs),
        "tau0_exact": _json_num(t.tau0_exact),
        "tau0_approx": _json_num(t.tau0_approx),
        "tau_d": _json_num(t.tau_d),
        "mscs_window": {
            "eta_sq": _json_num(t.mscs_window.eta_sq),
            "quality_factor": _json_num(t.mscs_window.quality_factor),
            "margin": _json_num(t.mscs_window.margin),
            "satisfied": t.mscs_window.satisfied,
        },
    }


def profile_to_csv(profile: DecoherenceProfile, path: str) -> None:
    lines = ["tau,coherence_log,damping_factor,tau_d"]
    for tau, lg, factor, tau_d in profile.rows():
        lines.append(f"{tau!r},{lg!r},{factor!r},{tau_d!r}")
    _atomic_write(path, ("\n".join(lines) + "\n").encode("ascii"))
