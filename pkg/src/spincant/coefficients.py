"""Time-dependent coefficients of the closed-form density-matrix solution.

The master equation in Fourier space reduces, along its characteristic curves,
to quadratures with an exactly Gaussian result: for each spin block the log of
rho-hat(k, r, tau) is a quadratic form in (k, r) whose coefficients are the
closed forms evaluated here.

Numerical stability is the whole design. The textbook basis functions f_i, g_i
grow like e^{beta tau} while every physical coefficient carries a matching
e^{-beta tau}; and f_1, f_2 contain the split (beta + 4 theta^2/beta), singular
as beta -> 0, that cancels only after multiplication by D*beta. Both disasters
are removed analytically before anything is evaluated:

  - damped products E*F_i = e^{-beta tau} (f_i(tau) - f_i(0)) are written with
    expm1 so nothing exceeds O(1) at any beta*tau and nothing cancels at small
    beta;
  - all assembled coefficients (sigma_star_sq, B's, C's, xi, ...) are built
    from those damped products only.

The raw basis values (eval_basis) keep the textbook normalization for direct
comparison against ODE integration; they overflow for beta*tau > 700 and are
guarded, while the assembled coefficients stay finite at any beta*tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .params import DimensionlessParams, InitialState

__all__ = [
    "OverflowGuardError",
    "BasisCoefficients",
    "DiagonalCoefficients",
    "OffDiagonalCoefficients",
    "eval_basis",
    "eval_diagonal",
    "eval_offdiagonal",
]

# beyond this, e^{beta tau} overflows float64 headroom for the raw basis
_RAW_BASIS_LIMIT = 700.0


class OverflowGuardError(OverflowError):
    """Raw basis values would overflow; use the assembled coefficients instead."""


@dataclass(frozen=True)
class BasisCoefficients:
    """Raw solution basis at one tau: oscillator modes q_i, p_i and the
    quadrature primitives f_i, g_i with their increments capX_i = x_i(tau) - x_i(0)."""

    tau: float
    q1: float
    q2: float
    p1: float
    p2: float
    q3: float
    p3: float
    f1: float
    f2: float
    f3: float
    g1: float
    g2: float
    capF1: float
    capF2: float
    capF3: float
    capG1: float
    capG2: float


@dataclass(frozen=True)
class DiagonalCoefficients:
    """Gaussian data of the spin-diagonal blocks at one tau."""

    tau: float
    sigma_star_sq: float
    b1: float
    b2_up: float
    b2_down: float
    c1: float
    c2_up: float
    c2_down: float


@dataclass(frozen=True)
class OffDiagonalCoefficients:
    """Gaussian data of the spin-coherence block (s = +1/2 branch; the mirror
    branch follows by eta -> -eta, equivalently by Hermitian conjugation)."""

    tau: float
    c12: float
    c11: float
    c10: float
    c21: float
    c20: float
    b11: float
    b10: float
    b20: float
    sigma_tilde_sq: float
    r0: float
    xi: float


@dataclass(frozen=True)
class _Core:
    """Shared damped ingredients at one tau. EF_i = e^{-bt} capF_i and
    EG_i = e^{-bt/2} capG_i evaluated without forming any growing factor."""

    E: float  # e^{-beta tau}
    E2: float  # e^{-beta tau/2}
    q1: float
    q2: float
    p1: float
    p2: float
    q3: float
    p3: float
    EF1: float
    EF2: float
    EF3: float
    EG1: float
    EG2: float
    A_t: float  # quadratic-form entries of the k,r covariance image
    B_t: float
    C_t: float


def _core(p: DimensionlessParams, tau: float) -> _Core:
    if tau < 0.0:
        raise ValueError(f"tau must be >= 0, got {tau!r}")
    beta, theta, big_d = p.beta, p.theta, p.big_d
    bt = beta * tau
    E = math.exp(-bt)
    E2 = math.exp(-0.5 * bt)
    C = math.cos(theta * tau)
    S = math.sin(theta * tau)

    q1 = (0.5 * beta * S + theta * C) / theta
    q2 = -S / theta
    p1 = (-0.5 * beta * C + theta * S) / theta
    p2 = C / theta
    q3 = -2.0 * (beta * q1 + q2)
    p3 = -2.0 * (beta * p1 + p2)

    c2 = math.cos(2.0 * theta * tau)
    s2 = math.sin(2.0 * theta * tau)
    em1 = -math.expm1(-bt)  # 1 - e^{-bt}, exact at small bt
    # c2 - E without cancellation: both tend to 1 together as tau -> 0
    c2mE = -2.0 * S * S - math.expm1(-bt)
    EF1 = ((beta + 4.0 * theta * theta / beta) * em1 + beta * c2mE - 2.0 * theta * s2) / 8.0
    EF2 = ((beta + 4.0 * theta * theta / beta) * em1 - beta * c2mE + 2.0 * theta * s2) / 8.0
    EF3 = (2.0 * theta * c2mE + beta * s2) / 8.0
    EG1 = -2.0 * math.sin(0.5 * theta * tau) ** 2 - math.expm1(-0.5 * bt)  # C - E2
    EG2 = S

    a0 = 0.25 + beta * beta / 16.0
    b0 = beta * theta / 4.0
    c0 = theta * theta / 4.0
    A_t = E * a0 + big_d * beta * EF1
    B_t = E * b0 + 2.0 * big_d * beta * EF3
    C_t = E * c0 + big_d * beta * EF2
    return _Core(E, E2, q1, q2, p1, p2, q3, p3, EF1, EF2, EF3, EG1, EG2, A_t, B_t, C_t)


def eval_basis(p: DimensionlessParams, tau: float) -> BasisCoefficients:
    """Raw basis functions at tau, textbook normalization (carry e^{beta tau})."""
    c = _core(p, tau)
    bt = p.beta * tau
    if bt > _RAW_BASIS_LIMIT:
        raise OverflowGuardError(
            f"beta*tau = {bt:.3g} > {_RAW_BASIS_LIMIT:g}: raw f_i/g_i overflow; "
            "the assembled diagonal/off-diagonal coefficients remain valid"
        )
    beta, theta = p.beta, p.theta
    ebt = math.exp(bt)
    eb2 = math.exp(0.5 * bt)
    c2 = math.cos(2.0 * theta * tau)
    s2 = math.sin(2.0 * theta * tau)
    split = beta + 4.0 * theta * theta / beta
    f1 = ebt / 8.0 * (split + beta * c2 - 2.0 * theta * s2)
    f2 = ebt / 8.0 * (split - beta * c2 + 2.0 * theta * s2)
    f3 = ebt / 8.0 * (2.0 * theta * c2 + beta * s2)
    g1 = eb2 * math.cos(theta * tau)
    g2 = eb2 * math.sin(theta * tau)
    # increments via the damped forms, so capF_i stays accurate at small beta
    return BasisCoefficients(
        tau=tau,
        q1=c.q1,
        q2=c.q2,
        p1=c.p1,
        p2=c.p2,
        q3=c.q3,
        p3=c.p3,
        f1=f1,
        f2=f2,
        f3=f3,
        g1=g1,
        g2=g2,
        capF1=ebt * c.EF1,
        capF2=ebt * c.EF2,
        capF3=ebt * c.EF3,
        capG1=eb2 * c.EG1,
        capG2=eb2 * c.EG2,
    )


def eval_diagonal(
    p: DimensionlessParams, init: InitialState, tau: float
) -> DiagonalCoefficients:
    """Gaussian coefficients of the spin-diagonal blocks at tau."""
    c = _core(p, tau)
    sigma_star_sq = c.A_t * c.q1**2 + c.B_t * c.q1 * c.p1 + c.C_t * c.p1**2
    b1 = 2.0 * c.A_t * c.q1 * c.q2 + c.B_t * (c.q1 * c.p2 + c.q2 * c.p1) + 2.0 * c.C_t * c.p1 * c.p2
    c1 = c.A_t * c.q2**2 + c.B_t * c.q2 * c.p2 + c.C_t * c.p2**2

    base_u = c.E2 * (0.5 * init.p0 * p.beta + init.z0)
    base_v = c.E2 * init.p0 * p.theta

    def drift(s: float) -> tuple[float, float]:
        u = base_u + 2.0 * p.eta * s * c.EG1
        v = base_v + 2.0 * p.eta * s * c.EG2
        return u * c.q1 + v * c.p1, u * c.q2 + v * c.p2

    b2_up, c2_up = drift(0.5)
    b2_down, c2_down = drift(-0.5)
    return DiagonalCoefficients(
        tau=tau,
        sigma_star_sq=sigma_star_sq,
        b1=b1,
        b2_up=b2_up,
        b2_down=b2_down,
        c1=c1,
        c2_up=c2_up,
        c2_down=c2_down,
    )


def eval_offdiagonal(
    p: DimensionlessParams, init: InitialState, tau: float
) -> OffDiagonalCoefficients:
    """Gaussian coefficients of the coherence block (s = +1/2 branch) at tau.

    xi is the peak-damping exponent: the coherence peak height carries
    exp(xi * eta^2) relative to tau = 0, with xi <= 0 whenever D*beta > 0.
    The r0^2 term enters with + sign (completing the square in |rho|; the
    zero-damping limit then gives xi = 0 identically, as it must).
    """
    c = _core(p, tau)
    beta, theta = p.beta, p.theta

    sigma_star_sq = c.A_t * c.q1**2 + c.B_t * c.q1 * c.p1 + c.C_t * c.p1**2
    c12 = c.A_t * c.q2**2 + c.B_t * c.q2 * c.p2 + c.C_t * c.p2**2
    b11 = 2.0 * c.A_t * c.q1 * c.q2 + c.B_t * (c.q1 * c.p2 + c.q2 * c.p1) + 2.0 * c.C_t * c.p1 * c.p2

    # linear-in-(c1, c2) image of the source quadrature plus initial spread
    P = 0.375 * beta * c.E2 + p.big_d * beta * c.EG1
    Qc = 0.25 * theta * c.E2 + p.big_d * beta * c.EG2
    c11 = (
        2.0 * c.A_t * c.q2 * c.q3
        + c.B_t * (c.q2 * c.p3 + c.p2 * c.q3)
        + 2.0 * c.C_t * c.p2 * c.p3
        + 4.0 * (P * c.q2 + Qc * c.p2)
    )
    c10 = (
        c.A_t * c.q3**2
        + c.B_t * c.q3 * c.p3
        + c.C_t * c.p3**2
        + 4.0 * (P * c.q3 + Qc * c.p3)
        + 1.0
        + beta * beta
        + 4.0 * p.big_d * beta * tau
    )
    b10 = (
        2.0 * c.A_t * c.q1 * c.q3
        + c.B_t * (c.q1 * c.p3 + c.p1 * c.q3)
        + 2.0 * c.C_t * c.p1 * c.p3
        + 4.0 * (P * c.q1 + Qc * c.p1)
    )

    u0 = 0.5 * init.p0 * beta + init.z0
    v0 = init.p0 * theta
    c21 = c.E2 * (u0 * c.q2 + v0 * c.p2)
    c20 = c.E2 * (u0 * c.q3 + v0 * c.p3) + 2.0 * (init.p0 + init.z0 * beta)
    b20 = c.E2 * (u0 * c.q1 + v0 * c.p1)

    denom = 4.0 * sigma_star_sq * c12 - b11 * b11
    sigma_tilde_sq = 2.0 * sigma_star_sq / denom
    r0 = (2.0 * sigma_star_sq * c11 - b11 * b10) / denom
    xi = b10 * b10 / (4.0 * sigma_star_sq) - c10 + r0 * r0 / (2.0 * sigma_tilde_sq)
    return OffDiagonalCoefficients(
        tau=tau,
        c12=c12,
        c11=c11,
        c10=c10,
        c21=c21,
        c20=c20,
        b11=b11,
        b10=b10,
        b20=b20,
        sigma_tilde_sq=sigma_tilde_sq,
        r0=r0,
        xi=xi,
    )
