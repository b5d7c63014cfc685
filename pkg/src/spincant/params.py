"""Dimensional experiment parameters and their dimensionless reduction.

The model is a damped cantilever mode (spring constant k_c, angular frequency
omega_c, quality factor Q) whose tip carries a magnetized particle coupled to a
single spin-1/2 through the field gradient dB_z/dz. Everything downstream runs
on four dimensionless numbers:

    eta   = F / f_q          spin force in force quanta, F = g mu_B |dB_z/dz| / 2
    beta  = 1 / Q            damping per radian
    big_d = k_B T / (hbar omega_c)   thermal occupation scale
    theta = sqrt(1 - beta^2 / 4)     damped oscillation frequency

with the quanta z_q = sqrt(hbar omega_c / k_c), p_q = hbar / z_q, f_q = k_c z_q.

Quantum-limit footnote: the minimum-uncertainty position spread of the initial
state is z_q/sqrt(2) (about 294 fm for the reference cantilever). The matching
velocity spread is p_q/(sqrt(2) m), about 3 nm/s for the same numbers; a
published figure of 300 nm/s for this quantity does not follow from these
constants and is left unreconciled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .constants import HBAR, K_B, MU_B

__all__ = [
    "DomainError",
    "UnsupportedRegimeError",
    "PhysicalSetup",
    "Quanta",
    "DimensionlessParams",
    "InitialState",
    "RegimeWarning",
    "derive_quanta",
    "derive_dimensionless",
    "validate_regime",
]


class DomainError(ValueError):
    """A physical input is outside its allowed domain."""


class UnsupportedRegimeError(ValueError):
    """Parameters fall in a regime the closed-form solution does not cover."""


def _require_positive(name: str, value: float) -> float:
    v = float(value)
    if not math.isfinite(v) or v <= 0.0:
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")
    return v


@dataclass(frozen=True)
class PhysicalSetup:
    """Dimensional cantilever-plus-spin parameters (SI units).

    Exactly one of ``field_gradient`` / ``spin_force`` is supplied; the other
    is derived through F = g mu_B |dB_z/dz| / 2. ``omega_c`` is angular
    (rad/s); use :meth:`create` to enter a frequency in Hz instead.
    """

    spring_constant: float  # N/m
    omega_c: float  # rad/s
    quality_factor: float
    temperature: float  # K, >= 0
    spin_force: float = field(default=0.0)  # N
    field_gradient: float = field(default=0.0)  # T/m
    g_factor: float = 2.0

    def __post_init__(self) -> None:
        _require_positive("spring_constant", self.spring_constant)
        _require_positive("omega_c", self.omega_c)
        _require_positive("quality_factor", self.quality_factor)
        _require_positive("g_factor", self.g_factor)
        t = float(self.temperature)
        if not math.isfinite(t) or t < 0.0:
            raise DomainError(f"temperature must be finite and >= 0, got {self.temperature!r}")
        have_force = self.spin_force > 0.0
        have_grad = self.field_gradient > 0.0
        if have_force == have_grad:
            raise DomainError("exactly one of spin_force / field_gradient must be given")
        if have_force:
            object.__setattr__(
                self, "field_gradient", 2.0 * self.spin_force / (self.g_factor * MU_B)
            )
        else:
            object.__setattr__(
                self, "spin_force", self.g_factor * MU_B * self.field_gradient / 2.0
            )

    @classmethod
    def create(
        cls,
        spring_constant: float,
        quality_factor: float,
        temperature: float,
        *,
        omega_c: float | None = None,
        frequency_hz: float | None = None,
        field_gradient: float | None = None,
        spin_force: float | None = None,
        g_factor: float = 2.0,
    ) -> "PhysicalSetup":
        if (omega_c is None) == (frequency_hz is None):
            raise DomainError("exactly one of omega_c / frequency_hz must be given")
        w = float(omega_c) if omega_c is not None else 2.0 * math.pi * float(frequency_hz)
        return cls(
            spring_constant=spring_constant,
            omega_c=w,
            quality_factor=quality_factor,
            temperature=temperature,
            spin_force=0.0 if spin_force is None else spin_force,
            field_gradient=0.0 if field_gradient is None else field_gradient,
            g_factor=g_factor,
        )

    @classmethod
    def from_config(cls, cfg: dict) -> "PhysicalSetup":
        """Build from the documented JSON schema (see the CLI docs)."""
        known = {
            "spring_constant_N_per_m",
            "frequency_Hz",
            "omega_c_rad_per_s",
            "quality_factor",
            "temperature_K",
            "field_gradient_T_per_m",
            "spin_force_N",
            "g_factor",
        }
        for key in cfg:
            if key not in known:
                raise DomainError(f"unknown physical-setup key {key!r}")
        try:
            k_c = cfg["spring_constant_N_per_m"]
            q = cfg["quality_factor"]
            t = cfg["temperature_K"]
        except KeyError as exc:
            raise DomainError(f"missing physical-setup key {exc.args[0]!r}") from None
        return cls.create(
            spring_constant=k_c,
            quality_factor=q,
            temperature=t,
            omega_c=cfg.get("omega_c_rad_per_s"),
            frequency_hz=cfg.get("frequency_Hz"),
            field_gradient=cfg.get("field_gradient_T_per_m"),
            spin_force=cfg.get("spin_force_N"),
            g_factor=cfg.get("g_factor", 2.0),
        )


@dataclass(frozen=True)
class Quanta:
    """Natural scales of the cantilever mode: z_q p_q = hbar, f_q = k_c z_q."""

    z_q: float  # m
    p_q: float  # kg m/s
    f_q: float  # N
    mass: float  # kg


def derive_quanta(setup: PhysicalSetup) -> Quanta:
    z_q = math.sqrt(HBAR * setup.omega_c / setup.spring_constant)
    return Quanta(
        z_q=z_q,
        p_q=HBAR / z_q,
        f_q=setup.spring_constant * z_q,
        mass=setup.spring_constant / setup.omega_c**2,
    )


@dataclass(frozen=True)
class DimensionlessParams:
    """The four numbers driving every closed form.

    eta = 0 is accepted (spin decoupled; useful degenerate limit). The
    overdamped branch beta >= 2 is rejected: theta must stay real positive.
    """

    eta: float
    beta: float
    big_d: float
    theta: float = field(default=0.0)

    def __post_init__(self) -> None:
        if not math.isfinite(self.eta) or self.eta < 0.0:
            raise DomainError(f"eta must be finite and >= 0, got {self.eta!r}")
        if not math.isfinite(self.beta) or not 0.0 < self.beta < 2.0:
            raise UnsupportedRegimeError(
                f"beta must satisfy 0 < beta < 2 (underdamped branch), got {self.beta!r}"
            )
        if not math.isfinite(self.big_d) or self.big_d < 0.0:
            raise DomainError(f"big_d must be finite and >= 0, got {self.big_d!r}")
        theta = math.sqrt(1.0 - self.beta**2 / 4.0)
        if self.theta != 0.0 and abs(self.theta - theta) > 1e-12 * theta:
            raise DomainError(
                f"theta {self.theta!r} inconsistent with beta {self.beta!r}"
            )
        object.__setattr__(self, "theta", theta)

    @classmethod
    def from_config(cls, cfg: dict) -> "DimensionlessParams":
        known = {"eta", "beta", "big_d"}
        for key in cfg:
            if key not in known:
                raise DomainError(f"unknown dimensionless key {key!r}")
        try:
            return cls(eta=cfg["eta"], beta=cfg["beta"], big_d=cfg["big_d"])
        except KeyError as exc:
            raise DomainError(f"missing dimensionless key {exc.args[0]!r}") from None


def derive_dimensionless(setup: PhysicalSetup) -> DimensionlessParams:
    beta = 1.0 / setup.quality_factor
    if beta >= 2.0:
        raise UnsupportedRegimeError(
            f"Q = {setup.quality_factor!r} gives beta = {beta!r} >= 2 (overdamped), unsupported"
        )
    quanta = derive_quanta(setup)
    return DimensionlessParams(
        eta=setup.spin_force / quanta.f_q,
        beta=beta,
        big_d=K_B * setup.temperature / (HBAR * setup.omega_c),
    )


@dataclass(frozen=True)
class InitialState:
    """Coherent-state center (z0, p0) plus spin amplitudes (amp_up, amp_down).

    Amplitudes must be normalized: |a|^2 + |b|^2 = 1 to 1e-12.
    """

    z0: float = 0.0
    p0: float = 0.0
    amp_up: complex = complex(1.0 / math.sqrt(2.0), 0.0)
    amp_down: complex = complex(1.0 / math.sqrt(2.0), 0.0)

    def __post_init__(self) -> None:
        for name in ("z0", "p0"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        norm = abs(self.amp_up) ** 2 + abs(self.amp_down) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise DomainError(
                f"spin amplitudes must satisfy |a|^2+|b|^2 = 1, got {norm!r}"
            )

    @classmethod
    def from_config(cls, cfg: dict) -> "InitialState":
        known = {"z0", "p0", "amp_up", "amp_down"}
        for key in cfg:
            if key not in known:
                raise DomainError(f"unknown initial-state key {key!r}")

        def as_complex(v) -> complex:
            if isinstance(v, (list, tuple)):
                if len(v) != 2:
                    raise DomainError(f"complex amplitude must be [re, im], got {v!r}")
                return complex(float(v[0]), float(v[1]))
            return complex(float(v), 0.0)

        kwargs: dict = {}
        if "z0" in cfg:
            kwargs["z0"] = float(cfg["z0"])
        if "p0" in cfg:
            kwargs["p0"] = float(cfg["p0"])
        if ("amp_up" in cfg) != ("amp_down" in cfg):
            raise DomainError("amp_up and amp_down must be given together")
        if "amp_up" in cfg:
            kwargs["amp_up"] = as_complex(cfg["amp_up"])
            kwargs["amp_down"] = as_complex(cfg["amp_down"])
        return cls(**kwargs)


@dataclass(frozen=True)
class RegimeWarning:
    """Machine-readable regime advisory: the closed forms still evaluate, but
    the modeling assumption behind them is shaky for these parameters."""

    code: str
    message: str
    inequality: str
    lhs: float
    rhs: float


def validate_regime(p: DimensionlessParams, tau_max: float) -> list[RegimeWarning]:
    """Check the modeling assumptions; never raises, returns warning records.

    Checks: the high-temperature limit (D large), the early-time validity
    horizon of the master equation (times below ~1/D are outside its
    derivation), and the two conditions backing the peak-resolution-time
    approximation tau0 ~ 2^(1/4)/sqrt(eta).
    """
    out: list[RegimeWarning] = []
    if p.big_d <= 10.0:
        out.append(
            RegimeWarning(
                code="high_temperature",
                message=(
                    "high-temperature limit questionable: the master equation assumes "
                    f"D >> 1 but D = {p.big_d:.6g}"
                ),
                inequality="big_d > 10",
                lhs=p.big_d,
                rhs=10.0,
            )
        )
    horizon = math.inf if p.big_d == 0.0 else 10.0 / p.big_d
    if tau_max <= horizon:
        out.append(
            RegimeWarning(
                code="time_horizon",
                message=(
                    "requested times reach the early-time validity horizon: the "
                    f"master equation fails for tau <~ 1/D = {1.0 / p.big_d if p.big_d else math.inf:.6g} "
                    f"and tau_max = {tau_max:.6g} <= 10/D"
                ),
                inequality="tau_max > 10 / big_d",
                lhs=tau_max,
                rhs=horizon,
            )
        )
    if p.eta <= 10.0:
        out.append(
            RegimeWarning(
                code="tau0_coupling",
                message=(
                    f"resolution-time approximation needs eta >> 1, got eta = {p.eta:.6g}"
                ),
                inequality="eta > 10",
                lhs=p.eta,
                rhs=10.0,
            )
        )
    thermal = (p.big_d * p.beta) ** 2 / math.sqrt(8.0)
    if p.eta <= thermal:
        out.append(
            RegimeWarning(
                code="tau0_thermal",
                message=(
                    "resolution-time approximation needs eta >> (D*beta)^2/sqrt(8) "
                    f"= {thermal:.6g}, got eta = {p.eta:.6g}"
                ),
                inequality="eta > (big_d*beta)^2 / sqrt(8)",
                lhs=p.eta,
                rhs=thermal,
            )
        )
    return out
