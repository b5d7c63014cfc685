"""Command-line surface: thresholds, evolve, snapshot, verify, sweep.

Configuration comes from a JSON file (--config), overridable by
SPINCANT_-prefixed environment variables and then by flags; precedence is
flag > environment > config file.  Recognized variables: SPINCANT_CONFIG,
SPINCANT_OUT, SPINCANT_SEED, SPINCANT_THREADS, SPINCANT_QUIET.

The config declares exactly one parameter mode: a "physical" object (SI
keys, see PhysicalSetup.from_config) or a "dimensionless" object with
eta/beta/big_d.  Dimensional columns and kelvin outputs only appear in
physical mode; thresholds and sweep refuse to run without it.

Exit codes: 0 success, 1 verification tolerance failure, 2 configuration
or usage error, 3 resource cap exceeded (grid or sweep too large).

All outputs are deterministic for a fixed config, seed and version: no
timestamps, repr-exact floats, sorted JSON keys, '\n' line endings, '.'
decimal point.  File writes are atomic (write-temp-rename).
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .coefficients import eval_diagonal, eval_offdiagonal
from .constants import HBAR, K_B
from .density import (
    GridSpec,
    ResourceLimitError,
    _atomic_write,
    rho_diag,
    sample_field,
    to_binary,
    to_csv,
    trace_by_quadrature,
)
from .diagnostics import (
    decoherence_profile,
    distance_scaling_note,
    peak_geometry,
    temperature_thresholds,
    thresholds_to_json,
)
from .oracle import (
    ehrenfest_reference,
    log_density_fourier,
    measure_rk4_order,
    random_tuple_suite,
)
from .params import (
    DimensionlessParams,
    DomainError,
    InitialState,
    PhysicalSetup,
    UnsupportedRegimeError,
    derive_dimensionless,
    derive_quanta,
    validate_regime,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3

ENV_PREFIX = "SPINCANT_"

_TOP_LEVEL_KEYS = {
    "physical",
    "dimensionless",
    "initial_state",
    "thresholds",
    "evolve",
    "snapshot",
    "verify",
    "sweep",
    "out",
    "seed",
    "threads",
    "quiet",
}

_SWEEP_AXES = {
    "spring_constant_N_per_m",
    "frequency_Hz",
    "omega_c_rad_per_s",
    "quality_factor",
    "temperature_K",
    "field_gradient_T_per_m",
    "spin_force_N",
    "g_factor",
}

# fixed reference case for the verification suite; config does not move it
_VERIFY_P = DimensionlessParams(eta=2.0, beta=0.05, big_d=10.0)
_VERIFY_INIT = InitialState(z0=1.0, p0=0.5)


class ConfigError(Exception):
    """Bad configuration file, key or value; maps to exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for one invocation: exactly one parameter mode,
    the initial state, per-command option sections, and the output knobs."""

    mode: str
    setup: PhysicalSetup | None
    params: DimensionlessParams
    init: InitialState
    seed: int
    out_dir: str
    threads: int
    quiet: bool
    sections: dict
    echo: dict


def _tool() -> dict:
    return {"name": "spincant", "version": __version__}


def _say(run: RunConfig, msg: str) -> None:
    if not run.quiet:
        print(msg)


def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not JSON-serializable: {type(o).__name__}")


def _json_text(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _write_json(path: str, obj: dict) -> None:
    _atomic_write(path, _json_text(obj).encode("ascii"))


def _num_or_none(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def _require_section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config key {name!r} must be a JSON object")
    return sec


def _known_keys(section: dict, name: str, known: set[str]) -> None:
    for key in section:
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in config section {name!r}")


def _as_float(section: dict, section_name: str, key: str, default: float) -> float:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config key {section_name}.{key} must be a number")
    return float(value)


def _as_int(section: dict, section_name: str, key: str, default: int) -> int:
    value = section.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"config key {section_name}.{key} must be an integer")
    return value


def _parse_bool(text: str, origin: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{origin} must be a boolean flag, got {text!r}")


def _setting(flag_value, env_name: str, cfg: dict, key: str, default, cast):
    if flag_value is not None:
        return flag_value
    env = os.environ.get(ENV_PREFIX + env_name)
    if env is not None:
        try:
            return cast(env)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"environment variable {ENV_PREFIX}{env_name}: {exc}") from None
    if key in cfg:
        try:
            return cast(cfg[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from None
    return default


def _cast_seed(value) -> int:
    if isinstance(value, bool):
        raise ValueError("seed must be an unsigned integer")
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in u64, got {seed}")
    return seed


def _cast_threads(value) -> int:
    if isinstance(value, bool):
        raise ValueError("threads must be a positive integer")
    n = int(value)
    if n < 1:
        raise ValueError(f"threads must be >= 1, got {n}")
    return n


def _cast_quiet(value) -> bool:
    if isinstance(value, bool):
        return value
    return _parse_bool(str(value), "quiet")


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path!r} must hold a JSON object at top level")
    return cfg


def _echo_init(init: InitialState) -> dict:
    return {
        "z0": init.z0,
        "p0": init.p0,
        "amp_up": [init.amp_up.real, init.amp_up.imag],
        "amp_down": [init.amp_down.real, init.amp_down.imag],
    }


def build_run_config(args: argparse.Namespace) -> RunConfig:
    path = args.config or os.environ.get(ENV_PREFIX + "CONFIG")
    cfg = _load_config_file(path) if path else {}
    for key in cfg:
        if key not in _TOP_LEVEL_KEYS:
            raise ConfigError(f"unknown top-level config key {key!r}")

    has_phys = "physical" in cfg
    has_dim = "dimensionless" in cfg
    if has_phys and has_dim:
        raise ConfigError("declare exactly one of 'physical' / 'dimensionless', got both")
    if not has_phys and not has_dim:
        if args.command == "verify":
            # verify has a self-contained fixed reference; no config needed
            cfg = {**cfg, "dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0}}
            has_dim = True
        else:
            raise ConfigError(
                f"the {args.command} command needs a config declaring "
                "'physical' or 'dimensionless' parameters (--config or SPINCANT_CONFIG)"
            )

    try:
        if has_phys:
            setup = PhysicalSetup.from_config(_require_section(cfg, "physical"))
            params = derive_dimensionless(setup)
            mode = "physical"
        else:
            setup = None
            params = DimensionlessParams.from_config(_require_section(cfg, "dimensionless"))
            mode = "dimensionless"
        init = InitialState.from_config(_require_section(cfg, "initial_state"))
    except (DomainError, UnsupportedRegimeError) as exc:
        raise ConfigError(str(exc)) from exc

    seed = _setting(args.seed, "SEED", cfg, "seed", 20211, _cast_seed)
    out_dir = _setting(args.out, "OUT", cfg, "out", ".", str)
    threads = _setting(args.threads, "THREADS", cfg, "threads", 1, _cast_threads)
    quiet = _setting(args.quiet, "QUIET", cfg, "quiet", False, _cast_quiet)

    sections = {
        name: _require_section(cfg, name)
        for name in ("thresholds", "evolve", "snapshot", "verify", "sweep")
    }
    echo: dict = {"mode": mode, "seed": seed, "threads": threads}
    echo[mode] = cfg["physical"] if has_phys else cfg["dimensionless"]
    echo["initial_state"] = _echo_init(init)
    for name, sec in sections.items():
        if sec:
            echo[name] = sec
    return RunConfig(
        mode=mode,
        setup=setup,
        params=params,
        init=init,
        seed=seed,
        out_dir=out_dir,
        threads=threads,
        quiet=quiet,
        sections=sections,
        echo=echo,
    )


def _warning_dicts(warnings) -> list[dict]:
    return [
        {
            "code": w.code,
            "message": w.message,
            "inequality": w.inequality,
            "lhs": w.lhs,
            "rhs": w.rhs,
        }
        for w in warnings
    ]


# - thresholds -


def cmd_thresholds(run: RunConfig) -> int:
    if run.setup is None:
        raise ConfigError(
            "thresholds reports kelvin ceilings and needs a 'physical' config section"
        )
    sec = run.sections["thresholds"]
    _known_keys(sec, "thresholds", {"mscs_margin", "distance_ratio", "gradient_exponent", "tau_max"})
    margin = _as_float(sec, "thresholds", "mscs_margin", 10.0)
    tau_max = _as_float(sec, "thresholds", "tau_max", math.pi)
    try:
        t = temperature_thresholds(run.setup, mscs_margin=margin)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    p = run.params
    quanta = derive_quanta(run.setup)
    report = {
        "tool": _tool(),
        "config": run.echo,
        "thresholds": thresholds_to_json(t),
        "derived": {
            "eta": p.eta,
            "beta": p.beta,
            "big_d": p.big_d,
            # D/T is temperature-independent: k_B / (hbar omega_c)
            "big_d_per_kelvin": K_B / (HBAR * run.setup.omega_c),
        },
        "dimensional": {
            "omega_c_rad_per_s": run.setup.omega_c,
            "z_q_m": quanta.z_q,
            "spin_force_N": run.setup.spin_force,
            "field_gradient_T_per_m": run.setup.field_gradient,
            "tau0_seconds": _num_or_none(t.tau0_exact / run.setup.omega_c),
            "tau_d_seconds": _num_or_none(t.tau_d / run.setup.omega_c),
        },
        "regime_warnings": _warning_dicts(validate_regime(p, tau_max)),
    }
    if "distance_ratio" in sec:
        ratio = _as_float(sec, "thresholds", "distance_ratio", 1.0)
        exponent = _as_float(sec, "thresholds", "gradient_exponent", -4.0)
        try:
            rescaled = distance_scaling_note(run.setup, ratio, gradient_exponent=exponent)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        report["distance_note"] = {
            "ratio": ratio,
            "gradient_exponent": exponent,
            "law": "heuristic power law gradient ~ distance**exponent, not physics",
            "thresholds": thresholds_to_json(rescaled),
        }
    path = os.path.join(run.out_dir, "thresholds.json")
    _write_json(path, report)
    _say(run, f"t_static    = {t.t_static:.6g} K")
    _say(run, f"t_transient = {t.t_transient:.6g} K")
    _say(run, f"t_mscs      = {t.t_mscs:.6g} K")
    _say(run, f"tau0        = {t.tau0_exact:.6g} (approx {t.tau0_approx:.6g})")
    _say(run, f"tau_d       = {t.tau_d:.6g}")
    for w in report["regime_warnings"]:
        _say(run, f"warning [{w['code']}]: {w['message']}")
    _say(run, f"wrote {path}")
    return EXIT_OK


# - evolve -


def _evolve_taus(run: RunConfig) -> np.ndarray:
    sec = run.sections["evolve"]
    _known_keys(sec, "evolve", {"tau_start", "tau_stop", "tau_points", "taus"})
    if "taus" in sec:
        raw = sec["taus"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError("config key evolve.taus must be a non-empty array")
        taus = np.asarray([float(x) for x in raw], dtype=np.float64)
    else:
        start = _as_float(sec, "evolve", "tau_start", 0.0)
        stop = _as_float(sec, "evolve", "tau_stop", 2.0 * math.pi)
        points = _as_int(sec, "evolve", "tau_points", 129)
        if points < 2 or stop <= start:
            raise ConfigError("evolve needs tau_stop > tau_start and tau_points >= 2")
        taus = np.linspace(start, stop, points)
    if taus[0] < 0.0 or not np.all(np.isfinite(taus)):
        raise ConfigError("evolve tau grid must be finite and start at >= 0")
    if taus.size > 1 and not np.all(np.diff(taus) > 0.0):
        raise ConfigError("evolve tau grid must be strictly ascending")
    return taus


def _evolve_csv_text(run: RunConfig) -> tuple[str, int]:
    taus = _evolve_taus(run)
    profile = decoherence_profile(run.params, run.init, taus)
    physical = run.setup is not None
    columns = [
        "tau",
        "delta_d",
        "sigma_d",
        "sigma_d_prime",
        "delta_nd",
        "b2_up",
        "b2_down",
        "xi_eta2",
        "coherence_factor",
        "past_tau_d",
    ]
    if physical:
        columns += ["t_seconds", "delta_d_m"]
        z_q = derive_quanta(run.setup).z_q
        omega = run.setup.omega_c
    lines = [f"# spincant {__version__}"]
    lines.append(f"# config {json.dumps(run.echo, sort_keys=True)}")
    for w in validate_regime(run.params, float(taus[-1])):
        lines.append(f"# regime_warning {w.code}: {w.message}")
    lines.append(f"# tau_d {profile.tau_d!r}")
    lines.append(",".join(columns))
    for i, tau in enumerate(taus):
        g = peak_geometry(run.params, run.init, float(tau))
        row = [
            float(tau),
            g.delta_d,
            g.sigma_d,
            g.sigma_d_prime,
            g.delta_nd,
            g.m_pp,
            g.m_mm,
            float(profile.coherence_log[i]),
            float(profile.damping_factor[i]),
            int(tau >= profile.tau_d),
        ]
        if physical:
            row += [float(tau) / omega, g.delta_d * z_q]
        lines.append(",".join(repr(v) for v in row))
    return "\n".join(lines) + "\n", int(taus.size)


def cmd_evolve(run: RunConfig) -> int:
    text, rows = _evolve_csv_text(run)
    path = os.path.join(run.out_dir, "evolve.csv")
    _atomic_write(path, text.encode("ascii"))
    _say(run, f"wrote {path} ({rows} rows)")
    return EXIT_OK


# - snapshot -


def cmd_snapshot(run: RunConfig) -> int:
    sec = run.sections["snapshot"]
    _known_keys(
        sec,
        "snapshot",
        {"tau", "R_min", "R_max", "n_R", "r_min", "r_max", "n_r", "kind"},
    )
    tau = _as_float(sec, "snapshot", "tau", math.pi)
    span = 3.0 * run.params.eta + 5.0
    kind = sec.get("kind", "Rr")
    try:
        grid = GridSpec(
            x_min=_as_float(sec, "snapshot", "R_min", -span),
            x_max=_as_float(sec, "snapshot", "R_max", span),
            n_x=_as_int(sec, "snapshot", "n_R", 241),
            y_min=_as_float(sec, "snapshot", "r_min", -6.0),
            y_max=_as_float(sec, "snapshot", "r_max", 6.0),
            n_y=_as_int(sec, "snapshot", "n_r", 121),
            kind=kind,
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    if tau < 0.0 or not math.isfinite(tau):
        raise ConfigError(f"config key snapshot.tau must be finite and >= 0, got {tau!r}")
    field = sample_field(run.params, run.init, tau, grid)

    csv_path = os.path.join(run.out_dir, "snapshot.csv")
    bin_path = os.path.join(run.out_dir, "snapshot.bin")
    to_csv(field, csv_path)
    to_binary(field, bin_path)

    sidecar_path = bin_path + ".json"
    with open(sidecar_path, "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    sidecar["tool"] = _tool()
    sidecar["config"] = run.echo
    g = peak_geometry(run.params, run.init, tau)
    summary = {"tau": tau, "delta_d": g.delta_d, "m_pp": g.m_pp, "m_mm": g.m_mm}
    if run.setup is not None:
        z_q = derive_quanta(run.setup).z_q
        summary["z_q_m"] = z_q
        summary["tau_seconds"] = tau / run.setup.omega_c
        summary["delta_d_m"] = g.delta_d * z_q
    sidecar["summary"] = summary
    _write_json(sidecar_path, sidecar)

    _say(run, f"sampled {grid.n_x}x{grid.n_y} {kind} grid at tau = {tau:.6g}")
    _say(run, f"peak separation delta_d = {g.delta_d:.6g}")
    if "delta_d_m" in summary:
        _say(run, f"peak separation = {summary['delta_d_m']:.6g} m")
    for path in (csv_path, bin_path, sidecar_path):
        _say(run, f"wrote {path}")
    return EXIT_OK


# - verify -


def _closed_log(p: DimensionlessParams, init: InitialState, block, k: float, r: float, tau: float) -> complex:
    """Closed-form log characteristic function for one block at (k, r)."""
    s, sp = block
    if s == sp:
        d = eval_diagonal(p, init, tau)
        b2 = d.b2_up if s > 0 else d.b2_down
        c2 = d.c2_up if s > 0 else d.c2_down
        quad = d.sigma_star_sq * k * k + d.b1 * k * r + d.c1 * r * r
        return complex(-quad, b2 * k + c2 * r)
    e = p.eta if s > sp else -p.eta
    o = eval_offdiagonal(p, init, tau)
    # the k^2 width is shared with the diagonal blocks
    sigma_star_sq = eval_diagonal(p, init, tau).sigma_star_sq
    quad = sigma_star_sq * k * k + o.b11 * k * r + o.c12 * r * r
    real = -(e * (o.b10 * k + o.c11 * r) + e * e * o.c10 + quad)
    imag = o.b20 * k + o.c21 * r + e * o.c20
    return complex(real, imag)


def _check_analytic_limits(corruption: dict | None) -> dict:
    d0 = eval_diagonal(_VERIFY_P, _VERIFY_INIT, 0.0)
    got = {
        "sigma_star_sq": d0.sigma_star_sq,
        "b1": d0.b1,
        "b2_up": d0.b2_up,
        "b2_down": d0.b2_down,
        "c1": d0.c1,
        "c2_up": d0.c2_up,
        "c2_down": d0.c2_down,
    }
    want = {
        "sigma_star_sq": 0.25,
        "b1": 0.0,
        "b2_up": _VERIFY_INIT.z0,
        "b2_down": _VERIFY_INIT.z0,
        "c1": 0.25,
        "c2_up": _VERIFY_INIT.p0,
        "c2_down": _VERIFY_INIT.p0,
    }
    out: dict = {"tolerance": 1e-12}
    if corruption is not None:
        quantity = corruption.get("quantity")
        if quantity not in got:
            raise ConfigError(
                f"verify.corruption.quantity must be one of {sorted(got)}, got {quantity!r}"
            )
        rel = corruption.get("relative_error")
        if not isinstance(rel, (int, float)) or isinstance(rel, bool):
            raise ConfigError("verify.corruption.relative_error must be a number")
        base = got[quantity]
        got[quantity] = base * (1.0 + rel) if base != 0.0 else float(rel)
        out["corruption"] = {"quantity": quantity, "relative_error": float(rel)}
    worst, worst_name = -1.0, ""
    for name, value in got.items():
        gap = abs(value - want[name])
        if gap > worst:
            worst, worst_name = gap, name
    out.update(max_error=worst, worst_quantity=worst_name, passed=worst <= 1e-12)
    return out


def _check_beta_zero_trajectory() -> dict:
    p = DimensionlessParams(eta=2.0, beta=1e-12, big_d=10.0)
    worst = 0.0
    for tau in (0.4, 1.1, 2.2, math.pi, 4.8, 2.0 * math.pi):
        d = eval_diagonal(p, _VERIFY_INIT, tau)
        for s, b2 in ((0.5, d.b2_up), (-0.5, d.b2_down)):
            want = (
                _VERIFY_INIT.z0 * math.cos(tau)
                + _VERIFY_INIT.p0 * math.sin(tau)
                + 2.0 * p.eta * s * (1.0 - math.cos(tau))
            )
            worst = max(worst, abs(b2 - want))
    return {"max_error": worst, "tolerance": 1e-10, "passed": worst <= 1e-10}


def _check_beta_continuity() -> dict:
    # beta -> 0 with D fixed: widths freeze at the initial quarter, no damping
    p = DimensionlessParams(eta=2.0, beta=1e-12, big_d=10.0)
    worst = 0.0
    for tau in (1.3, 2.0 * math.pi):
        d = eval_diagonal(p, _VERIFY_INIT, tau)
        o = eval_offdiagonal(p, _VERIFY_INIT, tau)
        worst = max(
            worst,
            abs(d.sigma_star_sq - 0.25),
            abs(d.b1),
            abs(d.c1 - 0.25),
            abs(o.xi),
        )
    return {"max_error": worst, "tolerance": 1e-6, "passed": worst <= 1e-6}


def _check_late_time_asymptotics() -> dict:
    p = DimensionlessParams(eta=2.0, beta=0.1, big_d=10.0)
    d = eval_diagonal(p, _VERIFY_INIT, 200.0)
    delta_gap = abs((d.b2_up - d.b2_down) / (2.0 * p.eta) - 1.0)
    sigma_gap = abs(math.sqrt(2.0 * d.sigma_star_sq) / math.sqrt(p.big_d) - 1.0)
    worst = max(delta_gap, sigma_gap)
    return {
        "delta_d_gap": delta_gap,
        "sigma_d_gap": sigma_gap,
        "max_error": worst,
        "tolerance": 0.01,
        "passed": worst <= 0.01,
    }


def _verify_field():
    grid = GridSpec(x_min=-9.0, x_max=11.0, n_x=161, y_min=-6.0, y_max=6.0, n_y=81)
    return sample_field(_VERIFY_P, _VERIFY_INIT, 1.3, grid), grid


def _check_hermiticity(field) -> dict:
    # rho(z, z') = conj(rho(z', z)): in (R, r) coordinates each diagonal
    # block must mirror-conjugate onto itself, pm onto mp
    pm = field.block("pm")
    mp = field.block("mp")
    cross = float(np.max(np.abs(pm - np.conj(mp[:, ::-1]))))
    diag = max(
        float(np.max(np.abs(field.block(n) - np.conj(field.block(n)[:, ::-1]))))
        for n in ("pp", "mm")
    )
    worst = max(cross, diag)
    return {
        "offdiagonal_mirror": cross,
        "diagonal_mirror": diag,
        "max_error": worst,
        "tolerance": 1e-12,
        "passed": worst <= 1e-12,
    }


def _check_cauchy_schwarz(field, grid) -> dict:
    xs, ys = grid.axes()
    R, r = np.meshgrid(xs, ys, indexing="ij")
    up = rho_diag(_VERIFY_P, _VERIFY_INIT, 1.3, 0.5, R + 0.5 * r, np.zeros_like(R)).real
    dn = rho_diag(_VERIFY_P, _VERIFY_INIT, 1.3, -0.5, R - 0.5 * r, np.zeros_like(R)).real
    bound = np.sqrt(np.maximum(up, 0.0) * np.maximum(dn, 0.0))
    violation = float(np.max(np.abs(field.block("pm")) - bound))
    return {"max_violation": violation, "tolerance": 1e-9, "passed": violation <= 1e-9}


def _check_trace() -> dict:
    grid = GridSpec(x_min=-24.0, x_max=26.0, n_x=1001, y_min=-1.0, y_max=1.0, n_y=3)
    worst = 0.0
    for tau in (0.0, 1.3, 5.0):
        field = sample_field(_VERIFY_P, _VERIFY_INIT, tau, grid)
        worst = max(worst, abs(trace_by_quadrature(field) - 1.0))
    return {"max_error": worst, "tolerance": 1e-6, "passed": worst <= 1e-6}


def _check_ehrenfest() -> dict:
    taus = np.array([0.0, 2.5, 7.0])
    R = np.linspace(-30.0, 30.0, 3001)
    zeros = np.zeros_like(R)
    worst = 0.0
    for s in (0.5, -0.5):
        z_ref, _ = ehrenfest_reference(_VERIFY_P, s, _VERIFY_INIT, taus)
        for i, tau in enumerate(taus):
            slice0 = rho_diag(_VERIFY_P, _VERIFY_INIT, float(tau), s, R, zeros).real
            mean = float(np.trapezoid(R * slice0, R) / np.trapezoid(slice0, R))
            worst = max(worst, abs(mean - z_ref[i]))
    return {"max_error": worst, "tolerance": 1e-6, "passed": worst <= 1e-6}


def _check_eta_zero() -> dict:
    p = DimensionlessParams(eta=0.0, beta=0.3, big_d=1.0)
    init = InitialState(z0=0.7, p0=-0.4)
    worst = 0.0
    for block in ((0.5, 0.5), (0.5, -0.5)):
        for k, r in ((0.3, -0.4), (0.1, 0.2)):
            got = log_density_fourier(p, init, block, k, r, 1.7)
            want = _closed_log(p, init, block, k, r, 1.7)
            worst = max(worst, abs(got - want))
    trace_pt = abs(log_density_fourier(p, init, (0.5, 0.5), 0.0, 0.0, 1.7))
    worst = max(worst, trace_pt)
    return {"max_error": worst, "tolerance": 1e-8, "passed": worst <= 1e-8}


def _check_determinism(run: RunConfig) -> dict:
    first, _ = _evolve_csv_text(run)
    second, _ = _evolve_csv_text(run)
    digest = hashlib.sha256(first.encode("ascii")).hexdigest()
    identical = first == second
    return {"sha256": digest, "identical": identical, "passed": identical}


def cmd_verify(run: RunConfig) -> int:
    sec = run.sections["verify"]
    _known_keys(sec, "verify", {"count", "tolerance", "corruption"})
    count = _as_int(sec, "verify", "count", 200)
    tolerance = _as_float(sec, "verify", "tolerance", 1e-8)
    if count < 1:
        raise ConfigError(f"config key verify.count must be >= 1, got {count}")
    corruption = sec.get("corruption")
    if corruption is not None and not isinstance(corruption, dict):
        raise ConfigError("config key verify.corruption must be a JSON object")

    suite = random_tuple_suite(seed=run.seed, count=count, tolerance=tolerance)
    order = float(measure_rk4_order())
    field, grid = _verify_field()
    checks = {
        "random_suite": suite.to_dict(),
        "rk4_order": {
            "measured": order,
            "window": [3.7, 4.3],
            "passed": bool(3.7 <= order <= 4.3),
        },
        "analytic_limits": _check_analytic_limits(corruption),
        "beta_zero_trajectory": _check_beta_zero_trajectory(),
        "beta_continuity": _check_beta_continuity(),
        "late_time_asymptotics": _check_late_time_asymptotics(),
        "hermiticity": _check_hermiticity(field),
        "cauchy_schwarz": _check_cauchy_schwarz(field, grid),
        "trace": _check_trace(),
        "ehrenfest_moments": _check_ehrenfest(),
        "eta_zero_fast_path": _check_eta_zero(),
        "determinism": _check_determinism(run),
    }
    failed = [name for name, c in checks.items() if not c["passed"]]
    worst_offender = None
    if failed:
        name = failed[0]
        quantity = checks[name].get("worst_quantity")
        worst_offender = f"{name}:{quantity}" if quantity else name
    report = {
        "tool": _tool(),
        "config": run.echo,
        "seed": run.seed,
        "checks": checks,
        "passed": not failed,
        "worst_offender": worst_offender,
    }
    path = os.path.join(run.out_dir, "verify.json")
    _write_json(path, report)
    for name, c in checks.items():
        status = "PASS" if c["passed"] else "FAIL"
        detail = c.get("max_error", c.get("measured", c.get("max_violation", "")))
        _say(run, f"{status} {name} ({detail})")
    if failed:
        _say(run, f"verification FAILED, worst offender: {worst_offender}")
    else:
        _say(run, "verification PASSED")
    _say(run, f"wrote {path}")
    return EXIT_OK if not failed else EXIT_VERIFY_FAILED


# - sweep -


def cmd_sweep(run: RunConfig) -> int:
    if run.setup is None:
        raise ConfigError("sweep reports kelvin ceilings and needs a 'physical' config section")
    sec = run.sections["sweep"]
    _known_keys(sec, "sweep", {"axes", "cap"})
    axes = sec.get("axes")
    if not isinstance(axes, dict) or not axes:
        raise ConfigError("config key sweep.axes must be a non-empty object of axis -> values")
    for axis, values in axes.items():
        if axis not in _SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {axis!r} (choose from {sorted(_SWEEP_AXES)})")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep axis {axis!r} must list at least one value")
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"sweep axis {axis!r} holds a non-numeric value {v!r}")
    cap = _as_int(sec, "sweep", "cap", 10000)
    names = sorted(axes)
    total = math.prod(len(axes[n]) for n in names)
    if total > cap:
        raise ResourceLimitError(f"sweep would emit {total} points, cap is {cap}")

    base = dict(run.echo["physical"])
    force_keys = {"spin_force_N", "field_gradient_T_per_m"}
    swept_force = force_keys & set(names)

    def point_row(combo) -> str:
        cfg = dict(base)
        if swept_force:
            for key in force_keys:
                cfg.pop(key, None)
        cfg.update(zip(names, combo))
        try:
            setup = PhysicalSetup.from_config(cfg)
        except (DomainError, UnsupportedRegimeError) as exc:
            raise ConfigError(f"sweep point {dict(zip(names, combo))!r}: {exc}") from exc
        p = derive_dimensionless(setup)
        t = temperature_thresholds(setup)
        values = [float(v) for v in combo] + [
            p.eta,
            p.beta,
            p.big_d,
            t.t_static,
            t.t_transient,
            t.t_mscs,
            t.tau0_exact,
            t.tau0_approx,
            t.tau_d,
            int(t.mscs_window.satisfied),
        ]
        return ",".join(repr(v) for v in values)

    combos = list(itertools.product(*[axes[n] for n in names]))
    if run.threads > 1:
        with ThreadPoolExecutor(max_workers=run.threads) as pool:
            rows = list(pool.map(point_row, combos))
    else:
        rows = [point_row(c) for c in combos]

    header = names + [
        "eta",
        "beta",
        "big_d",
        "t_static_K",
        "t_transient_K",
        "t_mscs_K",
        "tau0_exact",
        "tau0_approx",
        "tau_d",
        "mscs_satisfied",
    ]
    lines = [f"# spincant {__version__}"]
    lines.append(f"# config {json.dumps(run.echo, sort_keys=True)}")
    lines.append(",".join(header))
    lines.extend(rows)
    path = os.path.join(run.out_dir, "sweep.csv")
    _atomic_write(path, ("\n".join(lines) + "\n").encode("ascii"))
    _say(run, f"wrote {path} ({len(rows)} points)")
    return EXIT_OK


# - entry point -


_COMMANDS = {
    "thresholds": cmd_thresholds,
    "evolve": cmd_evolve,
    "snapshot": cmd_snapshot,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def _parse_args(argv):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (default '.')")
    common.add_argument(
        "--seed", type=_cast_seed, metavar="U64", help="seed for the randomized verification suite"
    )
    common.add_argument(
        "--threads", type=_cast_threads, metavar="N", help="worker threads for sweep points"
    )
    common.add_argument(
        "--quiet", action="store_true", default=None, help="suppress normal stdout"
    )
    parser = argparse.ArgumentParser(
        prog="spincant",
        description="Exact spin-cantilever density-matrix workflows",
    )
    parser.add_argument("--version", action="version", version=f"spincant {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, text in (
        ("thresholds", "temperature ceilings and characteristic times"),
        ("evolve", "peak geometry and coherence time series as CSV"),
        ("snapshot", "density-matrix field export at one instant"),
        ("verify", "closed forms against the independent oracles"),
        ("sweep", "thresholds over a Cartesian parameter grid"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv)
    try:
        run = build_run_config(args)
        os.makedirs(run.out_dir, exist_ok=True)
        return _COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"spincant: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as exc:
        print(f"spincant: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
