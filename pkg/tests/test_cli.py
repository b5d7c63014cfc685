"""End-to-end command-line workflows: configs, outputs, exit codes."""

from __future__ import annotations

import json
import math
import subprocess

import numpy as np
import pytest

from spincant import (
    DimensionlessParams,
    GridSpec,
    InitialState,
    decoherence_profile,
    load_binary,
    peak_geometry,
    sample_field,
)
from spincant.cli import main

K_B = 1.380649e-23
GEDANKEN_KC = 6.5e-6
GEDANKEN_FORCE = math.sqrt(1.7e-3 * K_B * GEDANKEN_KC)

# Reference desk-scale numbers, frozen from the library itself.
T_TRANSIENT = 14.502198414533503
T_MSCS = 3.1519261287170067e-07
TAU0_EXACT = 0.0991211309872542
TAU_D = 3.857982953212265e-06
ETA = 144.348949203292
BETA = 1.4925373134328358e-4

EVOLVE_COLUMNS = [
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

VERIFY_CHECKS = {
    "random_suite",
    "rk4_order",
    "analytic_limits",
    "beta_zero_trajectory",
    "beta_continuity",
    "late_time_asymptotics",
    "hermiticity",
    "cauchy_schwarz",
    "trace",
    "ehrenfest_moments",
    "eta_zero_fast_path",
    "determinism",
}


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("CONFIG", "OUT", "SEED", "THREADS", "QUIET"):
        monkeypatch.delenv(f"SPINCANT_{name}", raising=False)


def physical_section(**overrides) -> dict:
    sec = {
        "spring_constant_N_per_m": GEDANKEN_KC,
        "frequency_Hz": 1700.0,
        "quality_factor": 6700.0,
        "temperature_K": 1.7e-3,
        "spin_force_N": GEDANKEN_FORCE,
    }
    sec.update(overrides)
    return sec


def write_config(tmp_path, cfg: dict, name: str = "run.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def data_rows(csv_text: str) -> tuple[list[str], list[list[str]]]:
    lines = [ln for ln in csv_text.splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


# - thresholds -


def test_thresholds_report(tmp_path):
    cfg = {
        "physical": physical_section(),
        "thresholds": {"distance_ratio": 10.0, "gradient_exponent": -3.0},
    }
    out = tmp_path / "out"
    rc = main(["thresholds", "--config", write_config(tmp_path, cfg), "--out", str(out), "--quiet"])
    assert rc == 0

    report = json.loads((out / "thresholds.json").read_text())
    assert report["tool"]["name"] == "spincant"
    assert report["config"]["mode"] == "physical"

    t = report["thresholds"]
    assert t["t_static_K"] == pytest.approx(1.7e-3, rel=1e-12)
    assert t["t_transient_K"] == pytest.approx(T_TRANSIENT, rel=1e-12)
    # transient / static ratio is exactly 4 Q / pi
    assert t["t_transient_K"] / t["t_static_K"] == pytest.approx(4.0 * 6700.0 / math.pi, rel=1e-12)
    assert t["t_mscs_K"] == pytest.approx(T_MSCS, rel=1e-12)
    assert t["tau0_exact"] == pytest.approx(TAU0_EXACT, rel=1e-9)
    assert t["tau_d"] == pytest.approx(TAU_D, rel=1e-12)
    assert t["mscs_window"]["satisfied"] is False
    assert t["mscs_window"]["eta_sq"] == pytest.approx(ETA**2, rel=1e-9)

    derived = report["derived"]
    assert derived["eta"] == pytest.approx(ETA, rel=1e-9)
    assert derived["beta"] == pytest.approx(BETA, rel=1e-9)
    assert derived["big_d_per_kelvin"] == pytest.approx(1.25e7, rel=0.03)

    dim = report["dimensional"]
    omega = 2.0 * math.pi * 1700.0
    assert dim["omega_c_rad_per_s"] == pytest.approx(omega, rel=1e-12)
    assert dim["tau0_seconds"] == pytest.approx(TAU0_EXACT / omega, rel=1e-9)
    assert dim["tau0_seconds"] == pytest.approx(9.28e-6, rel=5e-3)
    assert isinstance(report["regime_warnings"], list)

    # distance note: T scales like ratio**(2 * exponent), t_mscs like ratio**(-1.5 * exponent)
    note = report["distance_note"]
    assert note["ratio"] == 10.0
    scaled = note["thresholds"]
    assert scaled["t_transient_K"] == pytest.approx(T_TRANSIENT * 1e-6, rel=1e-9)
    assert scaled["t_static_K"] == pytest.approx(1.7e-3 * 1e-6, rel=1e-9)
    assert scaled["t_mscs_K"] == pytest.approx(T_MSCS * 10.0**4.5, rel=1e-9)


def test_thresholds_needs_physical_mode(tmp_path, capsys):
    cfg = {"dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0}}
    rc = main(["thresholds", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path)])
    assert rc == 2
    assert "physical" in capsys.readouterr().err


# - evolve -


def test_evolve_csv_matches_library(tmp_path):
    cfg = {
        "dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0},
        "initial_state": {"z0": 1.0, "p0": 0.5},
        "evolve": {"tau_start": 0.0, "tau_stop": 5.0, "tau_points": 11},
    }
    out = tmp_path / "out"
    rc = main(["evolve", "--config", write_config(tmp_path, cfg), "--out", str(out), "--quiet"])
    assert rc == 0

    text = (out / "evolve.csv").read_text()
    header, rows = data_rows(text)
    assert header == EVOLVE_COLUMNS
    assert len(rows) == 11

    first = dict(zip(header, rows[0]))
    assert float(first["tau"]) == 0.0
    assert float(first["delta_d"]) == 0.0
    assert first["past_tau_d"] == "0"

    p = DimensionlessParams(eta=2.0, beta=0.05, big_d=10.0)
    init = InitialState(z0=1.0, p0=0.5)
    taus = np.linspace(0.0, 5.0, 11)
    profile = decoherence_profile(p, init, taus)
    probe = dict(zip(header, rows[5]))
    g = peak_geometry(p, init, float(taus[5]))
    assert float(probe["delta_d"]) == g.delta_d
    assert float(probe["sigma_d"]) == g.sigma_d
    assert float(probe["sigma_d_prime"]) == g.sigma_d_prime
    assert float(probe["delta_nd"]) == g.delta_nd
    assert float(probe["b2_up"]) == g.m_pp
    assert float(probe["b2_down"]) == g.m_mm
    assert float(probe["xi_eta2"]) == float(profile.coherence_log[5])
    assert float(probe["coherence_factor"]) == float(profile.damping_factor[5])


def test_evolve_separation_at_half_period(tmp_path):
    cfg = {
        "dimensionless": {"eta": 2.0, "beta": 1e-12, "big_d": 0.0},
        "evolve": {"taus": [math.pi]},
    }
    out = tmp_path / "out"
    rc = main(["evolve", "--config", write_config(tmp_path, cfg), "--out", str(out), "--quiet"])
    assert rc == 0
    text = (out / "evolve.csv").read_text()
    header, rows = data_rows(text)
    row = dict(zip(header, rows[0]))
    assert float(row["delta_d"]) == pytest.approx(8.0, abs=1e-6)
    assert row["past_tau_d"] == "0"
    assert "# tau_d inf" in text


def test_evolve_physical_columns(tmp_path):
    cfg = {
        "physical": physical_section(),
        "evolve": {"taus": [0.0, math.pi]},
    }
    out = tmp_path / "out"
    rc = main(["evolve", "--config", write_config(tmp_path, cfg), "--out", str(out), "--quiet"])
    assert rc == 0
    header, rows = data_rows((out / "evolve.csv").read_text())
    assert header == EVOLVE_COLUMNS + ["t_seconds", "delta_d_m"]
    top = dict(zip(header, rows[1]))
    omega = 2.0 * math.pi * 1700.0
    assert float(top["t_seconds"]) == pytest.approx(math.pi / omega, rel=1e-12)
    assert float(top["delta_d_m"]) == pytest.approx(0.24e-9, rel=0.05)
    # way past the decoherence time by half a period
    assert top["past_tau_d"] == "1"


def test_evolve_byte_determinism(tmp_path):
    cfg = {
        "dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0},
        "evolve": {"tau_points": 17},
    }
    path = write_config(tmp_path, cfg)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["evolve", "--config", path, "--out", str(out_a), "--quiet"]) == 0
    assert main(["evolve", "--config", path, "--out", str(out_b), "--quiet"]) == 0
    blob_a = (out_a / "evolve.csv").read_bytes()
    assert blob_a == (out_b / "evolve.csv").read_bytes()
    assert b'"seed": 20211' in blob_a


# - snapshot -


def test_snapshot_round_trip(tmp_path):
    cfg = {
        "dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0},
        "initial_state": {"z0": 1.0, "p0": 0.5},
        "snapshot": {"tau": 1.3, "R_min": -8.0, "R_max": 8.0, "n_R": 41, "n_r": 21},
    }
    out = tmp_path / "out"
    rc = main(["snapshot", "--config", write_config(tmp_path, cfg), "--out", str(out), "--quiet"])
    assert rc == 0

    first_line = (out / "snapshot.csv").read_text().splitlines()[0]
    assert first_line == "R,r,block,re,im"

    # sidecar rewrite must not break the binary loader
    loaded = load_binary(str(out / "snapshot.bin"))
    p = DimensionlessParams(eta=2.0, beta=0.05, big_d=10.0)
    init = InitialState(z0=1.0, p0=0.5)
    grid = GridSpec(x_min=-8.0, x_max=8.0, n_x=41, y_min=-6.0, y_max=6.0, n_y=21)
    direct = sample_field(p, init, 1.3, grid)
    for name in ("pp", "mm", "pm", "mp"):
        assert np.array_equal(loaded.block(name), direct.block(name))

    sidecar = json.loads((out / "snapshot.bin.json").read_text())
    assert sidecar["tool"]["name"] == "spincant"
    assert sidecar["config"]["mode"] == "dimensionless"
    assert sidecar["summary"]["tau"] == 1.3
    assert sidecar["summary"]["delta_d"] == pytest.approx(2.8694114255792895, rel=1e-12)


def test_snapshot_zzp_grid(tmp_path):
    cfg = {
        "dimensionless": {"eta": 1.0, "beta": 0.1, "big_d": 5.0},
        "snapshot": {"tau": 0.7, "n_R": 31, "n_r": 31, "kind": "zzp"},
    }
    rc = main(["snapshot", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path), "--quiet"])
    assert rc == 0
    sidecar = json.loads((tmp_path / "snapshot.bin.json").read_text())
    assert sidecar["grid"]["kind"] == "zzp"


def test_snapshot_resource_cap(tmp_path, capsys):
    cfg = {
        "dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0},
        "snapshot": {"n_R": 5000, "n_r": 5000},
    }
    rc = main(["snapshot", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path)])
    assert rc == 3
    assert "resource limit" in capsys.readouterr().err


# - verify -


def test_verify_passes_and_reports(tmp_path):
    cfg = {"verify": {"count": 40}}
    out = tmp_path / "out"
    rc = main(["verify", "--config", write_config(tmp_path, cfg), "--out", str(out), "--quiet"])
    assert rc == 0

    report = json.loads((out / "verify.json").read_text())
    assert report["passed"] is True
    assert report["worst_offender"] is None
    assert report["seed"] == 20211
    checks = report["checks"]
    assert set(checks) == VERIFY_CHECKS
    assert all(c["passed"] for c in checks.values())

    suite = checks["random_suite"]
    assert suite["count"] == 40
    assert suite["max_error"] <= 1e-8
    assert suite["quantities"]
    assert 3.7 <= checks["rk4_order"]["measured"] <= 4.3
    assert len(checks["determinism"]["sha256"]) == 64


def test_verify_corruption_negative_control(tmp_path, capsys):
    cfg = {
        "verify": {
            "count": 5,
            "corruption": {"quantity": "sigma_star_sq", "relative_error": 1e-5},
        }
    }
    out = tmp_path / "out"
    rc = main(["verify", "--config", write_config(tmp_path, cfg), "--out", str(out)])
    assert rc == 1
    assert "FAIL analytic_limits" in capsys.readouterr().out
    report = json.loads((out / "verify.json").read_text())
    assert report["passed"] is False
    assert report["worst_offender"] == "analytic_limits:sigma_star_sq"


def test_verify_rejects_unknown_corruption_quantity(tmp_path):
    cfg = {"verify": {"corruption": {"quantity": "bogus", "relative_error": 1e-5}}}
    rc = main(["verify", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path), "--quiet"])
    assert rc == 2


def test_verify_seed_flag(tmp_path):
    cfg = {"verify": {"count": 5}}
    out = tmp_path / "out"
    rc = main(
        ["verify", "--config", write_config(tmp_path, cfg), "--out", str(out), "--seed", "777", "--quiet"]
    )
    assert rc == 0
    report = json.loads((out / "verify.json").read_text())
    assert report["seed"] == 777
    assert report["checks"]["random_suite"]["seed"] == 777


# - sweep -


def test_sweep_scaling_laws(tmp_path):
    cfg = {
        "physical": physical_section(),
        "sweep": {
            "axes": {
                "quality_factor": [6700.0, 67000.0],
                "spin_force_N": [GEDANKEN_FORCE, 2.0 * GEDANKEN_FORCE],
            }
        },
    }
    out = tmp_path / "out"
    rc = main(["sweep", "--config", write_config(tmp_path, cfg), "--out", str(out), "--quiet"])
    assert rc == 0

    header, rows = data_rows((out / "sweep.csv").read_text())
    assert header[:2] == ["quality_factor", "spin_force_N"]
    assert header[-1] == "mscs_satisfied"
    assert len(rows) == 4

    table = {}
    for row in rows:
        rec = dict(zip(header, row))
        table[(float(rec["quality_factor"]), float(rec["spin_force_N"]))] = rec
    lo = table[(6700.0, GEDANKEN_FORCE)]
    hi_q = table[(67000.0, GEDANKEN_FORCE)]
    hi_f = table[(6700.0, 2.0 * GEDANKEN_FORCE)]

    assert float(lo["t_mscs_K"]) == pytest.approx(T_MSCS, rel=1e-12)
    # t_mscs is linear in Q; t_static does not depend on Q at all
    assert float(hi_q["t_mscs_K"]) / float(lo["t_mscs_K"]) == pytest.approx(10.0, rel=1e-12)
    assert float(hi_q["t_static_K"]) == pytest.approx(float(lo["t_static_K"]), rel=1e-15)
    # t_static goes like F^2, t_mscs like F^-3/2
    assert float(hi_f["t_static_K"]) / float(lo["t_static_K"]) == pytest.approx(4.0, rel=1e-12)
    assert float(hi_f["t_mscs_K"]) / float(lo["t_mscs_K"]) == pytest.approx(2.0**-1.5, rel=1e-12)


def test_sweep_resource_cap(tmp_path):
    cfg = {
        "physical": physical_section(),
        "sweep": {"axes": {"temperature_K": [1e-3 * k for k in range(1, 12)]}, "cap": 10},
    }
    rc = main(["sweep", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path), "--quiet"])
    assert rc == 3


def test_sweep_rejects_unknown_axis(tmp_path, capsys):
    cfg = {"physical": physical_section(), "sweep": {"axes": {"mass_kg": [1.0]}}}
    rc = main(["sweep", "--config", write_config(tmp_path, cfg), "--out", str(tmp_path)])
    assert rc == 2
    assert "mass_kg" in capsys.readouterr().err


# - config and environment plumbing -


def test_config_error_paths(tmp_path, capsys):
    # missing file
    assert main(["evolve", "--config", str(tmp_path / "nope.json")]) == 2

    # malformed JSON, error names the parse position
    bad = tmp_path / "bad.json"
    bad.write_text("{'nope'}", encoding="utf-8")
    assert main(["evolve", "--config", str(bad)]) == 2
    assert "line" in capsys.readouterr().err

    # both modes at once
    both = {
        "physical": physical_section(),
        "dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0},
    }
    assert main(["evolve", "--config", write_config(tmp_path, both, "both.json")]) == 2

    # evolve gets no default mode
    assert main(["evolve", "--config", write_config(tmp_path, {}, "empty.json")]) == 2

    # unknown top-level key
    unk = {"dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0}, "grider": {}}
    assert main(["evolve", "--config", write_config(tmp_path, unk, "unk.json")]) == 2

    # parameter out of range surfaces as a config error
    hot = {"dimensionless": {"eta": 2.0, "beta": 3.5, "big_d": 10.0}}
    assert main(["evolve", "--config", write_config(tmp_path, hot, "hot.json")]) == 2


def test_out_dir_precedence(tmp_path, monkeypatch):
    cfg_out = tmp_path / "from_cfg"
    env_out = tmp_path / "from_env"
    flag_out = tmp_path / "from_flag"
    cfg = {
        "dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0},
        "evolve": {"tau_points": 3},
        "out": str(cfg_out),
    }
    path = write_config(tmp_path, cfg)

    assert main(["evolve", "--config", path, "--quiet"]) == 0
    assert (cfg_out / "evolve.csv").exists()

    monkeypatch.setenv("SPINCANT_OUT", str(env_out))
    assert main(["evolve", "--config", path, "--quiet"]) == 0
    assert (env_out / "evolve.csv").exists()

    assert main(["evolve", "--config", path, "--out", str(flag_out), "--quiet"]) == 0
    assert (flag_out / "evolve.csv").exists()


def test_seed_env_and_config_precedence(tmp_path, monkeypatch):
    cfg = {
        "dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0},
        "evolve": {"tau_points": 3},
        "seed": 111,
    }
    path = write_config(tmp_path, cfg)
    out = tmp_path / "out"

    assert main(["evolve", "--config", path, "--out", str(out), "--quiet"]) == 0
    assert '"seed": 111' in (out / "evolve.csv").read_text()

    monkeypatch.setenv("SPINCANT_SEED", "333")
    assert main(["evolve", "--config", path, "--out", str(out), "--quiet"]) == 0
    assert '"seed": 333' in (out / "evolve.csv").read_text()

    assert main(["evolve", "--config", path, "--out", str(out), "--seed", "222", "--quiet"]) == 0
    assert '"seed": 222' in (out / "evolve.csv").read_text()


def test_config_env_fallback(tmp_path, monkeypatch):
    cfg = {
        "dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0},
        "evolve": {"tau_points": 3},
    }
    monkeypatch.setenv("SPINCANT_CONFIG", write_config(tmp_path, cfg))
    out = tmp_path / "out"
    assert main(["evolve", "--out", str(out), "--quiet"]) == 0
    assert (out / "evolve.csv").exists()


def test_quiet_modes(tmp_path, capsys, monkeypatch):
    cfg = {
        "dimensionless": {"eta": 2.0, "beta": 0.05, "big_d": 10.0},
        "evolve": {"tau_points": 3},
    }
    path = write_config(tmp_path, cfg)

    assert main(["evolve", "--config", path, "--out", str(tmp_path), "--quiet"]) == 0
    assert capsys.readouterr().out == ""

    monkeypatch.setenv("SPINCANT_QUIET", "1")
    assert main(["evolve", "--config", path, "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out == ""

    monkeypatch.delenv("SPINCANT_QUIET")
    assert main(["evolve", "--config", path, "--out", str(tmp_path)]) == 0
    assert "wrote" in capsys.readouterr().out


def test_argparse_surface(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "spincant" in capsys.readouterr().out

    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2

    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_console_script(tmp_path):
    cfg = {"physical": physical_section()}
    out = tmp_path / "out"
    proc = subprocess.run(
        ["spincant", "thresholds", "--config", write_config(tmp_path, cfg), "--out", str(out)],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert "t_transient" in proc.stdout
    assert (out / "thresholds.json").exists()
