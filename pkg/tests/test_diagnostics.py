"""Peak geometry, resolution time, temperature ceilings, decoherence profile."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from conftest import REF_FRAME_TAUS, REF_INIT, REF_P
from spincant.coefficients import eval_diagonal, eval_offdiagonal
from spincant.diagnostics import (
    decoherence_profile,
    distance_scaling_note,
    mscs_threshold_from_frequency,
    mscs_threshold_from_mass,
    peak_geometry,
    profile_to_csv,
    resolution_time,
    temperature_thresholds,
    thresholds_to_json,
)
from spincant.params import (
    DimensionlessParams,
    DomainError,
    InitialState,
    PhysicalSetup,
    derive_dimensionless,
    derive_quanta,
    validate_regime,
)

K_B = 1.380649e-23
HBAR = 1.054571817e-34

# desk-scale cantilever: k_c 6.5e-6 N/m, 1700 Hz, Q 6700, 1.7 mK, spin force
# tuned so the static ceiling sits exactly at the operating temperature
GEDANKEN_KC = 6.5e-6
GEDANKEN_FORCE = math.sqrt(1.7e-3 * K_B * GEDANKEN_KC)


def gedanken_setup(quality_factor: float = 6700.0) -> PhysicalSetup:
    return PhysicalSetup.create(
        spring_constant=GEDANKEN_KC,
        quality_factor=quality_factor,
        temperature=1.7e-3,
        frequency_hz=1700.0,
        spin_force=GEDANKEN_FORCE,
    )


def test_initial_peak_geometry():
    init = InitialState(z0=1.0, p0=0.5)
    g = peak_geometry(REF_P, init, 0.0)
    assert g.delta_d == 0.0, f"peaks start merged, got delta_d = {g.delta_d!r}"
    assert abs(g.sigma_d - math.sqrt(0.5)) < 1e-12
    assert abs(g.sigma_d_prime - math.sqrt(2.0)) < 1e-12
    assert abs(g.m_pp - init.z0) < 1e-12 and abs(g.m_mm - init.z0) < 1e-12
    # product state: coherence peak still on the diagonal, undamped
    assert abs(g.m_pm[0] - init.z0) < 1e-12 and abs(g.m_pm[1] - init.z0) < 1e-12
    assert g.delta_nd < 1e-12
    assert abs(g.coherence_log) < 1e-12
    with pytest.raises(DomainError):
        peak_geometry(REF_P, init, -0.1)
    with pytest.raises(DomainError):
        peak_geometry(REF_P, init, math.inf)


def test_undamped_separation_law():
    p = DimensionlessParams(eta=2.0, beta=1e-12, big_d=0.0)
    init = InitialState()
    g = peak_geometry(p, init, math.pi)
    assert abs(g.delta_d - 4.0 * p.eta) < 1e-9, f"delta_d(pi) = {g.delta_d!r}"
    for tau in (0.3, 1.0, 2.2, 3.0):
        g = peak_geometry(p, init, tau)
        want = 4.0 * p.eta * math.sin(0.5 * tau) ** 2
        assert abs(g.delta_d - want) < 1e-9, f"tau={tau}: {g.delta_d!r} vs {want!r}"


def test_late_time_geometry_saturates():
    # beta*tau = 20: transient gone, spread thermalized
    p = DimensionlessParams(eta=2.0, beta=0.1, big_d=10.0)
    g = peak_geometry(p, InitialState(z0=1.0, p0=0.5), 200.0)
    assert abs(g.delta_d - 2.0 * p.eta) / (2.0 * p.eta) < 0.01
    assert abs(g.sigma_d - math.sqrt(p.big_d)) / math.sqrt(p.big_d) < 0.01


def test_geometry_matches_coefficient_module():
    init = InitialState(z0=0.7, p0=-0.4)
    for tau in (0.3, 1.1, 2.9):
        g = peak_geometry(REF_P, init, tau)
        d = eval_diagonal(REF_P, init, tau)
        o = eval_offdiagonal(REF_P, init, tau)
        assert abs(g.delta_d - (d.b2_up - d.b2_down)) < 1e-12
        assert g.m_pp == d.b2_up and g.m_mm == d.b2_down
        assert abs(g.delta_nd - math.sqrt(2.0) * REF_P.eta * abs(o.r0)) < 1e-12
        assert abs(g.coherence_log - REF_P.eta**2 * o.xi) < 1e-12


def test_offdiagonal_centers_mirror_about_diagonal():
    g = peak_geometry(REF_P, REF_INIT, 1.3)
    assert g.m_mp == (g.m_pm[1], g.m_pm[0])
    # the two coherence maxima sit delta_nd apart in the (z, z') plane
    dist = math.hypot(g.m_pm[0] - g.m_mp[0], g.m_pm[1] - g.m_mp[1])
    assert abs(dist - g.delta_nd) < 1e-12


def test_separation_grows_with_coupling():
    for tau in (0.4, 0.5 * math.pi, 3.0):
        gaps = [
            peak_geometry(
                DimensionlessParams(eta=e, beta=0.05, big_d=10.0), InitialState(), tau
            ).delta_d
            for e in np.linspace(0.1, 5.0, 15)
        ]
        assert all(b > a for a, b in zip(gaps, gaps[1:])), f"tau={tau}: {gaps}"


def test_resolution_time_desk_scale():
    setup = gedanken_setup()
    p = derive_dimensionless(setup)
    assert not [w for w in validate_regime(p, math.pi) if w.code.startswith("tau0")]
    r = resolution_time(p)
    assert r.resolvable
    assert abs(r.tau0_exact - 0.0991211309872542) < 1e-9
    assert abs(r.tau0_exact - 0.1) < 0.005, f"tau0 = {r.tau0_exact!r}"
    t0_dim = r.tau0_exact / setup.omega_c
    assert abs(t0_dim - 9.3e-6) < 0.1e-6, f"t0 = {t0_dim!r} s"
    exact, approx = r
    assert exact == r.tau0_exact and approx == r.tau0_approx


def test_resolution_time_unresolvable_without_coupling():
    r = resolution_time(DimensionlessParams(eta=0.0, beta=0.1, big_d=5.0))
    assert not r.resolvable
    assert math.isnan(r.tau0_exact)
    assert math.isinf(r.tau0_approx)


def test_resolution_time_near_approximation():
    # no regime warnings fire for these parameters, so the shortcut must hold
    p = DimensionlessParams(eta=50.0, beta=1e-4, big_d=1e4)
    assert not validate_regime(p, math.pi)
    r = resolution_time(p)
    assert r.resolvable
    gap = abs(r.tau0_exact / r.tau0_approx - 1.0)
    assert gap < 0.10, f"exact {r.tau0_exact!r} vs approx {r.tau0_approx!r}"
    assert abs(r.tau0_approx - 2.0**0.25 / math.sqrt(p.eta)) < 1e-15


def test_threshold_temperatures_desk_scale():
    t = temperature_thresholds(gedanken_setup())
    assert abs(t.t_static - 1.7e-3) < 1e-15
    assert abs(t.t_transient - 14.502198414533503) < 1e-12 * 14.5
    assert abs(t.t_transient / 14.0 - 1.0) < 0.05
    assert abs(t.t_mscs - 3.1519261287170067e-07) < 1e-12 * 3.2e-7
    assert 3e-7 / 1.5 < t.t_mscs < 3e-7 * 1.5
    assert t.t_transient / t.t_static == pytest.approx(4.0 * 6700.0 / math.pi, rel=1e-12)
    assert abs(t.tau_d - 3.857982953212265e-06) < 1e-15
    assert abs(t.tau0_exact - 0.0991211309872542) < 1e-9


def test_threshold_improves_linearly_with_quality():
    base = temperature_thresholds(gedanken_setup())
    better = temperature_thresholds(gedanken_setup(quality_factor=67000.0))
    assert abs(better.t_mscs / base.t_mscs - 10.0) < 1e-12
    assert abs(better.t_mscs - 3e-6) < 3e-6 * 0.5, f"t_mscs = {better.t_mscs!r}"


def test_mscs_dual_route_identity():
    rng = np.random.default_rng(99)
    setups = [gedanken_setup()]
    for _ in range(20):
        setups.append(
            PhysicalSetup.create(
                spring_constant=10.0 ** rng.uniform(-7, -3),
                quality_factor=10.0 ** rng.uniform(1, 6),
                temperature=10.0 ** rng.uniform(-4, 1),
                frequency_hz=10.0 ** rng.uniform(2, 5),
                spin_force=10.0 ** rng.uniform(-18, -14),
            )
        )
    for s in setups:
        a = mscs_threshold_from_frequency(s)
        b = mscs_threshold_from_mass(s)
        assert abs(a - b) < 1e-10 * max(abs(a), abs(b)), f"{a!r} vs {b!r}"


def test_mscs_window_verdict():
    t = temperature_thresholds(gedanken_setup())
    w = t.mscs_window
    # eta^2 ~ 2.1e4 exceeds Q = 6700: squeezed shut from above
    assert abs(w.eta_sq - 20836.619136094574) < 1e-6
    assert w.quality_factor == 6700.0
    assert not w.satisfied
    # eta_sq comes from the coupling definition F^2 sqrt(m) / (hbar k_c^(3/2))
    s = gedanken_setup()
    m = derive_quanta(s).mass
    definitional = s.spin_force**2 * math.sqrt(m) / (HBAR * s.spring_constant**1.5)
    assert abs(w.eta_sq - definitional) < 1e-9 * definitional

    # a window that is genuinely open: eta = 10, Q = 1e4
    k_c, freq = 1e-6, 1000.0
    f_q = math.sqrt(HBAR * 2.0 * math.pi * freq * k_c)
    open_setup = PhysicalSetup.create(
        spring_constant=k_c,
        quality_factor=1e4,
        temperature=0.01,
        frequency_hz=freq,
        spin_force=10.0 * f_q,
    )
    assert temperature_thresholds(open_setup).mscs_window.satisfied
    assert not temperature_thresholds(open_setup, mscs_margin=200.0).mscs_window.satisfied
    with pytest.raises(DomainError):
        temperature_thresholds(open_setup, mscs_margin=0.0)


def test_profile_no_bath_no_decay():
    taus = np.linspace(0.0, 50.0, 26)
    cold = decoherence_profile(
        DimensionlessParams(eta=2.0, beta=0.1, big_d=0.0), InitialState(), taus
    )
    assert math.isinf(cold.tau_d)
    assert np.max(np.abs(cold.coherence_log)) < 1e-12
    assert np.max(np.abs(cold.damping_factor - 1.0)) < 1e-12
    frictionless = decoherence_profile(
        DimensionlessParams(eta=2.0, beta=1e-12, big_d=10.0),
        InitialState(),
        np.linspace(0.0, 10.0, 11),
    )
    assert np.max(np.abs(frictionless.coherence_log)) < 1e-6


def test_profile_factor_at_characteristic_time():
    # bath-dominated desk-scale corners: damping at tau_d stays within
    # half an e-fold of 1/e
    lo, hi = math.exp(-1.5), math.exp(-0.5)
    for eta, beta, big_d in [(2.0, 1e-3, 10.0), (1.0, 1e-4, 100.0)]:
        p = DimensionlessParams(eta=eta, beta=beta, big_d=big_d)
        prof = decoherence_profile(p, InitialState(z0=1.0), np.array([0.0, 1.0 / (4.0 * eta**2 * big_d * beta)]))
        assert abs(prof.tau_d - prof.taus[-1]) < 1e-9
        factor = float(prof.damping_factor[-1])
        assert lo < factor < hi, f"eta={eta}: factor(tau_d) = {factor!r}"
    frozen = decoherence_profile(
        DimensionlessParams(eta=2.0, beta=1e-3, big_d=10.0), InitialState(), np.array([6.25])
    )
    assert abs(frozen.coherence_log[0] + 1.453035060682509) < 1e-9


def test_profile_secular_rate_after_transient():
    # once beta*tau >~ 2 the only growing term is the thermal one, so the
    # log slope settles on -4 eta^2 D beta; before that it oscillates and
    # overshoots, so no pointwise small-tau check is possible
    p = DimensionlessParams(eta=2.0, beta=0.1, big_d=10.0)
    rate = 4.0 * p.eta**2 * p.big_d * p.beta
    prof = decoherence_profile(p, InitialState(), np.array([20.0, 40.0, 60.0, 100.0]))
    slopes = np.diff(prof.coherence_log) / np.diff(prof.taus)
    for s in slopes:
        assert abs(-s / rate - 1.0) < 0.10, f"slope {s!r} vs rate {rate!r}"


def test_profile_matches_grid_peak_decay(reference_grid_run):
    run, _ = reference_grid_run
    prof = decoherence_profile(REF_P, REF_INIT, np.array(REF_FRAME_TAUS))
    peak0 = float(np.max(np.abs(run.frames[0].blocks["pm"])))
    sig0 = eval_diagonal(REF_P, REF_INIT, 0.0).sigma_star_sq
    quantitative = 0
    for i, frame in enumerate(run.frames[1:], start=1):
        got = float(np.max(np.abs(frame.blocks["pm"]))) / peak0
        sig = eval_diagonal(REF_P, REF_INIT, frame.tau).sigma_star_sq
        want = math.sqrt(sig0 / sig) * float(prof.damping_factor[i])
        if want >= 1e-10:
            assert abs(got / want - 1.0) < 0.05, f"tau={frame.tau}: {got!r} vs {want!r}"
            quantitative += 1
        else:
            assert got < 1e-12, f"tau={frame.tau}: coherence should be annihilated, got {got!r}"
    assert quantitative >= 3


def test_profile_validation_and_immutability():
    p = REF_P
    init = InitialState()
    with pytest.raises(DomainError):
        decoherence_profile(p, init, np.array([1.0, 0.5]))
    with pytest.raises(DomainError):
        decoherence_profile(p, init, np.array([-1.0, 0.5]))
    with pytest.raises(DomainError):
        decoherence_profile(p, init, np.array([]))
    with pytest.raises(DomainError):
        decoherence_profile(p, init, np.array([[0.0, 1.0]]))
    prof = decoherence_profile(p, init, np.array([0.0, 1.0, 2.0]))
    for arr in (prof.taus, prof.coherence_log, prof.damping_factor):
        with pytest.raises(ValueError):
            arr[0] = 7.0
    rows = list(prof.rows())
    assert len(rows) == 3 and all(len(r) == 4 for r in rows)
    assert all(r[3] == prof.tau_d for r in rows)


def test_distance_scaling_identity_and_power_laws():
    setup = gedanken_setup()
    base = temperature_thresholds(setup)
    same = distance_scaling_note(setup, 1.0)
    assert same == base

    # pure power arithmetic: x10 distance at exponent -3 is x1e-6 in T
    third = distance_scaling_note(setup, 10.0, gradient_exponent=-3.0)
    assert abs(third.t_transient / base.t_transient - 1e-6) < 1e-18
    assert abs(third.t_transient - 14e-6) < 0.6e-6
    assert abs(third.t_static / base.t_static - 1e-6) < 1e-18
    # the cat-state ceiling rises as the force falls: F^(-3/2)
    assert abs(third.t_mscs / base.t_mscs / 10.0**4.5 - 1.0) < 1e-10

    quartic = distance_scaling_note(setup, 10.0)
    assert abs(quartic.t_transient / base.t_transient - 1e-8) < 1e-20

    # exponent tuned so x10 distance lands the transient ceiling on 1.1 mK
    matched = 0.5 * math.log10(1.1e-3 / base.t_transient)
    tuned = distance_scaling_note(setup, 10.0, gradient_exponent=matched)
    assert abs(tuned.t_transient - 1.1e-3) < 1e-9 * 1.1e-3

    for bad in (0.0, -2.0, math.inf):
        with pytest.raises(DomainError):
            distance_scaling_note(setup, bad)
    with pytest.raises(DomainError):
        distance_scaling_note(setup, 2.0, gradient_exponent=math.nan)


def test_thresholds_json_serialization():
    t = temperature_thresholds(gedanken_setup())
    obj = thresholds_to_json(t)
    text = json.dumps(obj)
    back = json.loads(text)
    assert back["t_static_K"] == t.t_static
    assert back["t_transient_K"] == t.t_transient
    assert back["t_mscs_K"] == t.t_mscs
    assert back["tau0_exact"] == t.tau0_exact
    assert back["mscs_window"]["satisfied"] is False
    # zero temperature: no bath, tau_d is inf and must serialize as null
    frozen_setup = PhysicalSetup.create(
        spring_constant=GEDANKEN_KC,
        quality_factor=6700.0,
        temperature=0.0,
        frequency_hz=1700.0,
        spin_force=GEDANKEN_FORCE,
    )
    cold = thresholds_to_json(temperature_thresholds(frozen_setup))
    assert cold["tau_d"] is None
    json.dumps(cold)


def test_profile_csv_round_trip(tmp_path):
    prof = decoherence_profile(REF_P, REF_INIT, np.array([0.0, 1.0, 2.5]))
    path = tmp_path / "profile.csv"
    profile_to_csv(prof, str(path))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "tau,coherence_log,damping_factor,tau_d"
    assert len(lines) == 4
    for i, line in enumerate(lines[1:]):
        tau, lg, factor, tau_d = (float(x) for x in line.split(","))
        assert tau == float(prof.taus[i])
        assert lg == float(prof.coherence_log[i])
        assert factor == float(prof.damping_factor[i])
        assert tau_d == prof.tau_d
