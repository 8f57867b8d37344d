from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ramanpass import dsl
from ramanpass.errors import SingularityError, ValidationError
from ramanpass.schedule import (
    CAP_MARGIN,
    DEFAULT_THETA_CAP,
    FAMILIES,
    ProtocolSpec,
    builtin_family,
    end_tau,
    pump_from_stokes,
    raw_theta,
    sample_schedule,
    tau_at_cap,
    theta_of_t,
)

FAMILY_IDS = sorted(FAMILIES)


def test_builtin_a_pulses():
    spec = builtin_family("a")
    assert spec.stokes(1.3) == 1.0
    assert pump_from_stokes(spec, 1.3) == pytest.approx(0.5 / math.cos(0.65), rel=1e-12)


def test_builtin_b_pump_is_constant():
    spec = builtin_family("b")
    for tau in (0.0, 0.7, 2.0, 4.5):
        assert pump_from_stokes(spec, tau) == pytest.approx(1.0, rel=1e-12)


def test_builtin_f_pulses():
    spec = builtin_family("f")
    tau = 0.4
    assert spec.stokes(tau) == pytest.approx(2 * math.exp(tau), rel=1e-15)
    expected = math.exp(tau) / math.cos(math.exp(tau) - 1)
    assert pump_from_stokes(spec, tau) == pytest.approx(expected, rel=1e-12)


def test_unknown_family():
    with pytest.raises(ValidationError):
        builtin_family("g")


@pytest.mark.parametrize("family_id, tau, expected", [
    ("a", math.pi / 2, math.pi / 4),
    ("b", 0.0, 0.0),
    ("b", 1.2, math.atan(math.sinh(1.2))),
    ("c", 0.5, math.asin(0.5)),
    ("d", 1.5, 1.5**2 / 4),
    ("e", 0.8, math.atan(math.sinh(0.64))),
    ("f", 0.3, math.exp(0.3) - 1),
])
def test_theta_examples(family_id, tau, expected):
    angle = theta_of_t(builtin_family(family_id), tau)
    assert angle.value == pytest.approx(expected, abs=1e-12)
    assert not angle.clipped


def test_theta_clipped_at_cap():
    angle = theta_of_t(builtin_family("a"), math.pi - 1e-6)
    assert angle.clipped and angle.value == DEFAULT_THETA_CAP


def test_theta_outside_window():
    with pytest.raises(ValidationError):
        theta_of_t(builtin_family("a"), 4.0)


@pytest.mark.parametrize("family_id", FAMILY_IDS)
def test_pump_at_start_is_half_stokes(family_id):
    spec = builtin_family(family_id)
    assert pump_from_stokes(spec, 0.0) == pytest.approx(0.5 * spec.stokes(0.0), abs=1e-15)


def test_family_a_pump_at_quarter_turn():
    assert pump_from_stokes(builtin_family("a"), math.pi / 2) == pytest.approx(1 / math.sqrt(2),
                                                                               rel=1e-12)


def test_pump_singularity_at_cap():
    spec = builtin_family("a")
    with pytest.raises(SingularityError):
        pump_from_stokes(spec, 2 * DEFAULT_THETA_CAP)


def test_family_a_grid_truncated_at_cap():
    sched = sample_schedule(builtin_family("a"), 101)
    assert sched.capped
    assert sched.tau[-1] == pytest.approx(math.pi - 2 * 5e-3, abs=1e-8)
    assert len(sched.tau) == 101


def test_family_b_window_to_six():
    # arctan(sinh 6) = pi/2 - 4.96e-3 sits just past the default cap
    capped = sample_schedule(builtin_family("b", t_max=6.0), 101)
    assert capped.capped
    assert capped.tau[-1] == pytest.approx(
        math.asinh(math.tan(DEFAULT_THETA_CAP - CAP_MARGIN)), abs=1e-8)
    spec = builtin_family("b", t_max=6.0, theta_cap=math.pi / 2 - 1e-3)
    sched = sample_schedule(spec, 101)
    assert not sched.capped
    assert sched.tau[-1] == 6.0
    assert sched.theta[-1] == pytest.approx(math.atan(math.sinh(6.0)), abs=1e-12)
    assert sched.theta[-1] < spec.theta_cap


def test_family_c_grid_ends_before_singularity():
    sched = sample_schedule(builtin_family("c"), 51)
    assert sched.tau[-1] < 1.0
    assert np.all(np.isfinite(sched.omega_p))


@pytest.mark.parametrize("family_id", FAMILY_IDS)
def test_schedule_invariants(family_id):
    sched = sample_schedule(builtin_family(family_id), 401)
    assert sched.theta[0] == 0.0
    assert np.all(np.diff(sched.theta) >= 0)
    assert np.all(sched.theta <= DEFAULT_THETA_CAP)
    matched = 0.5 * sched.omega_s / np.cos(sched.theta)
    np.testing.assert_allclose(sched.omega_p, matched, rtol=1e-10)


@pytest.mark.parametrize("family_id", FAMILY_IDS)
def test_quadrature_theta_matches_closed_form(family_id):
    fam = FAMILIES[family_id]
    spec = builtin_family(family_id)
    for tau in np.linspace(0, tau_at_cap(spec), 23):
        assert raw_theta(spec, tau) == pytest.approx(float(fam.theta(tau)), abs=1e-12)


@pytest.mark.parametrize("family_id", FAMILY_IDS)
def test_matching_rule_reproduces_table_pump(family_id):
    fam = FAMILIES[family_id]
    spec = builtin_family(family_id)
    dsl_spec = ProtocolSpec(fam.stokes_text, t_max=spec.t_max)
    for tau in np.linspace(0, 0.98 * tau_at_cap(spec), 17):
        expected = float(fam.pump(tau))
        for s in (spec, dsl_spec):
            got = pump_from_stokes(s, tau)
            assert got == pytest.approx(expected, rel=1e-10, abs=1e-15)


@pytest.mark.parametrize("family_id", FAMILY_IDS)
def test_dsl_schedule_matches_builtin(family_id):
    spec = builtin_family(family_id)
    dsl_spec = ProtocolSpec(dsl.parse(FAMILIES[family_id].stokes_text), t_max=spec.t_max)
    a, b = sample_schedule(spec, 201), sample_schedule(dsl_spec, 201)
    np.testing.assert_allclose(b.tau, a.tau, rtol=0, atol=1e-10)
    np.testing.assert_allclose(b.theta, a.theta, rtol=0, atol=1e-10)
    np.testing.assert_allclose(b.omega_s, a.omega_s, rtol=1e-10)
    np.testing.assert_allclose(b.omega_p, a.omega_p, rtol=1e-9)


def _dsl_schedule(family_id, nu, samples=64):
    fam = FAMILIES[family_id]
    return sample_schedule(ProtocolSpec(fam.stokes_text, nu=nu, t_max=fam.tau_end / nu), samples)


@pytest.mark.parametrize("family_id", FAMILY_IDS)
@pytest.mark.parametrize("k", [0.25, 2.0, 8.0])
def test_scale_covariance_exact_for_binary_factors(family_id, k):
    # t = tau / k is exact for powers of two, so the schedules agree bit for bit
    base, scaled = _dsl_schedule(family_id, 1.0), _dsl_schedule(family_id, k)
    np.testing.assert_array_equal(scaled.omega_s, base.omega_s)
    np.testing.assert_array_equal(scaled.theta, base.theta)
    np.testing.assert_allclose(scaled.tau, base.tau, rtol=1e-14)


def _condition(family_id, tau, h=1e-6):
    """|tau d ln(omega_s) / d tau|: how much the envelope amplifies rounding of tau."""
    fam = FAMILIES[family_id]
    tau = np.asarray(tau, dtype=float)
    up, down = np.log(fam.stokes(tau * (1 + h))), np.log(fam.stokes(tau * (1 - h)))
    with np.errstate(invalid="ignore"):
        return np.nan_to_num(np.abs((up - down) / (2 * h)))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(FAMILY_IDS), st.floats(0.25, 8.0))
def test_scale_covariance(family_id, k):
    fam = FAMILIES[family_id]
    base = ProtocolSpec(fam.stokes_text, t_max=fam.tau_end)
    scaled = ProtocolSpec(fam.stokes_text, nu=k, t_max=fam.tau_end / k)
    grid_a, grid_b = sample_schedule(base, 64), sample_schedule(scaled, 64)
    np.testing.assert_allclose(grid_b.tau, grid_a.tau, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(grid_b.t, grid_a.tau / k, rtol=1e-14)
    tau = grid_a.tau[1:]  # family d and e start from zero amplitude
    a, b = base.stokes(tau), scaled.stokes(tau)
    rel = np.abs(b - a) / np.abs(a)
    assert np.all(rel <= 1e-14 * np.maximum(1.0, _condition(family_id, tau)))
    for x in tau[::9]:
        assert raw_theta(scaled, x) == pytest.approx(raw_theta(base, x), abs=1e-14)


def test_end_tau_sits_just_inside_cap():
    spec = builtin_family("d")
    end = end_tau(spec)
    assert raw_theta(spec, end) == pytest.approx(DEFAULT_THETA_CAP - CAP_MARGIN, abs=1e-12)


def test_zero_duration_window_allowed():
    spec = builtin_family("a", t_max=0.0)
    assert end_tau(spec) == 0.0


@pytest.mark.parametrize("kwargs", [
    dict(nu=0.0), dict(nu=-1.0), dict(nu=math.inf), dict(t_max=-1.0),
    dict(theta_cap=0.0), dict(theta_cap=math.pi / 2), dict(eta=0.0), dict(eta=math.nan),
    dict(rtol=0.0), dict(samples=0), dict(threshold=1.5),
])
def test_spec_validation(kwargs):
    with pytest.raises(ValidationError):
        builtin_family("a", **kwargs)


def test_describe_echoes_defaults():
    echo = builtin_family("b").describe()
    assert echo["envelope"] == "b"
    assert echo["eta"] == 1.0
    assert echo["theta_cap"] == DEFAULT_THETA_CAP
    assert echo["rtol"] == 1e-10 and echo["atol"] == 1e-12
    assert echo["pump"] is None
    expr = ProtocolSpec("2*nu*sech(nu*t)", t_max=5.0).describe()
    assert dsl.parse(expr["envelope"]) == dsl.parse("2*nu*sech(nu*t)")
