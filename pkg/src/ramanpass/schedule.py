"""Matched pump/Stokes schedules.

All internal times are dimensionless, tau = nu * t, and all Rabi frequencies
are in units of nu.  ``nu`` only enters when a DSL expression (written in
physical ``t`` and ``nu``) is evaluated.

The pump is never stored: it always follows from the Stokes envelope through
the matching rule ``omega_p = omega_s / (2 cos theta)``, with
``theta(tau) = 1/2 * integral(omega_s)`` from ``tau0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, optimize

from . import dsl
from .errors import DSLError, EvalDomainError, SingularityError, ValidationError

DEFAULT_THETA_CAP = math.pi / 2 - 5e-3
# capped schedules stop this far below the cap so the endpoint is still valid
CAP_MARGIN = 1e-9
QUAD_TOL = 1e-13


def _sech(x):
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) > 700.0, 0.0, 1.0 / np.cosh(np.minimum(np.abs(x), 700.0)))


@dataclass(frozen=True)
class Family:
    """One row of the built-in table: closed forms in dimensionless time."""

    id: str
    stokes: Callable
    pump: Callable
    theta: Callable
    population: Callable
    omega_s0: Callable
    omega_p0: Callable
    tau_end: float  # theta reaches pi/2 here, or far enough past the cap
    reported_duration: float  # nu * t_fc at P3 = 0.9999, as tabulated
    stokes_text: str
    pump_text: str
    population_text: str
    omega_s0_text: str
    omega_p0_text: str


FAMILIES: dict[str, Family] = {
    f.id: f
    for f in [
        Family(
            "a",
            stokes=lambda x: np.ones_like(np.asarray(x, dtype=float)),
            pump=lambda x: 0.5 / np.cos(x / 2),
            theta=lambda x: np.asarray(x, dtype=float) / 2,
            population=lambda x: np.sin(x / 2) ** 4,
            omega_s0=lambda x: np.full_like(np.asarray(x, dtype=float), 0.5),
            omega_p0=lambda x: 0.5 * np.tan(x / 2),
            tau_end=math.pi,
            reported_duration=math.pi,
            stokes_text="nu",
            pump_text="nu/2*sec(nu*t/2)",
            population_text="sin(nu*t/2)^4",
            omega_s0_text="nu/2",
            omega_p0_text="nu/2*tan(nu*t/2)",
        ),
        Family(
            "b",
            stokes=lambda x: 2 * _sech(x),
            pump=lambda x: np.ones_like(np.asarray(x, dtype=float)),
            theta=lambda x: np.arctan(np.sinh(x)),
            population=lambda x: np.tanh(x) ** 4,
            omega_s0=lambda x: _sech(x),
            omega_p0=lambda x: np.tanh(x),
            tau_end=10.0,
            reported_duration=1.80 * math.pi,
            stokes_text="2*nu*sech(nu*t)",
            pump_text="nu",
            population_text="tanh(nu*t)^4",
            omega_s0_text="nu*sech(nu*t)",
            omega_p0_text="nu*tanh(nu*t)",
        ),
        Family(
            "c",
            stokes=lambda x: 2 / np.sqrt(1 - x**2),
            pump=lambda x: 1 / (1 - x**2),
            theta=lambda x: np.arcsin(x),
            population=lambda x: np.asarray(x, dtype=float) ** 4,
            omega_s0=lambda x: 1 / np.sqrt(1 - x**2),
            omega_p0=lambda x: x / (1 - x**2),
            tau_end=1.0,
            reported_duration=1.0,
            stokes_text="2*nu/sqrt(1-nu^2*t^2)",
            pump_text="nu/(1-nu^2*t^2)",
            population_text="nu^4*t^4",
            omega_s0_text="nu/sqrt(1-nu^2*t^2)",
            omega_p0_text="nu^2*t/(1-nu^2*t^2)",
        ),
        Family(
            "d",
            stokes=lambda x: np.asarray(x, dtype=float) * 1.0,
            pump=lambda x: x / 2 / np.cos(x**2 / 4),
            theta=lambda x: np.asarray(x, dtype=float) ** 2 / 4,
            population=lambda x: np.sin(x**2 / 4) ** 4,
            omega_s0=lambda x: np.asarray(x, dtype=float) / 2,
            omega_p0=lambda x: x / 2 * np.tan(x**2 / 4),
            tau_end=math.sqrt(2 * math.pi),
            reported_duration=0.80 * math.pi,
            stokes_text="nu^2*t",
            pump_text="nu^2*t/2*sec(nu^2*t^2/4)",
            population_text="sin(nu^2*t^2/4)^4",
            omega_s0_text="nu^2*t/2",
            omega_p0_text="nu^2*t/2*tan(nu^2*t^2/4)",
        ),
        Family(
            "e",
            stokes=lambda x: 4 * x * _sech(x**2),
            pump=lambda x: 2 * np.asarray(x, dtype=float),
            theta=lambda x: np.arctan(np.sinh(x**2)),
            population=lambda x: np.tanh(x**2) ** 4,
            omega_s0=lambda x: 2 * x * _sech(x**2),
            omega_p0=lambda x: 2 * x * np.tanh(x**2),
            tau_end=3.5,
            reported_duration=0.76 * math.pi,
            stokes_text="4*nu^2*t*sech(nu^2*t^2)",
            pump_text="2*nu^2*t",
            population_text="tanh(nu^2*t^2)^4",
            omega_s0_text="2*nu^2*t*sech(nu^2*t^2)",
            omega_p0_text="2*nu^2*t*tanh(nu^2*t^2)",
        ),
        Family(
            "f",
            stokes=lambda x: 2 * np.exp(x),
            pump=lambda x: np.exp(x) / np.cos(np.exp(x) - 1),
            theta=lambda x: np.exp(x) - 1,
            population=lambda x: np.sin(np.exp(x) - 1) ** 4,
            omega_s0=lambda x: np.exp(x),
            omega_p0=lambda x: np.exp(x) * np.tan(np.exp(x) - 1),
            tau_end=math.log1p(math.pi / 2),
            reported_duration=0.30 * math.pi,
            stokes_text="2*nu*exp(nu*t)",
            pump_text="nu*exp(nu*t)*sec(exp(nu*t)-1)",
            population_text="sin(exp(nu*t)-1)^4",
            omega_s0_text="nu*exp(nu*t)",
            omega_p0_text="nu*exp(nu*t)*tan(exp(nu*t)-1)",
        ),
    ]
}


def _parse_field(key: str, text: str) -> dsl.Expr:
    try:
        return dsl.parse(text)
    except DSLError as exc:
        raise ValidationError(f"{key}: {exc}") from None


@dataclass(frozen=True)
class ProtocolSpec:
    """A pulse protocol: Stokes envelope plus run parameters.

    ``envelope`` is a built-in family id or a Stokes expression in (t, nu),
    given as source text or a parsed tree; ``eta`` and ``pump`` accept text too.  ``t0``/``t_max`` are physical times; everything downstream uses
    ``tau0``/``tau_max``.  ``pump`` overrides the matching rule and exists
    for negative controls (unmatched pulses).
    """

    envelope: str | dsl.Expr
    nu: float = 1.0
    t0: float = 0.0
    t_max: float = 1.0
    eta: float | dsl.Expr = 1.0
    theta_cap: float = DEFAULT_THETA_CAP
    rtol: float = 1e-10
    atol: float = 1e-12
    samples: int = 401
    threshold: float = 0.9999
    pump: dsl.Expr | None = None
    name: str = ""

    def __post_init__(self):
        if isinstance(self.envelope, str) and self.envelope not in FAMILIES:
            object.__setattr__(self, "envelope", _parse_field("envelope", self.envelope))
        for key in ("eta", "pump"):
            if isinstance(getattr(self, key), str):
                object.__setattr__(self, key, _parse_field(key, getattr(self, key)))
        for key in ("nu", "t0", "t_max", "theta_cap", "rtol", "atol", "threshold"):
            value = getattr(self, key)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"{key} must be a finite number, got {value!r}")
        if self.nu <= 0:
            raise ValidationError(f"nu must be positive, got {self.nu!r}")
        if self.t_max < self.t0:
            raise ValidationError(f"t_max ({self.t_max!r}) must not precede t0 ({self.t0!r})")
        if not 0 < self.theta_cap < math.pi / 2:
            raise ValidationError(f"theta_cap must lie in (0, pi/2), got {self.theta_cap!r}")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValidationError("integrator tolerances must be positive")
        if not 0 < self.threshold <= 1:
            raise ValidationError(f"threshold must lie in (0, 1], got {self.threshold!r}")
        if not isinstance(self.samples, int) or self.samples < 1:
            raise ValidationError(f"samples must be a positive integer, got {self.samples!r}")
        if isinstance(self.eta, (int, float)):
            if not math.isfinite(self.eta) or self.eta == 0:
                raise ValidationError(f"eta must be finite and nonzero, got {self.eta!r}")

    @property
    def tau0(self) -> float:
        return self.nu * self.t0

    @property
    def tau_max(self) -> float:
        return self.nu * self.t_max

    @property
    def family(self) -> Family | None:
        return FAMILIES.get(self.envelope) if isinstance(self.envelope, str) else None

    @property
    def has_eta(self) -> bool:
        return not (isinstance(self.eta, (int, float)) and self.eta == 1)

    def stokes(self, tau):
        """Stokes Rabi frequency in units of nu (scalar or array)."""
        if isinstance(self.envelope, str):
            fn = FAMILIES[self.envelope].stokes
            if np.ndim(tau):
                return np.asarray(fn(np.asarray(tau, dtype=float)), dtype=float)
            return float(fn(float(tau)))
        if np.ndim(tau):
            return dsl.eval_array(self.envelope, np.asarray(tau) / self.nu, self.nu) / self.nu
        return dsl.eval_expr(self.envelope, tau / self.nu, self.nu) / self.nu

    def eta_at(self, tau):
        if isinstance(self.eta, (int, float)):
            return np.full_like(np.asarray(tau, dtype=float), float(self.eta)) \
                if np.ndim(tau) else float(self.eta)
        if np.ndim(tau):
            return dsl.eval_array(self.eta, np.asarray(tau) / self.nu, self.nu)
        return dsl.eval_expr(self.eta, tau / self.nu, self.nu)

    def explicit_pump(self, tau):
        if np.ndim(tau):
            return dsl.eval_array(self.pump, np.asarray(tau) / self.nu, self.nu) / self.nu
        return dsl.eval_expr(self.pump, tau / self.nu, self.nu) / self.nu

    def describe(self) -> dict:
        """JSON-ready echo of every field, defaults included."""
        def text(value):
            return dsl.to_source(value) if not isinstance(value, (str, int, float, type(None))) \
                else value
        return {
            "name": self.name,
            "envelope": text(self.envelope),
            "nu": self.nu,
            "t0": self.t0,
            "t_max": self.t_max,
            "eta": text(self.eta),
            "theta_cap": self.theta_cap,
            "rtol": self.rtol,
            "atol": self.atol,
            "samples": self.samples,
            "threshold": self.threshold,
            "pump": text(self.pump),
        }

    def replace(self, **changes) -> "ProtocolSpec":
        fields = {k: getattr(self, k) for k in (
            "envelope", "nu", "t0", "t_max", "eta", "theta_cap", "rtol", "atol",
            "samples", "threshold", "pump", "name")}
        fields.update(changes)
        return ProtocolSpec(**fields)


def builtin_family(family_id: str, nu: float = 1.0, **overrides) -> ProtocolSpec:
    """Spec for one of the tabulated families, spanning its full natural window."""
    if family_id not in FAMILIES:
        raise ValidationError(f"unknown family {family_id!r}; expected one of a-f")
    if not (isinstance(nu, (int, float)) and math.isfinite(nu) and nu > 0):
        raise ValidationError(f"nu must be positive, got {nu!r}")
    params = dict(envelope=family_id, nu=nu, t0=0.0, t_max=FAMILIES[family_id].tau_end / nu,
                  name=f"family-{family_id}")
    params.update(overrides)
    return ProtocolSpec(**params)


class MixingAngle(NamedTuple):
    value: float
    clipped: bool


def _half_integral(spec: ProtocolSpec, a: float, b: float) -> float:
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, _ = integrate.quad(spec.stokes, a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL,
                                  limit=400)
    return 0.5 * value


def raw_theta(spec: ProtocolSpec, tau: float) -> float:
    """Unclipped mixing angle by adaptive quadrature."""
    return _half_integral(spec, spec.tau0, float(tau))


def theta_of_t(spec: ProtocolSpec, tau: float) -> MixingAngle:
    if not spec.tau0 <= tau <= max(spec.tau_max, spec.tau0):
        raise ValidationError(f"tau = {tau!r} outside [{spec.tau0!r}, {spec.tau_max!r}]")
    theta = raw_theta(spec, tau)
    if theta > spec.theta_cap:
        return MixingAngle(spec.theta_cap, True)
    return MixingAngle(theta, False)


def matched_pump(omega_s, theta):
    """The matching rule omega_p = omega_s sec(theta) / 2, unchecked."""
    return 0.5 * omega_s / np.cos(theta)


def pump_from_stokes(spec: ProtocolSpec, tau: float, theta: float | None = None) -> float:
    if theta is None:
        theta = raw_theta(spec, tau)
    if theta >= spec.theta_cap:
        raise SingularityError(
            f"theta = {theta!r} reached the cap {spec.theta_cap!r} at tau = {tau!r}")
    return float(matched_pump(spec.stokes(tau), theta))


def _last_valid_tau(spec: ProtocolSpec) -> tuple[float, float]:
    """Largest tau <= tau_max where theta can be evaluated, with theta there."""
    lo, hi = spec.tau0, spec.tau_max
    try:
        return hi, raw_theta(spec, hi)
    except EvalDomainError:
        pass
    for k in range(40, 0, -1):
        candidate = hi - (hi - lo) * 2.0**-k
        try:
            return candidate, raw_theta(spec, candidate)
        except EvalDomainError:
            continue
    raise EvalDomainError(f"envelope cannot be integrated on [{lo!r}, {hi!r}]")


def tau_at_cap(spec: ProtocolSpec) -> float | None:
    """First tau where theta reaches the cap, or None if it never does."""
    target = spec.theta_cap - CAP_MARGIN
    hi, theta_hi = _last_valid_tau(spec)
    if theta_hi < target:
        return None
    return optimize.brentq(lambda x: raw_theta(spec, x) - target, spec.tau0, hi,
                           xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def end_tau(spec: ProtocolSpec) -> float:
    """End of the usable window: tau_max, or earlier where the cap is hit."""
    cap = tau_at_cap(spec)
    return spec.tau_max if cap is None else cap


@dataclass(frozen=True)
class SampledSchedule:
    tau: np.ndarray
    omega_p: np.ndarray
    omega_s: np.ndarray
    theta: np.ndarray
    capped: bool
    nu: float

    @property
    def t(self) -> np.ndarray:
        return self.tau / self.nu


def cumulative_theta(spec: ProtocolSpec, tau: np.ndarray) -> np.ndarray:
    """theta on an increasing grid starting at tau0, interval by interval."""
    steps = [_half_integral(spec, a, b) for a, b in zip(tau[:-1], tau[1:])]
    return np.concatenate([[0.0], np.cumsum(steps)])


def sample_schedule(spec: ProtocolSpec, samples: int | None = None) -> SampledSchedule:
    n = spec.samples if samples is None else samples
    cap = tau_at_cap(spec)
    stop = spec.tau_max if cap is None else cap
    tau = np.linspace(spec.tau0, stop, n) if n > 1 else np.array([spec.tau0])
    theta = np.minimum(cumulative_theta(spec, tau), spec.theta_cap)
    omega_s = spec.stokes(tau)
    if spec.pump is not None:
        omega_p = spec.explicit_pump(tau)
    else:
        omega_p = matched_pump(omega_s, theta)
    return SampledSchedule(tau, np.asarray(omega_p, dtype=float), omega_s, theta,
                           cap is not None, spec.nu)
