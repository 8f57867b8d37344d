"""Shortcut-to-adiabaticity view of the matched passage and the eta-protocols.

The matched Hamiltonian H = omega_p K_x + omega_s K_z is the dressed-frame
image of H_corr = eta H_0 + H_cd under V = exp(i phi K_z), where

    H_0  = (omega_s / 2) (tan(theta) K_x + K_z)
    H_cd = theta_dot K_y,          theta_dot = omega_s / 2
    phi  = arctan(cot(theta) / eta)

With eta = 1 this is phi = pi/2 - theta and V H_corr V^+ - phi_dot K_z
reproduces H exactly.  Other eta values give the modified executable pulses
omega_p' = (omega_s/2) sqrt(1 + eta^2 tan^2 theta) and
omega_s' = eta omega_s / 2 - phi_dot'.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import operators as ops
from .errors import SingularityError, ValidationError
from .schedule import ProtocolSpec, matched_pump, raw_theta, sample_schedule

ETA_FD_STEP = 1e-6


class Drive(NamedTuple):
    """Pulses actually applied at one instant, plus the mixing-angle rate."""

    omega_p: float
    omega_s: float
    theta_dot: float


def rotation_angle(theta):
    """Dressed rotation angle of the matched protocol (eta = 1)."""
    return np.pi / 2 - theta


def phi_prime(theta, eta):
    """arctan(cot(theta) / eta); pi/2 * sign(eta) at theta = 0."""
    with np.errstate(divide="ignore", over="ignore"):
        return np.arctan(np.cos(theta) / (eta * np.sin(theta)))


def phi_prime_rate(theta, theta_dot, eta, eta_dot=0.0):
    """Time derivative of phi_prime by the chain rule through theta and eta."""
    s, c = np.sin(theta), np.cos(theta)
    return -(eta * theta_dot + s * c * eta_dot) / (eta**2 * s**2 + c**2)


def eta_rate(spec: ProtocolSpec, tau):
    """d eta / d tau; zero for constant eta, Richardson-extrapolated central difference otherwise."""
    if isinstance(spec.eta, (int, float)):
        return 0.0 * np.asarray(tau, dtype=float) if np.ndim(tau) else 0.0
    h = ETA_FD_STEP
    def central(step):
        return (spec.eta_at(tau + step) - spec.eta_at(tau - step)) / (2 * step)
    return (4 * central(h / 2) - central(h)) / 3


def eta_pulses(theta, omega_s, eta, eta_dot=0.0):
    """Executable (omega_p', omega_s') for the eta-scaled reference Hamiltonian.

    For negative eta, phi' lies in (-pi/2, 0) and the pump carries the sign of eta.
    """
    theta_dot = 0.5 * omega_s
    omega_p = 0.5 * np.sign(eta) * omega_s * np.sqrt(1 + eta**2 * np.tan(theta) ** 2)
    omega_s_new = 0.5 * eta * omega_s - phi_prime_rate(theta, theta_dot, eta, eta_dot)
    return omega_p, omega_s_new


def applied_pulses(spec: ProtocolSpec, tau, theta) -> Drive:
    """The (omega_p, omega_s) the system sees: explicit pump, matched, or eta-modified."""
    omega_s = spec.stokes(tau)
    theta_dot = 0.5 * omega_s
    if spec.pump is not None:
        return Drive(spec.explicit_pump(tau), omega_s, theta_dot)
    if not spec.has_eta:
        return Drive(matched_pump(omega_s, theta), omega_s, theta_dot)
    omega_p, omega_s_new = eta_pulses(theta, omega_s, spec.eta_at(tau), eta_rate(spec, tau))
    return Drive(omega_p, omega_s_new, theta_dot)


def dressed_angle(spec: ProtocolSpec, tau, theta, theta_dot):
    """(phi, phi_dot) of the dressed-state rotation tracked by ``spec``."""
    if spec.pump is None and spec.has_eta:
        eta = spec.eta_at(tau)
        return phi_prime(theta, eta), phi_prime_rate(theta, theta_dot, eta, eta_rate(spec, tau))
    return rotation_angle(theta), -theta_dot


def dressed_state_prime(theta: float, phi: float) -> np.ndarray:
    """cos(theta)|1> - i sin(theta) sin(phi)|2> - sin(theta) cos(phi)|3>."""
    s = math.sin(theta)
    return np.array([math.cos(theta), -1j * s * math.sin(phi), -s * math.cos(phi)])


def _theta(spec, tau, theta):
    theta = raw_theta(spec, tau) if theta is None else theta
    if theta >= spec.theta_cap:
        raise SingularityError(f"theta = {theta!r} reached the cap at tau = {tau!r}")
    return theta


def reconstruct_h0(spec: ProtocolSpec, tau: float, theta: float | None = None):
    """Adiabatic reference pulses (omega_p0, omega_s0) = (omega_s/2 tan theta, omega_s/2)."""
    theta = _theta(spec, tau, theta)
    half = 0.5 * spec.stokes(tau)
    return half * math.tan(theta), half


def counterdiabatic_term(spec: ProtocolSpec, tau: float) -> float:
    """Strength theta_dot = omega_s / 2 of the |1>-|3> coupling the protocol avoids."""
    return 0.5 * spec.stokes(tau)


def verify_decomposition(spec: ProtocolSpec, tau: float, theta: float | None = None,
                         phi_offset: float = 0.0) -> float:
    """Frobenius distance between V H_corr V^+ - i V dV^+/dt and the applied H.

    ``phi_offset`` perturbs the rotation angle; any nonzero value should break
    the identity.
    """
    theta = _theta(spec, tau, theta)
    omega_s = spec.stokes(tau)
    theta_dot = 0.5 * omega_s
    eta = 1.0 if spec.pump is not None else spec.eta_at(tau)
    omega_p0, omega_s0 = 0.5 * omega_s * math.tan(theta), 0.5 * omega_s
    h_corr = eta * (omega_p0 * ops.KX + omega_s0 * ops.KZ) + theta_dot * ops.KY
    phi, phi_dot = dressed_angle(spec, tau, theta, theta_dot)
    phi = phi + phi_offset
    v = ops.expi(-phi * ops.KZ)  # exp(+i phi K_z)
    h_dressed = v @ h_corr @ v.conj().T - phi_dot * ops.KZ
    drive = applied_pulses(spec, tau, theta)
    return float(np.linalg.norm(h_dressed - ops.hamiltonian(drive.omega_p, drive.omega_s)))


@dataclass(frozen=True)
class StirsapDecomposition:
    tau: np.ndarray
    theta: np.ndarray
    omega_p0: np.ndarray
    omega_s0: np.ndarray
    h_cd_strength: np.ndarray
    phi: np.ndarray


def decompose(spec: ProtocolSpec, samples: int | None = None) -> StirsapDecomposition:
    """Reference pulses, counterdiabatic strength and rotation angle on the schedule grid."""
    sched = sample_schedule(spec, samples)
    half = 0.5 * sched.omega_s
    return StirsapDecomposition(sched.tau, sched.theta, half * np.tan(sched.theta), half,
                                half, rotation_angle(sched.theta))


@dataclass(frozen=True)
class EtaProtocol:
    """eta-scaled protocol: modified rotation angle and executable pulse pair."""

    spec: ProtocolSpec
    clamp: float | None = None
    stokes_sign_changes: int = 0

    @property
    def eta(self):
        return self.spec.eta

    def phi_prime(self, tau, theta=None):
        theta = raw_theta(self.spec, tau) if theta is None else theta
        return phi_prime(theta, self.spec.eta_at(tau))

    def pulses(self, tau, theta=None):
        """(omega_p', omega_s') at ``tau``; clipped to +-clamp when a clamp is set."""
        theta = raw_theta(self.spec, tau) if theta is None else theta
        drive = applied_pulses(self.spec, tau, theta)
        omega_p, omega_s = drive.omega_p, drive.omega_s
        if self.clamp is not None:
            clipped_p = np.clip(omega_p, -self.clamp, self.clamp)
            clipped_s = np.clip(omega_s, -self.clamp, self.clamp)
            if np.any(clipped_p != omega_p) or np.any(clipped_s != omega_s):
                warnings.warn(f"eta-protocol pulses clamped to +-{self.clamp!r}; "
                              "dressed-state tracking no longer exact", stacklevel=2)
            omega_p, omega_s = clipped_p, clipped_s
        return omega_p, omega_s

    def sample(self, samples: int | None = None) -> dict:
        sched = sample_schedule(self.spec, samples)
        omega_p, omega_s = self.pulses(sched.tau, sched.theta)
        return {"tau": sched.tau, "theta": sched.theta,
                "phi_prime": phi_prime(sched.theta, self.spec.eta_at(sched.tau)),
                "omega_p": omega_p, "omega_s": omega_s}


def build_eta_protocol(spec: ProtocolSpec, eta=None, clamp: float | None = None,
                       check_samples: int = 2001) -> EtaProtocol:
    """Attach ``eta`` (number or parsed expression) to ``spec`` and check it.

    A zero crossing of eta(t) is a hard error.  Sign changes of the modified
    Stokes pulse are counted and reported through a warning.
    """
    if eta is not None:
        spec = spec.replace(eta=eta)
    if spec.pump is not None:
        raise ValidationError("eta-protocols need matched pulses; remove the explicit pump")
    sched = sample_schedule(spec, check_samples)
    eta_values = spec.eta_at(sched.tau)
    if np.any(eta_values == 0) or np.any(np.sign(eta_values) != np.sign(eta_values[0])):
        raise ValidationError("eta(t) must not vanish on the protocol window")
    _, omega_s = eta_pulses(sched.theta, sched.omega_s, eta_values, eta_rate(spec, sched.tau))
    signs = np.sign(omega_s[np.abs(omega_s) > 1e-14])
    changes = int(np.count_nonzero(np.diff(signs)))
    if changes:
        warnings.warn(f"modified Stokes pulse changes sign {changes} time(s)", stacklevel=2)
    return EtaProtocol(spec, clamp, changes)
