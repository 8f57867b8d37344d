"""Dynamical invariant, its eigensystem and the tracked dressed state.

The invariant of the matched passage is

    I = sin^2(theta) K_x - sin(theta) cos(theta) K_y + cos(theta) K_z,

i.e. chi = (sin^2, -sin cos, cos).  It is the dressed-frame image
V (sin(theta) K_x + cos(theta) K_z) V^+ of the normalized reference
Hamiltonian, which generalizes to the eta-protocols by swapping the rotation
angle: chi = (sin(theta) cos(phi), -sin(theta) sin(phi), cos(theta)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .schedule import ProtocolSpec, raw_theta
from .stirsap import applied_pulses, dressed_angle, dressed_state_prime, rotation_angle

# a |1> coefficient smaller than this cannot fix the eigenvector phase
PHASE_PIVOT_TOL = 1e-9


@dataclass(frozen=True)
class InvariantFrame:
    theta: float
    phi: float

    @property
    def chi(self) -> np.ndarray:
        s = math.sin(self.theta)
        return np.array([s * math.cos(self.phi), -s * math.sin(self.phi), math.cos(self.theta)])

    def matrix(self) -> np.ndarray:
        return ops.from_components(self.chi)


def invariant_at(theta: float, phi: float | None = None) -> InvariantFrame:
    """Invariant at mixing angle ``theta``; ``phi`` defaults to pi/2 - theta."""
    return InvariantFrame(theta, rotation_angle(theta) if phi is None else phi)


def dressed_state(theta: float, phi: float | None = None) -> np.ndarray:
    """Zero-eigenvalue eigenvector e0 = cos|1> - i sin cos|2> - sin^2|3> (for eta = 1)."""
    return dressed_state_prime(theta, rotation_angle(theta) if phi is None else phi)


@dataclass(frozen=True)
class Eigensystem:
    values: np.ndarray  # (0, +1, -1)
    vectors: np.ndarray  # columns e0, e+, e-

    @property
    def e0(self) -> np.ndarray:
        return self.vectors[:, 0]


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """First coefficient above the pivot tolerance made real positive."""
    pivot = int(np.argmax(np.abs(v) > PHASE_PIVOT_TOL))
    return v * (abs(v[pivot]) / v[pivot])


def _diagonalize(frame: InvariantFrame) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(frame.matrix())
    order = [int(np.argmin(np.abs(w))), int(np.argmax(w)), int(np.argmin(w))]
    return w[order], v[:, order]


def eigensystem_of(frame: InvariantFrame) -> Eigensystem:
    """Numerical eigensystem with each |1> coefficient real and non-negative.

    Where the |1> coefficient vanishes (theta = pi/2 for e0) the phase is
    continued from a slightly smaller theta, so e0 stays equal to its closed
    form (-|3> at theta = pi/2) instead of jumping sign.
    """
    w, v = _diagonalize(frame)
    vectors = np.empty_like(v)
    for k in range(3):
        col = v[:, k]
        if abs(col[0]) > PHASE_PIVOT_TOL:
            vectors[:, k] = col * (abs(col[0]) / col[0])
            continue
        near = InvariantFrame(frame.theta - 1e-4, frame.phi)
        ref = _diagonalize(near)[1][:, k]
        if abs(ref[0]) > PHASE_PIVOT_TOL:
            ref = ref * (abs(ref[0]) / ref[0])
            overlap = np.vdot(ref, col)
            vectors[:, k] = col * (abs(overlap) / overlap)
        else:
            vectors[:, k] = _fix_phase(col)
    return Eigensystem(w, vectors)


def component_rhs(chi, omega_p: float, omega_s: float) -> np.ndarray:
    """Right-hand side of the component equations of dI/dt = -i[H, I]."""
    c1, c2, c3 = chi
    return np.array([-omega_s * c2, omega_s * c1 - omega_p * c3, omega_p * c2])


def chi_rate(theta: float, theta_dot: float, phi: float, phi_dot: float) -> np.ndarray:
    """Analytic d chi / dt through theta(t) and phi(t)."""
    s, c = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    return theta_dot * np.array([c * cp, -c * sp, -s]) + phi_dot * np.array([-s * sp, -s * cp, 0.0])


def _angles(spec: ProtocolSpec, tau: float, theta: float | None):
    theta = raw_theta(spec, tau) if theta is None else theta
    drive = applied_pulses(spec, tau, theta)
    phi, phi_dot = dressed_angle(spec, tau, theta, drive.theta_dot)
    return theta, drive, float(phi), float(phi_dot)


def invariant_residual(spec: ProtocolSpec, tau: float, theta: float | None = None) -> float:
    """Frobenius norm of dI/dt + i[H, I] with dI/dt from the analytic chi rate."""
    theta, drive, phi, phi_dot = _angles(spec, tau, theta)
    frame = InvariantFrame(theta, phi)
    inv = frame.matrix()
    d_inv = ops.from_components(chi_rate(theta, drive.theta_dot, phi, phi_dot))
    h = ops.hamiltonian(drive.omega_p, drive.omega_s)
    return float(np.linalg.norm(d_inv + 1j * ops.commutator(h, inv)))


def lr_phase_rate(spec: ProtocolSpec, tau: float, theta: float | None = None) -> float:
    """<e0| i d/dt - H |e0>, the Lewis-Riesenfeld phase rate of the tracked state."""
    theta, drive, phi, phi_dot = _angles(spec, tau, theta)
    s, c = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    e = dressed_state_prime(theta, phi)
    de = drive.theta_dot * np.array([-s, -1j * c * sp, -c * cp]) \
        + phi_dot * np.array([0.0, -1j * s * cp, s * sp])
    h = ops.hamiltonian(drive.omega_p, drive.omega_s)
    return float(np.real(np.vdot(e, 1j * de) - np.vdot(e, h @ e)))


def tracked_state(spec: ProtocolSpec, tau: float, theta: float) -> np.ndarray:
    """The dressed state a run of ``spec`` from |1> should follow."""
    _, _, phi, _ = _angles(spec, tau, theta)
    return dressed_state_prime(theta, phi)


def fidelity_to_e0(spec: ProtocolSpec, trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Per-row |<e0|psi>|^2 and the phase-sensitive distance ||psi - e0||."""
    fid = np.empty(len(trajectory.tau))
    dist = np.empty(len(trajectory.tau))
    for k, (tau, theta, psi) in enumerate(zip(trajectory.tau, trajectory.theta,
                                              trajectory.states)):
        e = tracked_state(spec, tau, theta)
        fid[k] = abs(np.vdot(e, psi)) ** 2
        dist[k] = np.linalg.norm(psi - e)
    return fid, dist
