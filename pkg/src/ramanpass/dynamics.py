"""Time evolution under H = omega_p K_x + omega_s K_z.

The integrated system is real and 7-dimensional: Re(c), Im(c) and the mixing
angle theta, so the matched pump sec(theta) is driven by the same error
control as the amplitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import DOP853, OdeSolution

from . import operators as ops
from .errors import IntegrationError, ValidationError
from .invariant import invariant_residual, tracked_state
from .schedule import ProtocolSpec, end_tau, raw_theta
from .stirsap import applied_pulses

REFERENCE_CHUNK = 1 << 15
_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)
_MAGNUS_NODES = (0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6)


@dataclass(frozen=True)
class HamiltonianFrame:
    omega_p: float
    omega_s: float

    def matrix(self) -> np.ndarray:
        return ops.hamiltonian(self.omega_p, self.omega_s)


def hamiltonian_at(spec: ProtocolSpec, tau: float, theta: float | None = None) -> HamiltonianFrame:
    theta = raw_theta(spec, tau) if theta is None else theta
    drive = applied_pulses(spec, tau, theta)
    return HamiltonianFrame(float(drive.omega_p), float(drive.omega_s))


def populations(state) -> np.ndarray:
    """|c_k|^2 along the last axis."""
    return np.abs(np.asarray(state)) ** 2


def _rhs(spec: ProtocolSpec):
    def f(tau, y):
        p, s, theta_dot = applied_pulses(spec, tau, y[6])
        x0, x1, x2, y0, y1, y2 = y[:6]
        # d(x + iy)/dt = -iH(x + iy)  =>  dx = H y, dy = -H x
        return np.array([
            p * y1, p * y0 + s * y2, s * y1,
            -p * x1, -(p * x0 + s * x2), -s * x1,
            theta_dot,
        ])
    return f


def _pack(psi, theta) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.concatenate([psi.real, psi.imag, [theta]])


def _unpack(y):
    y = np.asarray(y)
    return y[..., :3] + 1j * y[..., 3:6], y[..., 6]


def _integrate(spec: ProtocolSpec, y0, tau_start: float, tau_end: float) -> OdeSolution:
    solver = DOP853(_rhs(spec), tau_start, y0, tau_end, rtol=spec.rtol, atol=spec.atol)
    ts, interpolants = [tau_start], []
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"integrator failed: {message}", solver.t)
        ts.append(solver.t)
        interpolants.append(solver.dense_output())
    return OdeSolution(ts, interpolants)


def evolve_state(spec: ProtocolSpec, psi, tau_start: float, tau_end: float,
                 theta_start: float | None = None):
    """Propagate one state from ``tau_start`` to ``tau_end`` (either direction).

    Returns ``(psi, theta)`` at ``tau_end``.
    """
    if theta_start is None:
        theta_start = raw_theta(spec, tau_start)
    if tau_end == tau_start:
        return np.asarray(psi, dtype=complex), theta_start
    sol = _integrate(spec, _pack(psi, theta_start), tau_start, tau_end)
    return _unpack(sol(tau_end))


@dataclass
class TrajectoryRecord:
    spec: ProtocolSpec
    tau: np.ndarray
    states: np.ndarray  # (n, 3) complex
    theta: np.ndarray
    omega_p: np.ndarray
    omega_s: np.ndarray
    invariant_residual: np.ndarray
    fidelity: np.ndarray
    distance: np.ndarray
    phase: np.ndarray
    norm_drift: float
    solution: OdeSolution | None = field(default=None, repr=False, compare=False)

    @property
    def populations(self) -> np.ndarray:
        return populations(self.states)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def state_at(self, tau: float):
        """Dense-output ``(psi, theta)`` anywhere inside the integrated window."""
        if self.solution is None:
            return self.states[0], self.theta[0]
        return _unpack(self.solution(tau))


def evolve(spec: ProtocolSpec, initial=None, tau_end: float | None = None,
           samples: int | None = None) -> TrajectoryRecord:
    """Integrate from ``spec.tau0`` (starting in ``initial``, default |1>) to ``tau_end``.

    ``tau_end`` defaults to the end of the usable window (the cap, or tau_max).
    Rows are reported on a uniform grid of ``samples`` points by dense output.
    The norm is never renormalized; its largest deviation is ``norm_drift``.
    """
    psi0 = ops.basis(1) if initial is None else np.asarray(initial, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-9:
        raise ValidationError("initial state must be normalized")
    tau0 = spec.tau0
    tau_end = end_tau(spec) if tau_end is None else float(tau_end)
    if tau_end < tau0:
        raise ValidationError(f"tau_end = {tau_end!r} precedes tau0 = {tau0!r}")
    n = spec.samples if samples is None else samples
    if tau_end == tau0 or n == 1:
        grid = np.array([tau0])
    else:
        grid = np.linspace(tau0, tau_end, n)

    if tau_end > tau0:
        solution = _integrate(spec, _pack(psi0, 0.0), tau0, tau_end)
        states, theta = _unpack(solution(grid).T)
        states[0], theta[0] = psi0, 0.0
    else:
        solution = None
        states, theta = psi0[None, :].copy(), np.zeros(1)
    return _record(spec, grid, states, theta, solution)


def _record(spec, grid, states, theta, solution) -> TrajectoryRecord:
    drive = applied_pulses(spec, grid, theta)
    omega_p = np.broadcast_to(np.asarray(drive.omega_p, dtype=float), grid.shape).copy()
    omega_s = np.broadcast_to(np.asarray(drive.omega_s, dtype=float), grid.shape).copy()
    residual = np.array([invariant_residual(spec, t, th) for t, th in zip(grid, theta)])
    tracked = np.array([tracked_state(spec, t, th) for t, th in zip(grid, theta)])
    overlap = np.einsum("ij,ij->i", tracked.conj(), states)
    norms = np.linalg.norm(states, axis=1)
    return TrajectoryRecord(
        spec=spec, tau=grid, states=states, theta=theta, omega_p=omega_p, omega_s=omega_s,
        invariant_residual=residual, fidelity=np.abs(overlap) ** 2,
        distance=np.linalg.norm(states - tracked, axis=1), phase=np.angle(overlap),
        norm_drift=float(np.max(np.abs(norms - 1))), solution=solution,
    )


# --- fixed-step reference -------------------------------------------------------


def _gl_integral(spec: ProtocolSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """5-point Gauss-Legendre integral of the Stokes envelope over each [a, b]."""
    mid, half = (a + b) / 2, (b - a) / 2
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    return half * (spec.stokes(nodes) @ _GL_W)


def _hamiltonians(spec: ProtocolSpec, tau: np.ndarray, theta: np.ndarray) -> np.ndarray:
    p, s, _ = applied_pulses(spec, tau, theta)
    h = np.zeros(tau.shape + (3, 3))
    h[:, 0, 1] = h[:, 1, 0] = p
    h[:, 1, 2] = h[:, 2, 1] = s
    return h


def _ordered_product(u: np.ndarray) -> np.ndarray:
    """u[n-1] @ ... @ u[1] @ u[0] by pairwise reduction."""
    while len(u) > 1:
        if len(u) % 2:
            u = np.concatenate([u, np.eye(3, dtype=complex)[None]])
        u = u[1::2] @ u[0::2]
    return u[0]


def propagate_reference(spec: ProtocolSpec, initial, tau_end: float, steps: int) -> np.ndarray:
    """Fixed-step fourth-order Magnus propagation (independent oracle for ``evolve``).

    Each step exponentiates the two-point Gauss-Legendre Magnus generator
    G = h/2 (H1 + H2) - i sqrt(3)/12 h^2 [H2, H1] by spectral decomposition.
    theta at the nodes comes from composite Gauss-Legendre quadrature of the
    envelope, not from the ODE.
    """
    psi = np.asarray(initial, dtype=complex)
    tau0 = spec.tau0
    h = (tau_end - tau0) / steps
    theta_start = 0.0
    for first in range(0, steps, REFERENCE_CHUNK):
        k = np.arange(first, min(first + REFERENCE_CHUNK, steps))
        left = tau0 + h * k
        right = tau0 + h * (k + 1)
        increments = 0.5 * _gl_integral(spec, left, right)
        theta_left = theta_start + np.concatenate([[0.0], np.cumsum(increments[:-1])])
        hs = []
        for c in _MAGNUS_NODES:
            node = left + c * h
            theta_node = theta_left + 0.5 * _gl_integral(spec, left, node)
            hs.append(_hamiltonians(spec, node, theta_node))
        h1, h2 = hs
        comm = h2 @ h1 - h1 @ h2
        g = 0.5 * h * (h1 + h2) - 1j * (np.sqrt(3) / 12) * h**2 * comm
        psi = _ordered_product(ops.expi(g)) @ psi
        theta_start = theta_left[-1] + increments[-1]
    return psi
