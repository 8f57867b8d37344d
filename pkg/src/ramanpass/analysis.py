"""Truncation robustness, effective durations and intermediate-level occupancy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import dsl
from .dynamics import evolve, evolve_state
from .errors import ThresholdError, ValidationError
from .schedule import FAMILIES, ProtocolSpec, builtin_family, end_tau, raw_theta, sample_schedule
from .stirsap import applied_pulses, build_eta_protocol, reconstruct_h0

DURATION_TOL = 1e-10
SCAN_POINTS = 4001


def predicted_truncation(delta):
    """Target population after a hard cutoff at pulse deviation ``delta``."""
    return (1 - 0.25 * np.tan(delta) ** 2) ** 2


def stirap_baseline(delta):
    """Dark-state population an adiabatic passage keeps at the same deviation."""
    return np.cos(delta) ** 2


@dataclass(frozen=True)
class TruncationReport:
    tau_fc: float
    theta: float
    delta: float
    predicted_p3: float
    simulated_p3: float
    stirap_baseline: float
    freeze_drift: float  # largest population change while both pulses are off


def truncation_population(spec: ProtocolSpec, tau_fc: float, hold: float = 1.0,
                          hold_samples: int = 11) -> TruncationReport:
    """Cut both pulses at ``tau_fc`` and compare the frozen P3 with the closed form."""
    end = end_tau(spec)
    if not spec.tau0 < tau_fc < end:
        raise ValidationError(f"tau_fc = {tau_fc!r} must lie strictly inside ({spec.tau0!r}, {end!r})")
    psi, theta = evolve_state(spec, [1, 0, 0], spec.tau0, tau_fc, 0.0)
    drive = applied_pulses(spec, tau_fc, theta)
    delta = math.atan2(drive.omega_s, drive.omega_p)
    # both pulses switched off: an explicit zero pump on a zero Stokes envelope
    frozen = ProtocolSpec(dsl.Const(0.0), pump=dsl.Const(0.0), nu=spec.nu,
                          t0=tau_fc / spec.nu, t_max=(tau_fc + hold) / spec.nu,
                          rtol=spec.rtol, atol=spec.atol)
    held = evolve(frozen, initial=psi / np.linalg.norm(psi), samples=hold_samples)
    pops = held.populations
    return TruncationReport(
        tau_fc=float(tau_fc), theta=float(theta), delta=delta,
        predicted_p3=float(predicted_truncation(delta)),
        simulated_p3=float(pops[-1, 2]),
        stirap_baseline=float(stirap_baseline(delta)),
        freeze_drift=float(np.max(np.abs(pops - pops[0]))),
    )


def _first_crossing(f, tau: np.ndarray, values: np.ndarray, threshold: float) -> float | None:
    above = np.nonzero(values >= threshold)[0]
    if len(above) == 0:
        return None
    k = above[0]
    if k == 0:
        return float(tau[0])
    return optimize.brentq(lambda x: f(x) - threshold, tau[k - 1], tau[k],
                           xtol=DURATION_TOL, rtol=4 * np.finfo(float).eps)


def effective_duration(spec: ProtocolSpec, threshold: float | None = None) -> float:
    """First tau at which the simulated P3 reaches ``threshold`` (default spec.threshold).

    The crossing is bracketed on a fine scan of the dense output and then
    bisected to an absolute tolerance of 1e-10.
    """
    threshold = spec.threshold if threshold is None else threshold
    traj = evolve(spec, samples=SCAN_POINTS)

    def p3(x):
        psi, _ = traj.state_at(x)
        return abs(psi[2]) ** 2

    tau_fc = _first_crossing(p3, traj.tau, traj.populations[:, 2], threshold)
    if tau_fc is None:
        raise ThresholdError(
            f"P3 stays below {threshold!r} up to tau = {traj.tau[-1]!r} "
            f"(max {traj.populations[:, 2].max()!r})")
    return tau_fc


def closed_form_duration(family_id: str, threshold: float = 0.9999) -> float:
    """tau at which a family's closed-form population law reaches ``threshold``."""
    fam = FAMILIES[family_id]
    hi = fam.tau_end * (1 - 1e-12)
    return optimize.brentq(lambda x: float(fam.population(x)) - threshold, 0.0, hi,
                           xtol=1e-14, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class OccupancyReport:
    tau: np.ndarray
    theta: np.ndarray
    eta: np.ndarray
    p2: np.ndarray
    p2_prime: np.ndarray
    ratio: np.ndarray
    max_ratio_at_pi4: float | None
    analytic_max_p2_prime: float
    simulated_max_p2: float | None


def occupancy_p2(theta):
    """|2> population sin^2 cos^2 along the matched dressed state."""
    return np.sin(theta) ** 2 * np.cos(theta) ** 2


def occupancy_p2_prime(theta, eta):
    """cos^2(theta) / (eta^2 + cot^2(theta)), written to stay finite at theta = 0."""
    s2, c2 = np.sin(theta) ** 2, np.cos(theta) ** 2
    return s2 * c2 / (eta**2 * s2 + c2)


def suppression_ratio(theta, eta):
    return 1 / (eta**2 * np.sin(theta) ** 2 + np.cos(theta) ** 2)


def _refined_max(f, tau: np.ndarray, values: np.ndarray) -> float:
    k = int(np.argmax(values))
    lo, hi = tau[max(k - 1, 0)], tau[min(k + 1, len(tau) - 1)]
    if hi <= lo:
        return float(values[k])
    res = optimize.minimize_scalar(lambda x: -f(x), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return float(max(-res.fun, values[k]))


def occupancy_report(spec: ProtocolSpec, eta, grid: int = 2001,
                     simulate: bool = True) -> OccupancyReport:
    """Analytic P2, P2' and their ratio along the schedule; optional simulation cross-check."""
    proto = build_eta_protocol(spec, eta)
    espec = proto.spec
    sched = sample_schedule(espec, grid)
    eta_values = np.broadcast_to(espec.eta_at(sched.tau), sched.tau.shape).astype(float)
    p2_prime = occupancy_p2_prime(sched.theta, eta_values)

    def analytic(x):
        return float(occupancy_p2_prime(raw_theta(espec, x), espec.eta_at(x)))

    analytic_max = _refined_max(analytic, sched.tau, p2_prime)
    simulated = None
    if simulate:
        traj = evolve(espec, samples=grid)

        def p2(x):
            return abs(traj.state_at(x)[0][1]) ** 2

        simulated = _refined_max(p2, traj.tau, traj.populations[:, 1])
    constant = isinstance(espec.eta, (int, float))
    return OccupancyReport(
        tau=sched.tau, theta=sched.theta, eta=eta_values,
        p2=occupancy_p2(sched.theta), p2_prime=p2_prime,
        ratio=suppression_ratio(sched.theta, eta_values),
        max_ratio_at_pi4=2 / (1 + espec.eta**2) if constant else None,
        analytic_max_p2_prime=analytic_max, simulated_max_p2=simulated,
    )


def table1_report(nu: float = 1.0, threshold: float = 0.9999, grid_points: int = 11) -> list[dict]:
    """Six-row reproduction of the built-in family table, ordered a-f.

    Durations and pulse values are dimensionless (tau = nu t, omega / nu).
    """
    rows = []
    for fid, fam in FAMILIES.items():
        spec = builtin_family(fid, nu, threshold=threshold)
        simulated = effective_duration(spec)
        closed = closed_form_duration(fid, threshold)
        tau = np.linspace(0.0, simulated, grid_points)
        theta = np.array([raw_theta(spec, x) for x in tau])
        recon = np.array([reconstruct_h0(spec, x, th) for x, th in zip(tau, theta)])
        rows.append({
            "family": fid,
            "stokes": fam.stokes_text,
            "pump": fam.pump_text,
            "population_law": fam.population_text,
            "omega_s0": fam.omega_s0_text,
            "omega_p0": fam.omega_p0_text,
            "threshold": threshold,
            "reported_nu_t_fc": fam.reported_duration,
            "closed_form_nu_t_fc": closed,
            "simulated_nu_t_fc": simulated,
            "deviation": simulated - fam.reported_duration,
            "deviation_closed_form": simulated - closed,
            "grid": {
                "tau": tau.tolist(),
                "omega_s": np.asarray(fam.stokes(tau), dtype=float).tolist(),
                "omega_p": np.asarray(fam.pump(tau), dtype=float).tolist(),
                "population": np.asarray(fam.population(tau), dtype=float).tolist(),
                "omega_s0": np.asarray(fam.omega_s0(tau), dtype=float).tolist(),
                "omega_p0": np.asarray(fam.omega_p0(tau), dtype=float).tolist(),
                "omega_s0_reconstructed": recon[:, 1].tolist(),
                "omega_p0_reconstructed": recon[:, 0].tolist(),
            },
        })
    return rows
