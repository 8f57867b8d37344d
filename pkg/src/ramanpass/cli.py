"""Command-line front end.

Exit codes: 0 success, 1 validation or parse failure, 2 numerical failure
(including failed verification checks).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsl
from .analysis import _first_crossing, table1_report
from .dynamics import evolve
from .errors import DSLError, NumericalError, RamanPassError, ValidationError
from .invariant import invariant_residual, lr_phase_rate
from .schedule import FAMILIES, ProtocolSpec, builtin_family, end_tau, sample_schedule
from .stirsap import build_eta_protocol, decompose, verify_decomposition

SCHEMA_VERSION = 1
SIMULATE_COLUMNS = [
    "tau", "re_c1", "im_c1", "re_c2", "im_c2", "re_c3", "im_c3",
    "p1", "p2", "p3", "theta", "omega_p", "omega_s", "invariant_residual", "e0_fidelity",
]
TABLE1_COLUMNS = [
    "family", "stokes", "pump", "population_law", "omega_s0", "omega_p0", "threshold",
    "reported_nu_t_fc", "closed_form_nu_t_fc", "simulated_nu_t_fc", "deviation",
    "deviation_closed_form", "within_tolerance",
]
RECONSTRUCT_COLUMNS = [
    "tau", "theta", "omega_s", "omega_p", "omega_s0", "omega_p0", "h_cd", "phi",
]
ETA_COLUMNS = ["phi_prime", "omega_p_prime", "omega_s_prime"]

VERIFY_TOL = {
    "invariant_residual": 1e-10,
    "lr_phase_rate": 1e-10,
    "decomposition_residual": 1e-10,
    "dressed_state_distance": 1e-6,
    "norm_drift": 1e-9,
}

NUMERIC_KEYS = ("nu", "t0", "t_max", "theta_cap", "rtol", "atol", "threshold")
PROTOCOL_KEYS = {"name", "envelope", "stokes", "pump", "eta", "samples", *NUMERIC_KEYS}


# --- protocol files ------------------------------------------------------------


def parse_protocol_text(text: str, source: str = "<protocol>") -> dict:
    """Flat ``key = <JSON value>`` lines; ``#`` starts a comment line."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, rest = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ValidationError(f"{source}:{lineno}: expected 'key = value'")
        if key not in PROTOCOL_KEYS:
            raise ValidationError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ValidationError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = json.loads(rest.strip())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{source}:{lineno}: bad value for {key!r}: {exc.msg}") from None
    return values


def _number(values: dict, key: str):
    value = values[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(f"field {key!r} must be a finite number, got {value!r}")
    return float(value)


def _expression(values: dict, key: str) -> dsl.Expr:
    value = values[key]
    if not isinstance(value, str):
        raise ValidationError(f"field {key!r} must be an expression string")
    try:
        return dsl.parse(value)
    except DSLError as exc:
        raise ValidationError(f"field {key!r}: {exc}") from None


def spec_from_mapping(values: dict) -> ProtocolSpec:
    """Validated spec from parsed protocol-file values (defaults filled in)."""
    has_env, has_stokes = "envelope" in values, "stokes" in values
    if has_env == has_stokes:
        raise ValidationError("exactly one of 'envelope' (built-in a-f) or 'stokes' is required")
    params: dict = {}
    for key in NUMERIC_KEYS:
        if key in values:
            params[key] = _number(values, key)
    if "samples" in values:
        samples = values["samples"]
        if isinstance(samples, bool) or not isinstance(samples, int) or samples < 1:
            raise ValidationError(f"field 'samples' must be a positive integer, got {samples!r}")
        params["samples"] = samples
    if "name" in values:
        if not isinstance(values["name"], str):
            raise ValidationError("field 'name' must be a string")
        params["name"] = values["name"]
    if "eta" in values:
        eta = values["eta"]
        if isinstance(eta, str):
            params["eta"] = _expression(values, "eta")
        else:
            params["eta"] = _number(values, "eta")
            if params["eta"] == 0:
                raise ValidationError("field 'eta' must be nonzero")
    if "pump" in values:
        params["pump"] = _expression(values, "pump")
    if has_env:
        family = values["envelope"]
        if family not in FAMILIES:
            raise ValidationError(f"field 'envelope' must be one of a-f, got {family!r}")
        nu = params.pop("nu", 1.0)
        return builtin_family(family, nu, **params)
    params["envelope"] = _expression(values, "stokes")
    for key in ("nu", "t_max"):
        if key not in params:
            raise ValidationError(f"field {key!r} is required for a 'stokes' protocol")
    return ProtocolSpec(**params)


def load_protocol(path) -> ProtocolSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ValidationError(f"cannot read protocol file {str(path)!r}: {exc}") from None
    return spec_from_mapping(parse_protocol_text(text, str(path)))


# --- output helpers --------------------------------------------------------------


def fmt(value) -> str:
    """Shortest round-trip text for floats; plain text otherwise."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(columns: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _emit(out: str | None, table: str, meta: dict):
    if out is None:
        sys.stdout.write(table)
        return
    path = Path(out)
    _write(path, table)
    _write(path.with_suffix(".json"), json_text(meta))


def trajectory_rows(traj):
    pops = traj.populations
    for k in range(len(traj.tau)):
        c = traj.states[k]
        yield [
            traj.tau[k], c[0].real, c[0].imag, c[1].real, c[1].imag, c[2].real, c[2].imag,
            pops[k, 0], pops[k, 1], pops[k, 2], traj.theta[k], traj.omega_p[k],
            traj.omega_s[k], traj.invariant_residual[k], traj.fidelity[k],
        ]


def trajectory_summary(traj) -> dict:
    pops = traj.populations
    return {
        "tau_end": float(traj.tau[-1]),
        "final_populations": [float(p) for p in pops[-1]],
        "max_p2": float(pops[:, 1].max()),
        "max_invariant_residual": float(traj.invariant_residual.max()),
        "min_e0_fidelity": float(traj.fidelity.min()),
        "max_e0_distance": float(traj.distance.max()),
        "norm_drift": traj.norm_drift,
    }


# --- subcommands -------------------------------------------------------------------


def cmd_simulate(spec: ProtocolSpec, out: str | None = None) -> int:
    if spec.has_eta:
        build_eta_protocol(spec)
    cap = None if spec.tau_max == spec.tau0 else end_tau(spec)
    traj = evolve(spec, tau_end=spec.tau0 if cap is None else cap)
    meta = {
        "schema": f"ramanpass.simulate/{SCHEMA_VERSION}",
        "columns": SIMULATE_COLUMNS,
        "protocol": spec.describe(),
        "capped": cap is not None and cap < spec.tau_max,
        **trajectory_summary(traj),
    }
    _emit(out, csv_text(SIMULATE_COLUMNS, trajectory_rows(traj)), meta)
    return 0


@dataclass
class CheckResult:
    name: str
    worst: float
    tolerance: float
    tau: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance


def run_checks(spec: ProtocolSpec, samples: int | None = None) -> tuple[list[CheckResult], dict]:
    """Invariant, phase, decomposition and tracking checks on the schedule grid."""
    sched = sample_schedule(spec, samples)
    grid = list(zip(sched.tau, sched.theta))
    results = []
    for name, fn in (
        ("invariant_residual", invariant_residual),
        ("lr_phase_rate", lambda s, t, th: abs(lr_phase_rate(s, t, th))),
        ("decomposition_residual", verify_decomposition),
    ):
        values = np.array([fn(spec, t, th) for t, th in grid])
        k = int(np.argmax(values))
        results.append(CheckResult(name, float(values[k]), VERIFY_TOL[name], float(sched.tau[k])))
    traj = evolve(spec, tau_end=sched.tau[-1], samples=len(sched.tau))
    k = int(np.argmax(traj.distance))
    results.append(CheckResult("dressed_state_distance", float(traj.distance[k]),
                               VERIFY_TOL["dressed_state_distance"], float(traj.tau[k])))
    results.append(CheckResult("norm_drift", traj.norm_drift, VERIFY_TOL["norm_drift"],
                               float(traj.tau[-1])))
    notes = {"capped": bool(sched.capped), "tau_end": float(sched.tau[-1]),
             "theta_end": float(sched.theta[-1]), "theta_cap": spec.theta_cap}
    return results, notes


def cmd_verify(spec: ProtocolSpec, samples: int | None = None, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    if spec.has_eta and spec.pump is None:
        build_eta_protocol(spec)
    results, notes = run_checks(spec, samples)
    stream.write(f"{'check':<24} {'worst':>12} {'tolerance':>10} {'at tau':>14}  result\n")
    for r in results:
        stream.write(f"{r.name:<24} {r.worst:>12.3e} {r.tolerance:>10.0e} {r.tau:>14.8f}  "
                     f"{'PASS' if r.passed else 'FAIL'}\n")
    if notes["capped"]:
        stream.write(f"note: schedule capped at tau = {notes['tau_end']!r} "
                     f"(theta = {notes['theta_end']:.6f}, cap = {notes['theta_cap']:.6f})\n")
    failed = [r for r in results if not r.passed]
    if failed:
        stream.write("failed: " + ", ".join(f"{r.name} at tau = {r.tau!r}" for r in failed) + "\n")
        return 2
    return 0


def cmd_table1(nu: float = 1.0, threshold: float = 0.9999, out: str | None = None) -> int:
    rows = table1_report(nu, threshold)
    paper_threshold = threshold == 0.9999
    table_rows = []
    for r in rows:
        tol = 0.01 if r["family"] == "c" else 0.01 * math.pi
        r["within_tolerance"] = abs(r["deviation"]) <= tol if paper_threshold else None
        table_rows.append([r[c] for c in TABLE1_COLUMNS])
    meta = {
        "schema": f"ramanpass.table1/{SCHEMA_VERSION}",
        "columns": TABLE1_COLUMNS,
        "nu": nu,
        "threshold": threshold,
        "units": "dimensionless: tau = nu*t, omega/nu",
        "rows": rows,
    }
    _emit(out, csv_text(TABLE1_COLUMNS, table_rows), meta)
    return 0


def cmd_reconstruct(spec: ProtocolSpec, out: str | None = None) -> int:
    dec = decompose(spec)
    sched = sample_schedule(spec)
    columns = list(RECONSTRUCT_COLUMNS)
    cols = [dec.tau, dec.theta, sched.omega_s, sched.omega_p, dec.omega_s0, dec.omega_p0,
            dec.h_cd_strength, dec.phi]
    if spec.has_eta:
        data = build_eta_protocol(spec).sample()
        columns += ETA_COLUMNS
        cols += [data["phi_prime"], data["omega_p"], data["omega_s"]]
    meta = {
        "schema": f"ramanpass.reconstruct/{SCHEMA_VERSION}",
        "columns": columns,
        "protocol": spec.describe(),
    }
    _emit(out, csv_text(columns, zip(*cols)), meta)
    return 0


# --- sweeps ----------------------------------------------------------------------


@dataclass(frozen=True)
class SweepGrid:
    families: tuple[str, ...]
    etas: tuple[float, ...] = (1.0,)
    fractions: tuple[float, ...] = (1.0,)
    thresholds: tuple[float, ...] = (0.9999,)
    samples: int = 401

    def __post_init__(self):
        for axis in ("families", "etas", "fractions", "thresholds"):
            if not getattr(self, axis):
                raise ValidationError(f"sweep axis {axis!r} is empty")
        for fam in self.families:
            if fam not in FAMILIES:
                raise ValidationError(f"unknown family {fam!r} in sweep grid")
        for eta in self.etas:
            if not math.isfinite(eta) or eta == 0:
                raise ValidationError(f"eta values must be finite and nonzero, got {eta!r}")
        for frac in self.fractions:
            if not 0 < frac <= 1:
                raise ValidationError(f"truncation fractions must lie in (0, 1], got {frac!r}")
        for thr in self.thresholds:
            if not 0 < thr <= 1:
                raise ValidationError(f"thresholds must lie in (0, 1], got {thr!r}")

    def jobs(self) -> list[dict]:
        combos = itertools.product(self.families, self.etas, self.fractions, self.thresholds)
        return [{"index": i, "family": f, "eta": e, "fraction": fr, "threshold": th}
                for i, (f, e, fr, th) in enumerate(combos)]


def load_grid(path) -> SweepGrid:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read sweep grid {str(path)!r}: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("sweep grid must be a JSON object")
    unknown = set(data) - {"families", "etas", "fractions", "thresholds", "samples"}
    if unknown:
        raise ValidationError(f"unknown sweep grid key {sorted(unknown)[0]!r}")
    try:
        return SweepGrid(
            families=tuple(data["families"]),
            etas=tuple(float(x) for x in data.get("etas", [1.0])),
            fractions=tuple(float(x) for x in data.get("fractions", [1.0])),
            thresholds=tuple(float(x) for x in data.get("thresholds", [0.9999])),
            samples=int(data.get("samples", 401)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed sweep grid: {exc!r}") from None


def job_filename(job: dict) -> str:
    return f"job{job['index']:04d}_{job['family']}.csv"


def run_job(job: dict, samples: int = 401):
    """One sweep job; returns ``(index, csv_text, summary)`` with the error text on failure."""
    try:
        spec = builtin_family(job["family"], eta=job["eta"], threshold=job["threshold"],
                              samples=samples)
        stop = spec.tau0 + job["fraction"] * (end_tau(spec) - spec.tau0)
        traj = evolve(spec, tau_end=stop)

        def p3(x):
            return abs(traj.state_at(x)[0][2]) ** 2

        duration = _first_crossing(p3, traj.tau, traj.populations[:, 2], job["threshold"])
        summary = {**job, "file": job_filename(job), "effective_duration": duration,
                   **trajectory_summary(traj)}
        return job["index"], csv_text(SIMULATE_COLUMNS, trajectory_rows(traj)), summary
    except RamanPassError as exc:
        return job["index"], None, {**job, "error": str(exc)}


def cmd_sweep(grid: SweepGrid, out_dir, jobs: int = 1, stream=None) -> int:
    stream = sys.stderr if stream is None else stream
    todo = grid.jobs()
    stream.write(f"sweep: {len(todo)} jobs on {jobs} worker(s)\n")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_job, todo, itertools.repeat(grid.samples)))
    else:
        results = [run_job(job, grid.samples) for job in todo]
    results.sort(key=lambda r: r[0])
    out_dir = Path(out_dir)
    failures = []
    for index, text, summary in results:
        if text is None:
            failures.append(summary)
            continue
        _write(out_dir / summary["file"], text)
    index = {
        "schema": f"ramanpass.sweep/{SCHEMA_VERSION}",
        "columns": SIMULATE_COLUMNS,
        "grid": {"families": list(grid.families), "etas": list(grid.etas),
                 "fractions": list(grid.fractions), "thresholds": list(grid.thresholds),
                 "samples": grid.samples},
        "jobs": [summary for _, _, summary in results],
    }
    _write(out_dir / "index.json", json_text(index))
    if failures:
        for f in failures:
            stream.write(f"job {f['index']} ({f['family']}, eta={f['eta']!r}) failed: {f['error']}\n")
        stream.write(f"sweep: {len(failures)} of {len(todo)} jobs failed\n")
        return 2
    return 0


# --- argument parsing ---------------------------------------------------------------


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_protocol_args(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--protocol", help="protocol file (key = JSON value lines)")
    src.add_argument("--family", help="built-in family a-f")
    p.add_argument("--nu", type=float)
    p.add_argument("--eta", help="number or expression in t and nu")
    p.add_argument("--threshold", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--theta-cap", type=float, dest="theta_cap")


def _spec_from_args(args) -> ProtocolSpec:
    if args.protocol:
        spec = load_protocol(args.protocol)
        if args.nu is not None:
            # keep the window fixed in dimensionless time
            spec = spec.replace(nu=args.nu, t0=spec.tau0 / args.nu, t_max=spec.tau_max / args.nu)
    else:
        spec = builtin_family(args.family, 1.0 if args.nu is None else args.nu) \
            if args.family in FAMILIES else None
        if spec is None:
            raise ValidationError(f"unknown family {args.family!r}; expected one of a-f")
    changes = {k: getattr(args, k) for k in ("threshold", "samples", "rtol", "atol", "theta_cap")
               if getattr(args, k) is not None}
    if args.eta is not None:
        changes["eta"] = _eta_arg(args.eta)
    return spec.replace(**changes) if changes else spec


def _eta_arg(text: str):
    try:
        value = float(text)
    except ValueError:
        try:
            return dsl.parse(text)
        except DSLError as exc:
            raise ValidationError(f"--eta: {exc}") from None
    if not math.isfinite(value) or value == 0:
        raise ValidationError(f"--eta must be finite and nonzero, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ramanpass", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="evolve |1> and write the trajectory as CSV")
    _add_protocol_args(p)
    p.add_argument("--out", help="CSV path (JSON metadata next to it); stdout if omitted")

    p = sub.add_parser("verify", help="run the invariant/decomposition check suite")
    _add_protocol_args(p)

    p = sub.add_parser("table1", help="reproduce the six-family duration table")
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=0.9999)
    p.add_argument("--out", help="CSV path (JSON next to it); stdout if omitted")

    p = sub.add_parser("reconstruct", help="emit the adiabatic reference pulses")
    _add_protocol_args(p)
    p.add_argument("--out", help="CSV path (JSON metadata next to it); stdout if omitted")

    p = sub.add_parser("sweep", help="run a family x eta x fraction x threshold grid")
    p.add_argument("--grid", help="JSON grid file")
    p.add_argument("--families", default="a,b,c,d,e,f")
    p.add_argument("--etas", type=_floats, default=(1.0,))
    p.add_argument("--fractions", type=_floats, default=(1.0,))
    p.add_argument("--thresholds", type=_floats, default=(0.9999,))
    p.add_argument("--samples", type=int, default=401)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(_spec_from_args(args), args.out)
        if args.command == "verify":
            return cmd_verify(_spec_from_args(args))
        if args.command == "reconstruct":
            return cmd_reconstruct(_spec_from_args(args), args.out)
        if args.command == "table1":
            if not args.nu > 0 or not 0 < args.threshold <= 1:
                raise ValidationError("--nu must be positive and --threshold in (0, 1]")
            return cmd_table1(args.nu, args.threshold, args.out)
        if args.jobs < 1:
            raise ValidationError("--jobs must be at least 1")
        if args.grid:
            grid = load_grid(args.grid)
        else:
            grid = SweepGrid(tuple(f.strip() for f in args.families.split(",") if f.strip()),
                             args.etas, args.fractions, args.thresholds, args.samples)
        return cmd_sweep(grid, args.out, args.jobs)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, DSLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
