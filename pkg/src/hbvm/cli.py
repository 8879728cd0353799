"""Command line front end.

Subcommands: ``tableau``, ``integrate``, ``convergence`` and ``annulus``.
Exit codes: 0 success, 2 usage error, 3 stage iteration failed to converge,
4 gradient evaluation failure (e.g. a collision).
"""

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .annulus import EscapeCriterion, bisect_boundary
from .core import (
    EvaluationFailure,
    NonConvergence,
    SolverConfig,
    as_runge_kutta,
    build_tableau,
    integrate,
)
from .drift import drift_reports
from .problems import PROBLEMS, get_problem, hstar_reference, quintic_system

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_EVAL = 0, 2, 3, 4

DETERMINISM_NOTE = "no randomness; identical flags reproduce byte-identical output"


class UsageError(Exception):
    pass


def fmt(x):
    """Full-precision decimal: 17 significant digits round-trip a double."""
    return "%.17g" % x


def parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def solver_config(args):
    try:
        return SolverConfig(abs_tol=args.abs_tol, rel_tol=args.rel_tol, max_iterations=args.max_iter)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def checked_tableau(k, s):
    if s < 1:
        raise UsageError("s must be >= 1")
    if k < s:
        raise UsageError("k must be >= s")
    return build_tableau(k, s)


def manifest(args, problem, outputs, **extra):
    data = {
        "problem": problem,
        "s": args.s,
        "k": args.k,
        "h": args.h,
        "steps": args.steps,
        "abs_tol": args.abs_tol,
        "rel_tol": args.rel_tol,
        "max_iter": args.max_iter,
        "outputs": outputs,
        "determinism": DETERMINISM_NOTE,
    }
    data.update(extra)
    return data


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=False)
        fh.write("\n")


def write_trajectory_csv(path, t0, h, states):
    dim = states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"y{i + 1}" for i in range(dim)])
        for n, y in enumerate(states):
            w.writerow([fmt(t0 + n * h)] + [fmt(v) for v in y])


def read_trajectory_csv(path):
    """Return ``(times, states)`` from a trajectory CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]


def write_drift_csv(path, t0, h, reports):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"{r.name}_rel_err" for r in reports])
        for n in range(len(reports[0].errors) if reports else 0):
            w.writerow([fmt(t0 + n * h)] + [fmt(r.errors[n]) for r in reports])


# --------------------------------------------------------------------------
# subcommands


def cmd_tableau(args, out):
    tab = checked_tableau(args.k, args.s)
    M, b, c = as_runge_kutta(tab)
    A = tab.integrated_basis
    if args.format == "json":
        json.dump(
            {
                "s": tab.s,
                "k": tab.k,
                "c": c.tolist(),
                "omega": tab.weights.tolist(),
                "A": A.tolist(),
                "M": M.tolist(),
                "b": b.tolist(),
            },
            out,
            indent=2,
        )
        out.write("\n")
        return EXIT_OK
    w = csv.writer(out, lineterminator="\n")
    header = ["c", "b"] + [f"M_{j + 1}" for j in range(tab.k)]
    if args.include_basis:
        header += [f"A_{j + 1}" for j in range(tab.s)]
    w.writerow(header)
    for i in range(tab.k):
        row = [c[i], b[i]] + list(M[i])
        if args.include_basis:
            row += list(A[i])
        w.writerow([fmt(v) for v in row])
    return EXIT_OK


def initial_state(args, problem):
    y0 = problem.y0.copy()
    if args.y0:
        values = parse_floats(args.y0)
        if len(values) != y0.size:
            raise UsageError(f"--y0 needs {y0.size} values for {problem.name}, got {len(values)}")
        y0 = np.array(values)
    return y0


def cmd_integrate(args, out):
    problem = get_problem(args.problem)
    tab = checked_tableau(args.k, args.s)
    cfg = solver_config(args)
    if args.steps < 0:
        raise UsageError("--steps must be >= 0")
    y0 = initial_state(args, problem)
    names = problem.system.invariant_names if not args.drift else args.drift.split(",")
    for name in names:
        if name not in problem.system.invariant_names:
            raise UsageError(f"unknown invariant {name!r}; known: {problem.system.invariant_names}")

    os.makedirs(args.out_dir, exist_ok=True)
    traj_path = os.path.join(args.out_dir, "trajectory.csv")
    drift_path = os.path.join(args.out_dir, "drift.csv")
    man_path = os.path.join(args.out_dir, "manifest.json")

    status, code, failure = "ok", EXIT_OK, None
    try:
        traj = integrate(problem.system, y0, args.h, args.steps, tab, cfg)
    except NonConvergence as exc:
        traj, status, code = exc.trajectory, "nonconvergence", EXIT_SOLVER
        failure = {"failing_step": exc.step_index, "message": str(exc)}
    except EvaluationFailure as exc:
        traj, status, code = exc.trajectory, "evaluation_failure", EXIT_EVAL
        failure = {"failing_step": exc.step_index, "message": str(exc)}

    write_trajectory_csv(traj_path, traj.t0, traj.h, traj.states)
    try:
        reports = drift_reports(problem.system, traj.states, names)
    except EvaluationFailure as exc:
        # invariants undefined on the stored states (e.g. y0 is a collision)
        reports, status, code = [], "evaluation_failure", EXIT_EVAL
        failure = failure or {"failing_step": 1, "message": str(exc)}
    write_drift_csv(drift_path, traj.t0, traj.h, reports)
    summary = {r.name: {"max": r.max_drift, "final": r.final_drift, "absolute": r.absolute} for r in reports}
    extra = {"y0": [float(v) for v in y0], "status": status, "drift": summary}
    if failure:
        extra.update(failure)
    write_json(man_path, manifest(args, problem.name, [traj_path, drift_path], **extra))

    for r in reports:
        out.write(f"{r.name}: max {'abs' if r.absolute else 'rel'} drift {fmt(r.max_drift)}\n")
    if failure:
        sys.stderr.write(f"{status} at step {failure['failing_step']}: {failure['message']}\n")
    return code


def convergence_study(system, y0, s, k, h0, levels, t_end, cfg=SolverConfig()):
    """Terminal-state errors at ``h0 / 2**l`` against a reference at ``h0 / 2**(levels + 2)``.

    Returns a list of ``(h, error, observed_order)``; the order is ``None``
    for the last level.
    """
    tab = build_tableau(k, s)

    def endpoint(h):
        n = round(t_end / h)
        if n < 1 or not math.isclose(n * h, t_end, rel_tol=1e-12):
            raise UsageError(f"t-end {t_end} is not a whole number of steps of size {h}")
        return integrate(system, y0, h, n, tab, cfg).states[-1]

    ref = endpoint(h0 / 2 ** (levels + 2))
    hs = [h0 / 2**lvl for lvl in range(levels)]
    errs = [float(np.max(np.abs(endpoint(h) - ref))) for h in hs]
    rows = []
    for i, (h, e) in enumerate(zip(hs, errs)):
        order = math.log2(e / errs[i + 1]) if i + 1 < len(errs) and errs[i + 1] > 0 else None
        rows.append((h, e, order))
    return rows


def cmd_convergence(args, out):
    if args.levels < 2:
        raise UsageError("--levels must be >= 2")
    problem = get_problem(args.problem)
    checked_tableau(args.k, args.s)
    y0 = initial_state(args, problem)
    rows = convergence_study(
        problem.system, y0, args.s, args.k, args.h0, args.levels, args.t_end, solver_config(args)
    )
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["h", "error", "observed_order"])
    for h, e, order in rows:
        w.writerow([fmt(h), fmt(e), "" if order is None else fmt(order)])
    return EXIT_OK


def cmd_annulus(args, out):
    checked_tableau(args.k, args.s)
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    cfg = solver_config(args)
    system = quintic_system()
    center, target = np.zeros(2), np.array([0.0, 1.0])
    try:
        crit = EscapeCriterion(radius=args.escape_radius)
        res = bisect_boundary(system, center, target, args.s, args.k, args.h, args.steps, args.tol, crit, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    y0 = res.boundary_point
    hstar = hstar_reference()
    rel_err = abs(system.hamiltonian(y0) - hstar) / hstar
    summary = {
        "q0": float(y0[0]),
        "p0": float(y0[1]),
        "c_low": res.c_low,
        "c_high": res.c_high,
        "h_rel_err": rel_err,
        "probes": res.probes,
    }
    log_rows = [(p.c, int(p.escaped), p.steps_run, p.reason) for p in res.log]

    if args.format == "json":
        data = dict(summary)
        data["log"] = [{"c": c, "escaped": bool(e), "steps_run": n, "reason": r} for c, e, n, r in log_rows]
        json.dump(data, out, indent=2)
        out.write("\n")
    else:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(list(summary))
        w.writerow([fmt(v) if isinstance(v, float) else v for v in summary.values()])

    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        probes_path = os.path.join(args.out_dir, "probes.csv")
        with open(probes_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["c", "escaped", "steps_run", "reason"])
            for c, e, n, r in log_rows:
                w.writerow([fmt(c), e, n, r])
        extra = dict(summary, tol=args.tol, escape_radius=args.escape_radius, center=[0.0, 0.0], target=[0.0, 1.0])
        write_json(os.path.join(args.out_dir, "manifest.json"), manifest(args, "quintic", [probes_path], **extra))
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _add_solver_flags(p):
    p.add_argument("--abs-tol", type=float, default=1e-14)
    p.add_argument("--rel-tol", type=float, default=1e-14)
    p.add_argument("--max-iter", type=int, default=100)


def build_parser():
    parser = argparse.ArgumentParser(prog="hbvm", description="Energy-conserving HBVM(k,s) integrators.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tableau", help="print the coefficients of HBVM(k,s)")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--include-basis", action="store_true", help="append integrated-basis columns A_j (csv)")
    p.set_defaults(func=cmd_tableau)

    p = sub.add_parser("integrate", help="integrate a built-in problem, write trajectory and drift CSV")
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--y0", help="comma-separated initial state overriding the problem default")
    p.add_argument("--drift", help="comma-separated invariant names (default: all)")
    p.add_argument("--out-dir", default=".")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("convergence", help="observed order from stepsize halving")
    p.add_argument("--problem", choices=PROBLEMS, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--h0", type=float, required=True)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--y0")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_convergence, h=None, steps=None)

    p = sub.add_parser("annulus", help="bisect for the period-annulus boundary of the quintic system")
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=2500)
    p.add_argument("--tol", type=float, default=2.0**-52)
    p.add_argument("--escape-radius", type=float, default=2.0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out-dir", help="also write probes.csv and manifest.json here")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_annulus)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"hbvm {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except NonConvergence as exc:
        sys.stderr.write(f"hbvm {args.command}: {exc}\n")
        return EXIT_SOLVER
    except EvaluationFailure as exc:
        sys.stderr.write(f"hbvm {args.command}: {exc}\n")
        return EXIT_EVAL


def run(argv):
    """Run the CLI in-process and return ``(exit_code, stdout_text)``."""
    buf = io.StringIO()
    code = main(argv, out=buf)
    return code, buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
