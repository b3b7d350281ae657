"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 numerical failure or failed
verification.  Errors are reported on stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io
from .errors import DomainError, InputError, NeutralSpecError
from .forward import spectrum_near_grid, verify_assignment
from .pipeline import assign
from .reconstruct import gram_report

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


def _fail(exc, code):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, InputError):
        err["field"] = exc.field
    cond = getattr(exc, "condition", None)
    if cond is not None:
        err["condition"] = cond
    print(json.dumps(io._sanitize(err)), file=sys.stderr)
    return code


def _emit(obj, path):
    text = io.write_json(io._sanitize(obj), path)
    if path is None or path == "-":
        sys.stdout.write(text)


def _options(problem, args):
    opts = dict(problem.options)
    for key in ("solve_window", "tol_root", "tol_vec", "seed", "repair_epsilon"):
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if getattr(args, "no_repair", False):
        opts["repair"] = False
    return opts


def _assign(problem, opts):
    return assign(problem.target, solve_window=opts["solve_window"], repair=opts["repair"],
                  repair_epsilon=opts["repair_epsilon"], seed=opts["seed"])


def _verify_target(problem, diagnostics):
    """Problem target, with repaired vectors substituted when present."""
    target = problem.target
    adj = (diagnostics or {}).get("repair", {}).get("adjusted_d")
    if adj is None:
        return target
    n = target.n
    d = io.decode_array(adj, (n, 2 * target.window + 1, n), "diagnostics.repair.adjusted_d")
    return target.replace(d=d)


def _summary(report):
    return {"passed": report.passed, "max_sigma_min_ratio": report.max_sigma_ratio,
            "max_vec_residual": report.max_vec_residual, "checked": len(report.entries)}


def cmd_assign(args):
    problem = io.read_problem(args.problem)
    opts = _options(problem, args)
    res = _assign(problem, opts)
    io.write_realization(res.system, args.output, res.diagnostics)
    _emit({"status": "ok", "output": args.output, "conditions": res.diagnostics["conditions"],
           "repair": res.diagnostics["repair"].get("ran", False)}, None)
    return EXIT_OK


def cmd_verify(args):
    system, diagnostics = io.read_realization(args.realization)
    problem = io.read_problem(args.problem)
    opts = _options(problem, args)
    target = _verify_target(problem, diagnostics)
    report = verify_assignment(system, target, problem.reference, N_v=args.window,
                               tol_root=opts["tol_root"], tol_vec=opts["tol_vec"])
    _emit(report.to_dict(), args.output)
    if args.csv:
        io.write_csv(report.csv_rows(), args.csv)
    return EXIT_OK if report.passed else EXIT_NUMERIC


def _spectrum_rows(spec):
    box = "" if spec.box_total is None else spec.box_total
    rows = [("m", "k", "re_lambda", "im_lambda", "sigma_min_ratio", "iterations", "box_total")]
    seen = []
    for e in spec.entries + spec.extra:
        if not e.converged or any(abs(e.root - r) <= 1e-8 for r in seen):
            continue
        seen.append(e.root)
        rows.append((e.m, e.k, repr(float(e.root.real)), repr(float(e.root.imag)),
                     repr(e.report.sigma_min_ratio), e.iterations, box))
    for _ in range(spec.zero_multiplicity):
        rows.append(("", "", "0.0", "0.0", "0.0", 0, box))
    return rows


def cmd_forward(args):
    system, diagnostics = io.read_realization(args.realization)
    reference = system.reference()
    seeds = [complex(*s) for s in (diagnostics or {}).get("forward_seeds", [])]
    spec = spectrum_near_grid(system, reference, args.window, extra_seeds=seeds,
                              box_check=not args.no_box_check, tol=args.tol_newton)
    rows = _spectrum_rows(spec)
    out = {
        "window": args.window,
        "roots": len(rows) - 1,
        "zero_multiplicity": spec.zero_multiplicity,
        "box_total": spec.box_total,
        "entries": [e.to_dict() for e in spec.entries + spec.extra],
    }
    _emit(out, args.output)
    if args.csv:
        io.write_csv(rows, args.csv)
    unconverged = any(not e.converged for e in spec.entries + spec.extra)
    return EXIT_NUMERIC if unconverged else EXIT_OK


def cmd_roundtrip(args):
    problem = io.read_problem(args.problem)
    opts = _options(problem, args)
    res = _assign(problem, opts)
    report = verify_assignment(res.system, res.target, problem.reference, N_v=args.window,
                               tol_root=opts["tol_root"], tol_vec=opts["tol_vec"])
    out = _summary(report)
    out["spectral_equation_residual"] = res.diagnostics["spectral_equation_residual"]
    out["conditions"] = res.diagnostics["conditions"]
    out["repair"] = res.diagnostics["repair"].get("ran", False)
    _emit(out, args.output)
    return EXIT_OK if report.passed else EXIT_NUMERIC


def cmd_gram_report(args):
    problem = io.read_problem(args.problem)
    rows = gram_report(problem.reference, tuple(args.sizes))
    _emit({"channels": rows}, args.output)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="neutralspec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp):
        sp.add_argument("--solve-window", type=int, dest="solve_window",
                        help="truncation radius N_s (default 4 * target window)")
        sp.add_argument("--seed", type=int, help="seed for the randomized repair")
        sp.add_argument("--repair-epsilon", type=float, dest="repair_epsilon",
                        help="squared size budget of the repair perturbation")
        sp.add_argument("--no-repair", action="store_true", dest="no_repair",
                        help="fail instead of repairing a singular operator")

    def tol_flags(sp):
        sp.add_argument("--tol-root", type=float, dest="tol_root")
        sp.add_argument("--tol-vec", type=float, dest="tol_vec")
        sp.add_argument("--window", type=int, help="verification radius N_v")

    sp = sub.add_parser("assign", help="realize a problem file as a system")
    sp.add_argument("problem")
    sp.add_argument("-o", "--output", required=True)
    solver_flags(sp)
    sp.set_defaults(func=cmd_assign)

    sp = sub.add_parser("verify", help="check a realization against a problem")
    sp.add_argument("realization")
    sp.add_argument("problem")
    sp.add_argument("-o", "--output", default="-")
    sp.add_argument("--csv")
    tol_flags(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("forward", help="roots near the reference grid")
    sp.add_argument("realization")
    sp.add_argument("--window", type=int, default=8)
    sp.add_argument("--tol-newton", type=float, default=1e-12, dest="tol_newton")
    sp.add_argument("--no-box-check", action="store_true", dest="no_box_check")
    sp.add_argument("-o", "--output", default="-")
    sp.add_argument("--csv")
    sp.set_defaults(func=cmd_forward)

    sp = sub.add_parser("roundtrip", help="assign and verify in one step")
    sp.add_argument("problem")
    sp.add_argument("-o", "--output", default="-")
    solver_flags(sp)
    tol_flags(sp)
    sp.set_defaults(func=cmd_roundtrip)

    sp = sub.add_parser("gram-report", help="Gram conditioning of the reference grids")
    sp.add_argument("problem")
    sp.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32, 64])
    sp.add_argument("-o", "--output", default="-")
    sp.set_defaults(func=cmd_gram_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, DomainError) as exc:
        return _fail(exc, EXIT_INPUT)
    except (NeutralSpecError, np.linalg.LinAlgError) as exc:
        return _fail(exc, EXIT_NUMERIC)
    except OSError as exc:
        return _fail(InputError("<file>", str(exc)), EXIT_INPUT)
    except Exception as exc:  # unexpected: still report machine-readably
        return _fail(exc, EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
