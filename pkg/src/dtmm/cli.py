"""Command-line front end: ``dtmm solve|transfer|basis|singularities|verify``."""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from .coeffs import parse_problem
from .errors import DTMMError, EntirelyDegenerateError, ParseError
from .oracle import oracle_solve
from .propagate import find_singularities, propagate_robust, transfer_det_formula
from .solution import fundamental_basis, solve_grid
from .verify import run_checks

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_NUMERIC = 2
EXIT_DEGENERATE = 3


@dataclass
class RunReport:
    command: str
    inputs_digest: str
    outputs: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(v):
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v).__name__}")


def fmt(v):
    return format(float(v), ".17g")


def csv_text(header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(r if isinstance(r, str) else fmt(r) for r in row) + "\n")
    return buf.getvalue()


def _split(z):
    z = complex(z)
    return [z.real, z.imag]


def _digest(text, args):
    h = hashlib.sha256()
    h.update(text.encode())
    flags = {k: getattr(args, k) for k in ("command", "method", "step", "oracle")}
    for k in ("x1", "x2", "x0", "derivs"):
        if hasattr(args, k):
            flags[k] = getattr(args, k)
    h.update(json.dumps(flags, sort_keys=True).encode())
    return h.hexdigest()


def _load(args):
    with open(args.problem, encoding="utf-8") as fh:
        text = fh.read()
    p = parse_problem(text)
    opts = {}
    if args.method is not None:
        opts["method"] = args.method
    if args.step is not None:
        opts["step"] = args.step
    if opts:
        p = p.with_options(**opts)
    return p, text


def _sing_list(sings):
    return [{"xi": s.xi, "kind": s.kind, "gap": s.gap_at_xi} for s in sings]


def cmd_solve(p, args, report):
    if p.ic is None or p.grid is None:
        raise ParseError("solve needs 'ic' and 'grid' in the problem file")
    lo, hi = p.domain
    xs = np.linspace(lo, hi, p.grid)
    sol = solve_grid(p, lo, p.ic, xs, with_derivs=args.derivs)
    header = ["x", "re_f", "im_f"]
    cols = [sol.values]
    if args.derivs:
        for m in range(1, p.n):
            header += [f"re_f{m}", f"im_f{m}"]
            cols.append(sol.derivs[m])
    header.append("gap")
    ref = None
    if args.oracle:
        ref = oracle_solve(p, lo, p.ic, xs).values
        header += ["re_oracle_f", "im_oracle_f"]
    rows = []
    for i, x in enumerate(xs):
        row = [x]
        for c in cols:
            row += _split(c[i])
        row.append(sol.diagnostics["gap"][i])
        if ref is not None:
            row += _split(ref[i])
        rows.append(row)
    res = sol.diagnostics["residual"]
    report.diagnostics["max_residual"] = float(np.nanmax(res)) if np.any(np.isfinite(res)) else None
    report.diagnostics["min_gap"] = float(np.min(sol.diagnostics["gap"]))
    report.diagnostics["singularities"] = _sing_list(sol.diagnostics["singularities"])
    report.diagnostics["frozen_points"] = int(np.sum(sol.diagnostics["frozen"]))
    if ref is not None:
        scale = max(float(np.max(np.abs(ref))), 1e-300)
        report.diagnostics["max_oracle_rel_err"] = float(np.max(np.abs(sol.values - ref)) / scale)
    return csv_text(header, rows)


def cmd_transfer(p, args, report):
    tm = propagate_robust(p, args.x1, args.x2)
    det_num = tm.det
    det_ref = transfer_det_formula(p, tm.frame_from, tm.frame_to)
    dev = abs(det_num - det_ref) / abs(det_ref)
    rows = [[str(i), str(j)] + _split(tm.Q[i, j]) for i in range(p.n) for j in range(p.n)]
    report.diagnostics.update(det=det_num, det_formula=det_ref, det_rel_deviation=float(dev),
                              singularities=_sing_list(find_singularities(
                                  p, (min(args.x1, args.x2), max(args.x1, args.x2)))))
    return csv_text(["row", "col", "re_q", "im_q"], rows)


def cmd_basis(p, args, report):
    lo, hi = p.domain
    x0 = lo if args.x0 is None else args.x0
    xs = np.linspace(lo, hi, p.grid or 101)
    basis = fundamental_basis(p, x0, xs)
    W = basis[0].diagnostics["wronskian"]
    header = ["x"]
    for i in range(p.n):
        header += [f"re_g{i + 1}", f"im_g{i + 1}"]
    header += ["re_W", "im_W"]
    rows = []
    for k, x in enumerate(xs):
        row = [x]
        for g in basis:
            row += _split(g.values[k])
        rows.append(row + _split(W[k]))
    report.diagnostics["min_abs_wronskian"] = float(np.min(np.abs(W)))
    return csv_text(header, rows)


def cmd_singularities(p, args, report):
    sings = find_singularities(p)
    report.diagnostics["singularities"] = _sing_list(sings)
    return csv_text(["xi", "kind", "gap"], [[s.xi, s.kind, s.gap_at_xi] for s in sings])


def cmd_verify(p, args, report):
    results = run_checks(p)
    rows = [[r.name, "pass" if r.passed else "fail", r.deviation, r.tolerance] for r in results]
    report.diagnostics["checks"] = {r.name: {"passed": r.passed, "deviation": r.deviation,
                                             "tolerance": r.tolerance, "detail": r.detail}
                                    for r in results}
    failed = [r.name for r in results if not r.passed]
    report.diagnostics["failed"] = failed
    return csv_text(["check", "status", "deviation", "tolerance"], rows)


COMMANDS = {
    "solve": cmd_solve,
    "transfer": cmd_transfer,
    "basis": cmd_basis,
    "singularities": cmd_singularities,
    "verify": cmd_verify,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--method", choices=("ode", "exp"), default=None,
                        help="propagation method (overrides the problem file)")
    common.add_argument("--step", type=float, default=None, help="propagation step size")
    common.add_argument("--oracle", action="store_true",
                        help="also run the companion-system reference solver")
    common.add_argument("--out", default=None,
                        help="write the CSV here and print the run report to stdout")
    parser = argparse.ArgumentParser(prog="dtmm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="solve from the file's ic on its grid")
    s.add_argument("problem")
    s.add_argument("--derivs", action="store_true", help="add derivative columns")
    t = sub.add_parser("transfer", parents=[common], help="transfer matrix between two points")
    t.add_argument("problem")
    t.add_argument("x1", type=float)
    t.add_argument("x2", type=float)
    b = sub.add_parser("basis", parents=[common], help="fundamental solutions from unit envelopes")
    b.add_argument("problem")
    b.add_argument("--x0", type=float, default=None)
    g = sub.add_parser("singularities", parents=[common], help="list singular points")
    g.add_argument("problem")
    v = sub.add_parser("verify", parents=[common], help="run the identity checks")
    v.add_argument("problem")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    err = sys.stderr
    try:
        p, text = _load(args)
    except OSError as e:
        print(f"dtmm: cannot read {args.problem}: {e.strerror}", file=err)
        return EXIT_PARSE
    except ParseError as e:
        print(f"dtmm: parse error in {args.problem}: {e}", file=err)
        return EXIT_PARSE
    report = RunReport(args.command, _digest(text, args))
    try:
        body = COMMANDS[args.command](p, args, report)
    except ParseError as e:
        print(f"dtmm: {e}", file=err)
        return EXIT_PARSE
    except EntirelyDegenerateError as e:
        print(f"dtmm: {e}", file=err)
        return EXIT_DEGENERATE
    except DTMMError as e:
        print(f"dtmm: numeric failure: {e}", file=err)
        return EXIT_NUMERIC
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(body)
        report.outputs.append(args.out)
        print(report.to_json())
    else:
        sys.stdout.write(body)
        print(report.to_json(), file=err)
    if args.command == "verify" and report.diagnostics["failed"]:
        print(f"dtmm: check failed: {report.diagnostics['failed'][0]}", file=err)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
