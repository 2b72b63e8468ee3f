"""Command line entry point: ``critmult analyze|solve|verify|experiment``.

Exit codes are part of the interface so that scripts can gate on them:

    analyze     0 done, 3 some verdict inconclusive, 1 usage error, 2 invalid input
    solve       0 Solved, 2 SingularSystem or Diverged, 4 MaxIter, 1 usage error
    verify      0 all suites pass, 2 a suite misses its threshold, 1 usage error
    experiment  0 the experiment's claim holds, 3 it does not, 1 usage error

A problem file that fails schema validation is a usage error (exit 1).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import math
import sys

import numpy as np

from . import gcatalog as gc
from . import oracle
from .criticality import check_noncritical, search_critical_multiplier, verdict_ic_M, verdict_ic_M1
from .errors import (CritMultError, NotAMultiplier, NotEqualityOnly, NotStationary, ProblemFileError,
                     UnknownExperiment, VertexEnumerationLimit)
from .newtonclassic import newton_kkt
from .problemfile import ProblemFile, load
from .ssnewton import SolverOptions, solve_ge
from .stationarity import PointPD, check_cq, faces, graph_points, local_data, multiplier_polytope, residual

log = logging.getLogger("critmult.cli")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_INCONCLUSIVE, EXIT_MAXITER = 0, 1, 2, 3, 4
EXPERIMENTS = ("critical-attraction", "superlinear")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _vec(text):
    if text is None:
        return None
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()], dtype=float)
    except ValueError as exc:
        raise UsageError(f"cannot parse vector {text!r}") from exc


def _pick(pf: ProblemFile, point: str, key: str, flag, flag_name: str, size: int):
    """Flag value or the file's point entry; the file wins on conflict."""
    stored = pf.points.get(point, {}).get(key)
    if flag is not None and flag.size != size:
        raise UsageError(f"{flag_name} needs {size} entries, got {flag.size}")
    if stored is not None:
        if flag is not None and not np.array_equal(flag, stored):
            log.warning("%s conflicts with points.%s.%s in the file; using the file value", flag_name, point, key)
        return stored
    return flag


def _fmt(v) -> str:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return "(" + ", ".join(f"{t:.6g}" for t in v) + ")"


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


# -- analyze -------------------------------------------------------------------------

def build_report(pf: ProblemFile, x, y, mode: str) -> dict:
    """Everything ``analyze`` prints, as a JSON-ready dict."""
    p = pf.problem
    poly = multiplier_polytope(p, x)
    if poly.empty:
        raise NotStationary("x has no multiplier for (v, u) = (0, 0)")
    y_res = y if y is not None else poly.point
    rg, rgr = residual(p, PointPD(x, y_res))
    cq, cert = check_cq(p, x)
    table = []
    for face in faces(poly):
        row = {"y": face.point.tolist(), "face_dim": face.dim}
        for kind in ("graphical", "limiting"):
            row[kind] = check_noncritical(p, x, face.point, kind).to_dict()
        table.append(row)
    kind = "graphical" if mode == "at" else "limiting"
    search = search_critical_multiplier(p, x, kind)
    verdicts = [verdict_ic_M(p, x, mode).to_dict()]
    if y is not None:
        verdicts.insert(0, verdict_ic_M1(p, x, y, mode).to_dict())
    return _json_safe({
        "problem": pf.name,
        "x": np.asarray(x, dtype=float).tolist(),
        "y": None if y is None else np.asarray(y, dtype=float).tolist(),
        "mode": mode,
        "residual": {"y": np.asarray(y_res).tolist(), "r_grad": rg, "r_graph": rgr},
        "cq": {"holds": bool(cq), "certificate": None if cert is None else cert.tolist()},
        "multipliers": poly.to_dict(),
        "criticality": table,
        "critical_search": {"kind": kind, "proof_path": search.proof_path,
                            "witness": None if search.witness is None else search.witness.to_dict()},
        "verdicts": verdicts,
    })


def report_inconclusive(report: dict) -> bool:
    if any(v["answer"] == "Inconclusive" for v in report["verdicts"]):
        return True
    return any(row[k]["status"] == "Inconclusive" for row in report["criticality"] for k in ("graphical", "limiting"))


def format_report(r: dict) -> str:
    lines = [f"problem: {r['problem']}", f"x = {_fmt(r['x'])}  mode: {r['mode']}",
             f"residual at y = {_fmt(r['residual']['y'])}: r_grad = {r['residual']['r_grad']:.3g}, "
             f"r_graph = {r['residual']['r_graph']:.3g}"]
    cq = r["cq"]
    lines.append("CQ: holds" if cq["holds"] else f"CQ: fails (certificate {_fmt(cq['certificate'])})")
    mp = r["multipliers"]
    if mp["vertices"] is not None:
        verts = ", ".join(_fmt(v) for v in mp["vertices"]) or "none"
        lines.append(f"multipliers: {'bounded' if mp['bounded'] else 'unbounded'}, vertices {verts}")
    if mp["rays"]:
        lines.append("recession rays: " + ", ".join(_fmt(v) for v in mp["rays"]))
    lines.append("criticality (face point, dim, graphical, limiting):")
    for row in r["criticality"]:
        lines.append(f"  {_fmt(row['y'])}  {row['face_dim']}  {row['graphical']['status']}  "
                     f"{row['limiting']['status']}")
    cs = r["critical_search"]
    if cs["witness"] is None:
        lines.append(f"critical multiplier search ({cs['kind']}, {cs['proof_path']}): none found")
    else:
        w = cs["witness"]
        lines.append(f"critical multiplier search ({cs['kind']}, {cs['proof_path']}): y = {_fmt(w['y'])}, "
                     f"witness dx = {_fmt(w['dx'])}, dy = {_fmt(w['dy'])}")
    for v in r["verdicts"]:
        line = f"{v['target']} isolated calmness: {v['answer']} [{v['proof_path']}]"
        if v.get("reason"):
            line += f": {v['reason']}"
        if v.get("witness"):
            line += f"; witness dx = {_fmt(v['witness']['dx'])}, dy = {_fmt(v['witness']['dy'])}"
        lines.append(line)
    return "\n".join(lines)


def cmd_analyze(args) -> int:
    pf = load(args.path)
    p = pf.problem
    x = _pick(pf, "stationary", "x", _vec(args.x), "--x", p.n)
    y = _pick(pf, "stationary", "y", _vec(args.y), "--y", p.m)
    if x is None:
        raise UsageError("--x is required (or a stationary point in the file)")
    try:
        report = build_report(pf, x, y, args.mode)
    except (NotStationary, NotAMultiplier, VertexEnumerationLimit) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(json.dumps(report, indent=2) if args.format == "json" else format_report(report))
    return EXIT_INCONCLUSIVE if report_inconclusive(report) else EXIT_OK


# -- solve ---------------------------------------------------------------------------

def _run_solver(p, method, x0, y0, opts):
    if method == "newton":
        return newton_kkt(p, x0, y0, opts)
    return solve_ge(p, x0, y0, opts)


def _status_code(status: str) -> int:
    return {"Solved": EXIT_OK, "MaxIter": EXIT_MAXITER}.get(status, EXIT_INVALID)


def cmd_solve(args) -> int:
    pf = load(args.path)
    p = pf.problem
    x0 = _pick(pf, "start", "x", _vec(args.x0), "--x0", p.n)
    y0 = _pick(pf, "start", "y", _vec(args.y0), "--y0", p.m)
    if x0 is None:
        raise UsageError("--x0 is required (or a start point in the file)")
    y0 = np.zeros(p.m) if y0 is None else y0
    opts = SolverOptions(tol=args.tol, max_iter=args.max_iter)
    try:
        trace = _run_solver(p, args.method, x0, y0, opts)
    except NotEqualityOnly as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.trace:
        trace.write_csv(args.trace)
    s = trace.summary()
    print(f"method: {s['method']}  status: {s['status']}  iterations: {s['iterations']}")
    if trace.message:
        print(f"message: {trace.message}")
    print(f"x = {_fmt(s['x'])}  y = {_fmt(s['y'])}")
    print(f"r_grad = {s['r_grad']:.3e}  r_graph = {s['r_graph']:.3e}")
    ratios = trace.ratios
    steps = trace.step_ratios
    if ratios.size:
        print(f"residual ratios (last 3): {_fmt(ratios[-3:])}")
    if steps.size:
        print(f"step ratios (last 3): {_fmt(steps[-3:])}")
    print(f"order estimate: {s['order_estimate']:.3g}")
    return _status_code(trace.status)


# -- verify --------------------------------------------------------------------------

def _tangent_suite(p, x, ys, samples, seed):
    """Analytic graph tangent cones vs the sampling oracle, per distinct graph point."""
    ld = local_data(p, x)
    seen, stats = set(), []
    rng = np.random.default_rng(seed)
    for y in ys:
        for g, gp in zip(p.g, graph_points(p, ld, y)):
            key = (g.to_dict().__repr__(), round(gp.w, 12), round(gp.y, 12))
            if key in seen:
                continue
            seen.add(key)
            S = oracle.graph_set(g)
            base = np.array([gp.w, gp.y])
            th = rng.uniform(0, 2 * np.pi, samples)
            D = np.column_stack([np.cos(th), np.sin(th)])
            for kind in ("T", "Tsharp"):
                cone = gc.tangent_cone_graph(g, gp, kind)
                gens = [d for c in cone.members for d in _cone_probes(c)]
                P = np.vstack([D, *gens]) if gens else D
                ref = np.array([cone.contains(d, 1e-8) for d in P])
                got = oracle.tangent_batch(S, base, P, kind, oracle.TangentParams(seed=seed))
                stats.append((f"{g.kind} at ({gp.w:.3g}, {gp.y:.3g}) {kind}", float(np.mean(ref == got))))
    return stats


def _cone_probes(c):
    """Unit vectors on the boundary rays of a planar cone, where the oracle is most fragile."""
    out = []
    for d in oracle.sphere_directions(2, 0.25):
        d = d / np.linalg.norm(d)
        if c.contains(d, 1e-12):
            out.append(d[None, :])
    return out


def cmd_verify(args) -> int:
    pf = load(args.path)
    p = pf.problem
    x = _pick(pf, "stationary", "x", _vec(args.x), "--x", p.n)
    if x is None:
        raise UsageError("--x is required (or a stationary point in the file)")
    ok = True
    try:
        poly = multiplier_polytope(p, x)
    except VertexEnumerationLimit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if poly.empty:
        print("error: x is not stationary", file=sys.stderr)
        return EXIT_INVALID
    ys = [f.point for f in faces(poly)]

    for label, agree in _tangent_suite(p, x, ys, args.samples, args.seed):
        passed = agree >= 0.99
        ok &= passed
        print(f"tangent {label}: agreement {agree:.4f} {'pass' if passed else 'FAIL'}")

    if p.n <= 2 and p.m <= 2:
        for y in ys:
            nc = check_noncritical(p, x, y, "graphical")
            w = oracle.grid_critical_search(p, x, ybar=y)
            passed = nc.noncritical == (w is None)
            ok &= passed
            print(f"noncriticality at y = {_fmt(y)}: analytic {nc.status}, grid "
                  f"{'none' if w is None else 'witness'} {'pass' if passed else 'FAIL'}")
        res = search_critical_multiplier(p, x, "graphical")
        w = oracle.grid_critical_search(p, x)
        passed = (res.witness is None) == (w is None)
        ok &= passed
        a = "none" if res.witness is None else f"y = {_fmt(res.witness.y)}"
        b = "none" if w is None else f"y = {_fmt(w.y)}"
        print(f"critical multiplier search: analytic {a}, grid {b} {'pass' if passed else 'FAIL'}")
    else:
        print("grid suites skipped (n or m above 2)")

    for name, e in [("f0", p.f0), *((f"F{i + 1}", e) for i, e in enumerate(p.F))]:
        err = oracle.fd_check(e, x)
        passed = err <= 1e-6
        ok &= passed
        print(f"fd check {name}: {err:.2e} {'pass' if passed else 'FAIL'}")
    print("verify: pass" if ok else "verify: FAIL")
    return EXIT_OK if ok else EXIT_INVALID


# -- experiments ---------------------------------------------------------------------

def _critical_attraction(pf: ProblemFile, args):
    """Start grid in x_bar + [-1, 1]^n times [-1, 1]^m; how many runs end near the critical multiplier?"""
    p = pf.problem
    x = _pick(pf, "stationary", "x", _vec(args.x), "--x", p.n)
    if x is None:
        raise UsageError("--x is required (or a stationary point in the file)")
    res = search_critical_multiplier(p, x, "graphical")
    if res.witness is None:
        raise UsageError("no critical multiplier at this point")
    ycrit = res.witness.y
    if args.grid ** (p.n + p.m) > 10 ** 4:
        raise UsageError("start grid too large; lower --grid")
    axis = np.linspace(-1.0, 1.0, args.grid)
    starts = [np.array(s) for s in itertools.product(axis, repeat=p.n + p.m)]
    opts = SolverOptions(tol=args.tol, max_iter=args.max_iter)
    rows, hits = [], 0
    for s in starts:
        x0, y0 = x + s[:p.n], s[p.n:]
        trace = _run_solver(p, args.method, x0, y0, opts)
        dist = float(np.linalg.norm(trace.final.y - ycrit))
        hits += dist <= 0.02
        rows.append(_row(x0, y0, trace, {"dist_to_critical": dist}))
    frac = hits / len(starts)
    msg = f"critical multiplier {_fmt(ycrit)}: {hits}/{len(starts)} runs end within 0.02 ({frac:.0%})"
    return rows, frac >= 0.9, msg


def _superlinear(pf: ProblemFile, args):
    """Seeded starts in a ball around the stationary pair; all should finish in few iterations."""
    p = pf.problem
    x = _pick(pf, "stationary", "x", _vec(args.x), "--x", p.n)
    y = _pick(pf, "stationary", "y", _vec(args.y), "--y", p.m)
    if x is None or y is None:
        raise UsageError("the stationary pair (x, y) is required")
    rng = np.random.default_rng(args.seed)
    k = p.n + p.m
    opts = SolverOptions(tol=args.tol, max_iter=args.max_iter)
    rows, good = [], 0
    for _ in range(args.starts):
        d = rng.standard_normal(k)
        d *= args.radius * rng.uniform() ** (1 / k) / np.linalg.norm(d)
        x0, y0 = x + d[:p.n], y + d[p.n:]
        trace = _run_solver(p, args.method, x0, y0, opts)
        good += trace.status == "Solved" and trace.iterations <= args.iter_bound
        rows.append(_row(x0, y0, trace, {}))
    msg = f"{good}/{args.starts} starts reach tol {args.tol:g} within {args.iter_bound} iterations"
    return rows, good == args.starts, msg


def _row(x0, y0, trace, extra):
    s = trace.summary()
    row = {**{f"x0_{i + 1}": v for i, v in enumerate(x0)}, **{f"y0_{i + 1}": v for i, v in enumerate(y0)},
           "status": s["status"], "iterations": s["iterations"],
           **{f"y_{i + 1}": v for i, v in enumerate(s["y"])}, **extra,
           "last_ratio": s["last_ratio"], "last_step_ratio": s["last_step_ratio"]}
    return row


def run_experiment(name: str, pf: ProblemFile, args):
    if name == "critical-attraction":
        return _critical_attraction(pf, args)
    if name == "superlinear":
        return _superlinear(pf, args)
    raise UnknownExperiment(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")


def cmd_experiment(args) -> int:
    if args.name not in EXPERIMENTS:
        raise UnknownExperiment(f"unknown experiment {args.name!r}; choose from {', '.join(EXPERIMENTS)}")
    pf = load(args.path)
    rows, passed, msg = run_experiment(args.name, pf, args)
    rows.sort(key=lambda r: tuple(v for k, v in r.items() if k.startswith(("x0_", "y0_"))))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    finally:
        if args.out:
            out.close()
    print(f"{args.name}: {msg}: {'pass' if passed else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if passed else EXIT_INCONCLUSIVE


# -- wiring --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="critmult", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="multipliers, criticality and isolated calmness verdicts")
    a.add_argument("path", help="problem JSON file or bundled name")
    a.add_argument("--x", help="point x as comma list, e.g. --x=-1,0")
    a.add_argument("--y", help="multiplier for the M1 verdict")
    a.add_argument("--mode", choices=("at", "around"), default="at")
    a.add_argument("--format", choices=("text", "json"), default="text")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("solve", help="run a Newton-type solver and write a CSV trace")
    s.add_argument("path", help="problem JSON file or bundled name")
    s.add_argument("--method", choices=("ssn", "newton"), default="ssn")
    s.add_argument("--x0", help="starting x as comma list")
    s.add_argument("--y0", help="starting multiplier as comma list")
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--max-iter", type=int, default=50)
    s.add_argument("--trace", help="CSV file for the per-iteration trace")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="compare analytic results with the brute-force oracles")
    v.add_argument("path", help="problem JSON file or bundled name")
    v.add_argument("--x", help="stationary point as comma list")
    v.add_argument("--samples", type=int, default=2000, help="probe directions per tangent case")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("experiment", help="start-point sweeps: " + ", ".join(EXPERIMENTS))
    e.add_argument("name", help="experiment name")
    e.add_argument("path", help="problem JSON file or bundled name")
    e.add_argument("--method", choices=("ssn", "newton"), default="ssn")
    e.add_argument("--x")
    e.add_argument("--y")
    e.add_argument("--tol", type=float, default=1e-12)
    e.add_argument("--max-iter", type=int, default=50)
    e.add_argument("--grid", type=int, default=10, help="points per axis (critical-attraction)")
    e.add_argument("--starts", type=int, default=20, help="random starts (superlinear)")
    e.add_argument("--radius", type=float, default=0.1)
    e.add_argument("--iter-bound", type=int, default=8)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="CSV file for per-start results")
    e.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ProblemFileError, UnknownExperiment) as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE
    except CritMultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
