"""Command-line front end.

Every subcommand prints (or writes with ``--out``) one JSON report and exits
with 0 when every checked bound holds, 2 when one is violated and 1 on bad
input.  Reports carry the seed, the package version and a hash of the
package sources; they hold no timings, so equal inputs give equal bytes.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("waistkit")

EXIT_OK, EXIT_INPUT, EXIT_VIOLATION = 0, 1, 2
SUBCOMMANDS = ("sweep", "homotopy", "parametric", "assemble3", "minmax", "ode-check", "gamma-dist", "info")


class InputError(Exception):
    def __init__(self, message, **extra):
        super().__init__(message)
        self.extra = extra


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message, usage=self.format_usage().strip())


def source_hash() -> str:
    """SHA-256 over the package sources, in file-name order."""
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def _clean(obj):
    # JSON-safe copy; timings are dropped so reports are reproducible
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items() if k != "runtime"}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(report) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def check(name, value, bound, ok=None):
    """One row of the achieved-vs-bound table."""
    ok = value <= bound if ok is None else ok
    return {"quantity": name, "value": value, "bound": bound, "ok": bool(ok)}


# -- inputs ---------------------------------------------------------------------------


def load_surface(spec: str):
    from .generators import builtin
    from .mesh import load_mesh

    if spec.startswith("builtin:"):
        return builtin(spec)
    if not Path(spec).exists():
        raise InputError(f"no such mesh file: {spec}")
    return load_mesh(spec)


def load_function(mesh, spec: str):
    """``height:x|y|z`` (slightly tilted), ``coord:u|v`` on flat tori, or a file of vertex values."""
    from .morse import PLFunction

    kind, _, arg = spec.partition(":")
    if kind == "height":
        if mesh.embedding is None:
            raise InputError("height functions need an embedded mesh")
        axes = "xyz"
        if arg not in axes:
            raise InputError(f"unknown axis {arg!r}")
        i = axes.index(arg)
        X = mesh.embedding
        return PLFunction(mesh, X[:, i] + 1e-3 * X[:, (i + 1) % 3] + 1e-4 * X[:, (i + 2) % 3])
    if kind == "coord":
        uv = mesh.meta.get("uv")
        if uv is None or arg not in ("u", "v"):
            raise InputError("coord:u and coord:v need a flat torus mesh")
        j = "uv".index(arg)
        period = mesh.meta.get("period", (1.0, 1.0))[j]
        return PLFunction(mesh, uv[:, j], period=period)
    p = Path(spec)
    if not p.exists():
        raise InputError(f"unknown function spec {spec!r}")
    text = p.read_text()
    vals = json.loads(text) if p.suffix == ".json" else [float(t) for t in text.split()]
    vals = np.asarray(vals, float)
    if vals.shape != (mesh.n_vertices,):
        raise InputError(f"expected {mesh.n_vertices} vertex values, got {vals.size}")
    return PLFunction(mesh, vals)


def _morse(f, delta):
    from .morse import MorseError, _check_distinct, perturb_to_morse

    try:
        _check_distinct(f)
        return f
    except MorseError:
        return perturb_to_morse(f, delta)


def _workers(args):
    w = args.workers if args.workers is not None else int(os.environ.get("WAISTKIT_WORKERS", "1"))
    if w < 1:
        raise InputError("workers must be positive")
    return w


# -- plots ----------------------------------------------------------------------------


def _num(x):
    return f"{x:.6g}"


def _svg_lines(series, xlabel, ylabel, hline=None):
    xs = np.concatenate([np.asarray(s[0], float) for s in series])
    ys = np.concatenate([np.asarray(s[1], float) for s in series] + ([np.array([hline])] if hline is not None else []))
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = min(0.0, float(ys.min())), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    W, H, m = 480, 320, 40

    def px(x, y):
        return m + (x - x0) / (x1 - x0) * (W - 2 * m), H - m - (y - y0) / (y1 - y0) * (H - 2 * m)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">']
    out.append(f'<rect x="{m}" y="{m}" width="{W - 2 * m}" height="{H - 2 * m}" fill="none" stroke="#888"/>')
    colors = ["#1f5f99", "#b03a2e", "#1e8449"]
    for k, (x, y, _) in enumerate(series):
        pts = " ".join("{},{}".format(*map(_num, px(a, b))) for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{colors[k % 3]}" stroke-width="1.5" points="{pts}"/>')
    if hline is not None:
        _, yy = px(x0, hline)
        out.append(f'<line x1="{m}" y1="{_num(yy)}" x2="{W - m}" y2="{_num(yy)}" stroke="#555" stroke-dasharray="4 3"/>')
    out.append(f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="12" y="{H / 2}" font-size="12" transform="rotate(-90 12 {H / 2})" text-anchor="middle">{ylabel}</text>')
    out.append(f'<text x="{m}" y="{m - 8}" font-size="11">{ylabel} in [{_num(y0)}, {_num(y1)}]</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _svg_heat(Z, label):
    Z = np.asarray(Z, float)
    top = Z.max() if Z.size and Z.max() > 0 else 1.0
    c = 6
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{Z.shape[1] * c}" height="{Z.shape[0] * c + 20}">']
    for i, row in enumerate(Z):
        for j, z in enumerate(row):
            g = int(round(255 * (1 - z / top)))
            out.append(f'<rect x="{j * c}" y="{i * c}" width="{c}" height="{c}" fill="rgb(255,{g},{g})"/>')
    out.append(f'<text x="2" y="{Z.shape[0] * c + 15}" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plots(plot, fmt, path):
    """Write the plot of a report as SVG or CSV; returns the path or None when skipped."""
    if not plot or not len(plot.get("series") or plot.get("grid", [])):
        print("notice: empty series, no plot written", file=sys.stderr)
        return None
    if plot["kind"] == "lines":
        if fmt == "csv":
            rows = [f"series,{plot['x']},{plot['y']}"]
            for x, y, name in plot["series"]:
                rows += [f"{name},{_num(a)},{_num(b)}" for a, b in zip(x, y)]
            text = "\n".join(rows) + "\n"
        else:
            text = _svg_lines(plot["series"], plot["x"], plot["y"], plot.get("bound"))
    else:
        Z = np.asarray(plot["grid"], float)
        note = f"max={_num(Z.max())} bound={_num(plot['bound'])}" if plot.get("bound") is not None else f"max={_num(Z.max())}"
        if fmt == "csv":
            text = f"# {plot['rows']} by {plot['cols']}; {note}\n" + "\n".join(",".join(_num(z) for z in r) for r in Z) + "\n"
        else:
            text = _svg_heat(Z, note)
    Path(path).write_text(text)
    return str(path)


# -- subcommands ----------------------------------------------------------------------


def cmd_info(args):
    from .mesh import mesh_summary

    return {"mesh": mesh_summary(load_surface(args.mesh))}, [], None


def cmd_sweep(args):
    from .morse import fiber_profile
    from .sweepout import build_sweepout

    mesh = load_surface(args.mesh)
    cert = build_sweepout(mesh, delta=args.delta, tau=args.tol, eps0=args.eps0)
    bound = min(cert.certified_bound, cert.global_bound)
    rows = [
        check("max_fiber", cert.max_fiber, bound * (1 + cert.tau)),
        check("ledger_violations", len(cert.violations()), 0),
    ]
    X, Y = fiber_profile(cert.function)
    plot = {"kind": "lines", "x": "level", "y": "fiber length", "series": [(X, Y, "fiber")], "bound": bound}
    return {"certificate": cert.to_json()}, rows, plot


def cmd_homotopy(args):
    from .parametric import homotopy_sweepouts

    mesh = load_surface(args.mesh)
    f0, f1 = load_function(mesh, args.f0), load_function(mesh, args.f1)
    from .morse import max_fiber_length

    L = max(max_fiber_length(f0)[0], max_fiber_length(f1)[0])
    p = homotopy_sweepouts(f0, f1, args.epsilon * L, n_s=args.grid, n_x=args.grid)
    exact = bool(np.array_equal(p.vertex_values(0.0), p.f0.values) and np.array_equal(p.vertex_values(1.0), p.f1.values))
    rows = [check("fiber_bound", p.fiber_bound, p.bound), check("endpoints_exact", int(not exact), 0)]
    plot = {"kind": "heat", "grid": p.lengths, "rows": "s", "cols": "x", "bound": p.bound}
    return {"L": L, "path": p.to_json()}, rows, plot


def cmd_parametric(args):
    from .parametric import MetricFamily, parametric_sweepout

    a = load_surface(args.meshes[0])
    fam = MetricFamily.constant(a) if len(args.meshes) == 1 else MetricFamily.between(a, load_surface(args.meshes[1]))
    c = parametric_sweepout(fam, epsilon=args.epsilon, delta=args.delta, workers=_workers(args))
    rows = [check("max_fiber", c.max_fiber, c.theorem_bound), check("nodes_not_ok", sum(not n["ok"] for n in c.nodes), 0)]
    plot = {"kind": "lines", "x": "t", "y": "max fiber", "series": [([n["t"] for n in c.nodes], [n["max_fiber"] for n in c.nodes], "nodes")]}
    return {"certificate": c.to_json()}, rows, plot


def _heegaard(spec):
    from .generators import icosphere
    from .parametric import HeegaardFamily, long_ellipsoid_family, round_s3_family

    name, *rest = spec.split(":")
    try:
        if name == "round_s3":
            return round_s3_family(*(int(r) for r in rest))
        if name == "ellipsoid":
            return long_ellipsoid_family(float(rest[0]), *(int(r) for r in rest[1:]))
    except (ValueError, IndexError, TypeError) as exc:
        raise InputError(f"bad family spec {spec!r}: {exc}") from None
    p = Path(spec)
    if not p.exists():
        raise InputError(f"unknown family {spec!r}")
    d = json.loads(p.read_text())
    mesh = load_surface(d["mesh"]) if "mesh" in d else icosphere(int(d.get("level", 2)))
    return HeegaardFamily(mesh, d["t"], np.asarray(d["lengths"], float), d["slab"])


def cmd_assemble3(args):
    from .parametric import assemble_three_manifold

    h = _heegaard(args.family)
    c = assemble_three_manifold(h, epsilon=args.epsilon, delta=args.delta, workers=_workers(args))
    rows = [
        check("Lambda_max", c.Lambda_max, c.parametric.theorem_bound),
        check("C_real_finite", int(not math.isfinite(c.C_real)), 0),
    ]
    plot = {"kind": "heat", "grid": c.fiber_table, "rows": "t", "cols": "x", "bound": c.parametric.theorem_bound}
    return {"certificate": c.to_json()}, rows, plot


def cmd_minmax(args):
    from .gamma import morse_to_gamma
    from .nets import minmax_extract

    mesh = load_surface(args.mesh)
    f = _morse(load_function(mesh, args.f), args.delta)
    tr = minmax_extract(morse_to_gamma(f), iterations=args.iterations, tol=args.tol)
    rows = [check("limit_length", tr.length, tr.initial_max * (1 + 1e-12))]
    its = [L for L, _ in tr.iterations]
    plot = {"kind": "lines", "x": "iteration", "y": "max length", "series": [(list(range(len(its))), its, "max")]}
    return {"trace": tr.to_json()}, rows, plot


def _ode_one(item, tol):
    from .stability import assemble_operator, first_dirichlet_eigenvalue, infradius_check, weight_from_json

    lam, l, n = float(item["lambda"]), float(item["length"]), int(item.get("n", 512))
    w = weight_from_json(item["phi"], l)
    v = infradius_check(w, lam, l, n, tol=tol)
    conv = []
    m = n
    while m >= 16 and len(conv) < 4:
        conv.append((m, first_dirichlet_eigenvalue(assemble_operator(w, lam, l, m)).value))
        m //= 2
    return {"phi": item["phi"] if isinstance(item["phi"], str) else "inline", "lambda": lam, "n": n, "verdict": v.to_json(), "convergence": conv[::-1]}


def cmd_ode_check(args):
    from .stability import falsification_run

    tol = args.tol if args.tol is not None else 1e-6
    if args.falsify:
        r = falsification_run(args.falsify, seed=args.seed, n=args.n)
        return {"falsification": r}, [check("violations", r["violations"], 0)], None
    if args.manifest:
        items = json.loads(Path(args.manifest).read_text())
        if not isinstance(items, list):
            raise InputError("manifest must be a JSON list")
        base = Path(args.manifest).parent
        for it in items:
            if isinstance(it.get("phi"), str) and not it["phi"].startswith("const:") and not Path(it["phi"]).is_absolute():
                it["phi"] = str(base / it["phi"])
    else:
        if args.phi is None or args.lam is None or args.length is None:
            raise InputError("ode-check needs --phi, --lambda and --length (or --manifest / --falsify)")
        items = [{"phi": args.phi, "lambda": args.lam, "length": args.length, "n": args.n}]
    with ThreadPoolExecutor(_workers(args)) as ex:
        results = list(ex.map(lambda it: _ode_one(it, tol), items))
    rows = [check(f"implication[{i}]", int(not r["verdict"]["consistent"]), 0) for i, r in enumerate(results)]
    series = [([n for n, _ in r["convergence"]], [e for _, e in r["convergence"]], f"instance{i}") for i, r in enumerate(results)]
    plot = {"kind": "lines", "x": "n", "y": "first eigenvalue", "series": series}
    return {"instances": results}, rows, plot


def cmd_gamma_dist(args):
    from .gamma import almgren_degree, continuity_modulus, gamma_distance, morse_to_gamma

    mesh = load_surface(args.mesh)
    fam = morse_to_gamma(_morse(load_function(mesh, args.f), args.delta))
    i, j = (int(np.argmin(np.abs(fam.params - t))) for t in args.at)
    d = gamma_distance(fam.tuples[i], fam.tuples[j])
    deg = almgren_degree(fam)
    rows = [check("degree_defect", abs(abs(deg) - 1.0), 1e-9)]
    X = fam.params
    plot = {"kind": "lines", "x": "t", "y": "total length", "series": [(X, fam.lengths(), "length")]}
    out = {"params": [float(fam.params[i]), float(fam.params[j])], "distance": d, "degree": deg, "continuity_modulus": continuity_modulus(fam), "grid_size": len(X)}
    return out, rows, plot


COMMANDS = {
    "info": cmd_info,
    "sweep": cmd_sweep,
    "homotopy": cmd_homotopy,
    "parametric": cmd_parametric,
    "assemble3": cmd_assemble3,
    "minmax": cmd_minmax,
    "ode-check": cmd_ode_check,
    "gamma-dist": cmd_gamma_dist,
}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="relative audit tolerance (eigenvalue tolerance for ode-check)")
    common.add_argument("--delta", type=float, default=1e-6, help="additive slack and genericity perturbation")
    common.add_argument("--eps0", type=float, default=None, help="small-scale threshold of the sweepout recursion")
    common.add_argument("--epsilon", type=float, default=0.05, help="bilipschitz step / relative homotopy slack")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=None, help="parallel jobs (default $WAISTKIT_WORKERS or 1)")
    common.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    common.add_argument("--format", choices=("json", "svg", "csv"), default="json", help="also write a plot next to the report")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="waistkit", description="Certified sweepouts by short curves.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("info", parents=[common], help="mesh summary")
    s.add_argument("mesh")
    s = sub.add_parser("sweep", parents=[common], help="certified sweepout of a surface")
    s.add_argument("mesh")
    s = sub.add_parser("homotopy", parents=[common], help="homotopy between two sweepouts")
    s.add_argument("mesh")
    s.add_argument("--f0", default="height:z")
    s.add_argument("--f1", default="height:x")
    s.add_argument("--grid", type=int, default=64)
    s = sub.add_parser("parametric", parents=[common], help="sweepouts over a metric family")
    s.add_argument("meshes", nargs="+")
    s = sub.add_parser("assemble3", parents=[common], help="two-parameter sweepout of a 3-manifold")
    s.add_argument("family", help="round_s3[:level[:n]], ellipsoid:<e>[:level[:n]] or a JSON file")
    s = sub.add_parser("minmax", parents=[common], help="min-max geodesic from a height sweepout")
    s.add_argument("mesh")
    s.add_argument("--f", default="height:z")
    s.add_argument("--iterations", type=int, default=100)
    s = sub.add_parser("ode-check", parents=[common], help="inf-radius eigenvalue check")
    s.add_argument("--phi")
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--length", type=float)
    s.add_argument("--n", type=int, default=512)
    s.add_argument("--manifest")
    s.add_argument("--falsify", type=int, default=0, metavar="N", help="random instances to test")
    s = sub.add_parser("gamma-dist", parents=[common], help="distance between two tuples of a level-set family")
    s.add_argument("mesh")
    s.add_argument("--f", default="height:z")
    s.add_argument("--at", type=float, nargs=2, default=(0.25, 0.75))
    return p


def _validate(args):
    if args.tol is not None and not args.tol > 0:
        raise InputError("--tol must be positive")
    for name in ("delta", "epsilon"):
        if not getattr(args, name) > 0:
            raise InputError(f"--{name} must be positive")
    if args.eps0 is not None and not args.eps0 > 0:
        raise InputError("--eps0 must be positive")
    if args.command == "sweep" and args.tol is None:
        args.tol = 0.05
    if args.command == "minmax" and args.tol is None:
        args.tol = 1e-9


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv) -> int:
    """Run one subcommand; returns the exit code."""
    from .mesh import MeshError
    from .morse import MorseError
    from .parametric import BoundViolation
    from .sweepout import SweepoutError

    argv = list(argv)
    head = {"command": argv, "version": __version__, "source": source_hash()}
    out = None
    try:
        args = build_parser().parse_args(argv)
        out = args.out
        _validate(args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
        head["seed"] = args.seed
        t0 = time.perf_counter()
        body, rows, plot = COMMANDS[args.command](args)
        log.info("%s finished in %.3f s", args.command, time.perf_counter() - t0)
    except BoundViolation as exc:
        _emit(dumps(head | {"ok": False, "bounds": [], "error": {"type": "BoundViolation", "message": str(exc)}}), out)
        return EXIT_VIOLATION
    except SweepoutError as exc:
        # the construction could not certify a region
        _emit(dumps(head | {"ok": False, "bounds": [], "error": {"type": "SweepoutError", "message": str(exc)}}), out)
        return EXIT_VIOLATION
    except MeshError as exc:
        _emit(dumps(head | {"ok": False, "error": exc.to_json()}), out)
        return EXIT_INPUT
    except (InputError, MorseError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        err = {"type": type(exc).__name__, "message": str(exc)}
        err |= getattr(exc, "extra", {})
        _emit(dumps(head | {"ok": False, "error": err}), out)
        return EXIT_INPUT
    ok = all(r["ok"] for r in rows)
    report = head | body | {"bounds": rows, "ok": ok}
    if args.format != "json":
        stem = Path(out).with_suffix("") if out else Path(f"waistkit-{args.command}")
        report["plot"] = emit_plots(plot, args.format, f"{stem}.{args.format}")
    _emit(dumps(report), out)
    return EXIT_OK if ok else EXIT_VIOLATION


def main(argv=None):
    sys.exit(run(sys.argv[1:] if argv is None else argv))
