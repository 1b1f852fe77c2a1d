"""Command-line entry point.

Every subcommand that writes ``--out`` also writes ``<out>.manifest.json``
with the command line, inputs, versions and output hashes; ``replay`` reruns
a manifest into a scratch directory and compares the JSON bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import shutil
import sys
import tempfile
import time
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from . import output
from .errors import LivsicError
from .sampling import set_default_threads

PROG = "livsiclab"
OUTPUT_FLAGS = ("--out", "--svg", "--csv")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a non-negative integer, got {s!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"seed must be a non-negative integer, got {v}")
    return v


def _positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {s!r}")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=PROG, description="Livsic / CLT laboratory for toral Anosov maps and their suspensions.")
    p.add_argument("--threads", type=_positive_int, default=None, help="worker pool size (default: logical cores)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def cmd(name, help_, seed=False, out_required=True):
        sp = sub.add_parser(name, help=help_)
        if seed:
            sp.add_argument("--seed", type=_seed, required=True)
        sp.add_argument("--out", required=out_required, help="JSON output path")
        return sp

    sp = cmd("periodic-orbits", "enumerate periodic orbits")
    sp.add_argument("--map", required=True)
    sp.add_argument("--max-period", type=_positive_int, required=True)
    sp.add_argument("--cap", type=_positive_int, default=10 ** 6)

    sp = cmd("obstruction", "periodic-orbit obstructions of an observable", out_required=False)
    sp.add_argument("--map", required=True)
    sp.add_argument("--observable", required=True)
    sp.add_argument("--max-period", type=_positive_int, required=True)
    sp.add_argument("--cap", type=_positive_int, default=10 ** 6)

    sp = cmd("solve", "reconstruct a transfer function along one orbit", seed=True)
    sp.add_argument("--map", required=True)
    sp.add_argument("--observable", required=True)
    sp.add_argument("--steps", type=_positive_int, required=True)
    sp.add_argument("--resolution", type=_positive_int, default=32)
    sp.add_argument("--svg")
    sp.add_argument("--csv")

    sp = cmd("clt", "CLT report for Birkhoff sums", seed=True)
    sp.add_argument("--map", required=True)
    sp.add_argument("--observable", required=True)
    sp.add_argument("--n", type=_positive_int, nargs="+", required=True)
    sp.add_argument("--count", type=_positive_int, required=True)
    sp.add_argument("--thresholds", type=float, nargs="+", default=[0.0])
    sp.add_argument("--lags", type=_positive_int, default=16)
    sp.add_argument("--svg")

    sp = cmd("certify", "search for a certified tail-measure time", seed=True)
    sp.add_argument("--map", required=True)
    sp.add_argument("--observable", required=True)
    sp.add_argument("--C", type=float, required=True, dest="C")
    sp.add_argument("--epsilon", type=_positive_float, required=True)
    sp.add_argument("--orbit-period", type=_positive_int, required=True)
    sp.add_argument("--N-max", type=_positive_int, required=True, dest="N_max")
    sp.add_argument("--count", type=_positive_int, required=True)
    sp.add_argument("--C-tilde", type=_positive_float, default=None, dest="C_tilde")
    sp.add_argument("--replicate-seed", type=_seed, default=None)

    sp = cmd("witness", "rigidity witness for an obstructed observable", seed=True)
    sp.add_argument("--map", required=True)
    sp.add_argument("--observable", required=True)
    sp.add_argument("--N-max", type=_positive_int, required=True, dest="N_max")
    sp.add_argument("--count", type=_positive_int, required=True)
    sp.add_argument("--C", type=_positive_float, default=1.0, dest="C")
    sp.add_argument("--epsilon", type=_positive_float, default=0.1)
    sp.add_argument("--max-period", type=_positive_int, default=8)

    sp = cmd("flow-obstruction", "flow integrals over periodic flow orbits", out_required=False)
    sp.add_argument("--map", required=True)
    sp.add_argument("--roof", required=True)
    sp.add_argument("--observable", required=True)
    sp.add_argument("--max-period", type=_positive_int, required=True)

    sp = cmd("flow-clt", "CLT report for flow integrals", seed=True)
    sp.add_argument("--map", required=True)
    sp.add_argument("--roof", required=True)
    sp.add_argument("--observable", required=True)
    sp.add_argument("--t", type=_positive_float, nargs="+", required=True)
    sp.add_argument("--count", type=_positive_int, required=True)
    sp.add_argument("--thresholds", type=float, nargs="+", default=[0.0])
    sp.add_argument("--svg")

    sp = cmd("demo", "equivalence audit on the built-in suite", seed=True, out_required=False)
    sp.add_argument("--samples", type=_positive_int, default=10000)
    sp.add_argument("--steps", type=_positive_int, default=10 ** 6)

    sp = sub.add_parser("replay", help="rerun a manifest and compare output hashes")
    sp.add_argument("manifest")
    return p


# inputs

def _load(path):
    from .specs import load_json
    try:
        return load_json(path)
    except json.JSONDecodeError as e:
        raise LivsicError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})")


def _map(args):
    from .specs import map_from_spec
    return map_from_spec(_load(args.map))


def _observable(args):
    from .observables import TrigObservable
    return TrigObservable.from_spec(_load(args.observable))


def _roof(args):
    from .flow import RoofFunction
    return RoofFunction.from_spec(_load(args.roof))


# commands; each returns (json payload, extra files {flag: text}, inputs for the manifest)

def cmd_periodic_orbits(args):
    from .orbits import count_period_n_points, orbits_up_to
    from .specs import map_to_spec
    tmap = _map(args)
    orbits = orbits_up_to(tmap, args.max_period, args.cap)
    payload = {
        "map": map_to_spec(tmap),
        "max_period": args.max_period,
        "counts": [{"n": n, "points": count_period_n_points(tmap, n)} for n in range(1, args.max_period + 1)],
        "orbit_count": len(orbits),
        "orbits": [o.to_dict() for o in orbits],
    }
    print(f"{len(orbits)} orbits up to period {args.max_period}")
    return payload, {}, {"map": payload["map"]}


def cmd_obstruction(args):
    from .orbits import ZERO_TOL, orbit_obstruction, orbits_up_to
    from .specs import map_to_spec
    tmap, phi = _map(args), _observable(args)
    rows = []
    for o in orbits_up_to(tmap, args.max_period, args.cap):
        d = o.to_dict()
        d["obstruction"] = orbit_obstruction(phi, o)
        rows.append(d)
    worst = max((abs(r["obstruction"]) for r in rows), default=0.0)
    payload = {"map": map_to_spec(tmap), "observable": phi.to_spec(), "max_period": args.max_period,
               "tolerance": ZERO_TOL, "max_abs_obstruction": worst, "all_zero": worst <= ZERO_TOL, "orbits": rows}
    print(f"{len(rows)} orbits, max |obstruction| = {worst:.3e}: {'all zero' if worst <= ZERO_TOL else 'obstructed'}")
    return payload, {}, {"map": payload["map"], "observable": payload["observable"]}


def cmd_solve(args):
    from .livsic import coboundary_residual, random_start, solve_on_orbit
    from .specs import map_to_spec
    tmap, phi = _map(args), _observable(args)
    x0 = random_start(args.seed)
    grid = solve_on_orbit(phi, tmap, x0, args.steps, args.resolution)
    res = coboundary_residual(grid, phi, tmap, seed=args.seed) if grid.coverage >= 0.99 else None
    payload = {"map": map_to_spec(tmap), "observable": phi.to_spec(), "seed": args.seed, "steps": args.steps,
               "residual": res.to_dict() if res else None, "grid": grid.to_dict()}
    files = {}
    if args.svg:
        files["--svg"] = output.heatmap_svg(grid.values, title="transfer function")
    if args.csv:
        files["--csv"] = grid
    msg = f"coverage {grid.coverage:.1%}, max cell spread {grid.max_spread:.4g}"
    if res:
        msg += f", residual {res.residual:.4g} (floor {res.noise_floor:.4g})"
    print(msg)
    return payload, files, {"map": payload["map"], "observable": payload["observable"]}


def cmd_clt(args):
    from .clt import clt_report, sample_birkhoff
    from .specs import map_to_spec
    tmap, phi = _map(args), _observable(args)
    rep = clt_report(phi, tmap, args.n, args.count, args.seed, thresholds=args.thresholds, lags=args.lags)
    payload = {"map": map_to_spec(tmap), "observable": phi.to_spec(), **rep}
    files = {}
    if args.svg:
        n = max(args.n)
        s2 = rep["rows"][-1]["sigma_squared"]
        vals = sample_birkhoff(phi, tmap, n, args.count, args.seed).values
        files["--svg"] = output.histogram_svg(vals / math.sqrt(s2 * n), title=f"normalized Birkhoff sums, n = {n}")
    for r in rep["rows"]:
        print(f"n = {r['n']}: sigma^2 = {r['sigma_squared']:.6g} +- {r['standard_error']:.2g}, KS = {r['ks_distance']}")
    return payload, files, {"map": payload["map"], "observable": payload["observable"]}


def cmd_certify(args):
    from .certify import certify_type, replicate
    from .errors import NoObstructionError
    from .orbits import orbit_obstruction, orbits_of_period
    tmap, phi = _map(args), _observable(args)
    orbits = orbits_of_period(tmap, args.orbit_period)
    scored = [(orbit_obstruction(phi, o), o) for o in orbits]
    if not scored:
        raise NoObstructionError(f"no orbit of period {args.orbit_period}")
    value, orbit = max(scored, key=lambda t: t[0])
    cert = certify_type(tmap, phi, args.C, args.epsilon, orbit, args.N_max, args.count, args.seed,
                        C_tilde=args.C_tilde)
    payload = cert.to_dict()
    if args.replicate_seed is not None and cert.certified:
        payload["replication"] = replicate(cert, args.replicate_seed).to_dict()
    print(f"k_found = {cert.k_found} (estimate {cert.measure_estimate:.6g}, radius {cert.confidence_radius:.3g})")
    return payload, {}, payload["inputs"]


def cmd_witness(args):
    from .certify import rigidity_witness
    from .specs import map_to_spec
    tmap, phi = _map(args), _observable(args)
    w = rigidity_witness(tmap, phi, args.N_max, args.count, args.seed, C=args.C, epsilon=args.epsilon,
                         max_period=args.max_period)
    payload = w.to_dict()
    print(w.conclusion)
    return payload, {}, {"map": map_to_spec(tmap), "observable": phi.to_spec()}


def _suspension_observable(args):
    from .flow import SuspensionObservable
    return SuspensionObservable.from_spec(_load(args.observable))


def cmd_flow_obstruction(args):
    from .flow import flow_orbit_obstruction, periodic_flow_orbit, return_error
    from .orbits import ZERO_TOL, orbits_up_to
    from .specs import map_to_spec
    tmap, roof, phi = _map(args), _roof(args), _suspension_observable(args)
    rows = []
    for o in orbits_up_to(tmap, args.max_period):
        fo = periodic_flow_orbit(o, roof)
        d = fo.to_dict()
        d["obstruction"] = flow_orbit_obstruction(phi, fo, roof, tmap)
        d["return_error"] = return_error(fo, roof, tmap)
        rows.append(d)
    worst = max((abs(r["obstruction"]) for r in rows), default=0.0)
    payload = {"map": map_to_spec(tmap), "roof": roof.to_spec(), "observable": phi.to_spec(),
               "max_period": args.max_period, "max_abs_obstruction": worst, "orbits": rows}
    print(f"{len(rows)} flow orbits, max |obstruction| = {worst:.3e}")
    return payload, {}, {"map": payload["map"], "roof": payload["roof"], "observable": payload["observable"]}


def cmd_flow_clt(args):
    from .flow import flow_clt_report
    from .specs import map_to_spec
    tmap, roof, phi = _map(args), _roof(args), _suspension_observable(args)
    rep = flow_clt_report(phi, roof, tmap, args.t, args.count, args.seed, thresholds=args.thresholds)
    payload = {"map": map_to_spec(tmap), "roof": roof.to_spec(), "observable": phi.to_spec(), **rep}
    files = {}
    if args.svg:
        files["--svg"] = _flow_histogram(phi, roof, tmap, args, rep)
    for r in rep["rows"]:
        print(f"t = {r['t']:g}: sigma^2 = {r['sigma_squared']:.6g} +- {r['standard_error']:.2g}, KS = {r['ks_distance']}")
    return payload, files, {"map": payload["map"], "roof": payload["roof"], "observable": payload["observable"]}


def _flow_histogram(phi, roof, tmap, args, rep):
    from .flow import flow_cocycle_arrays, sample_suspension
    t = max(args.t)
    pts = sample_suspension(roof, args.count, args.seed)
    vals = flow_cocycle_arrays(phi, t, pts.w1, pts.w2, pts.h, roof, tmap) - rep["space_mean"] * t
    return output.histogram_svg(vals / math.sqrt(rep["rows"][-1]["sigma_squared"] * t),
                                title=f"normalized flow integrals, t = {t:g}")


def cmd_demo(args):
    from .audit import equivalence_audit, format_table
    rows = equivalence_audit(args.seed, samples=args.samples, steps=args.steps)
    print(format_table(rows))
    payload = {"seed": args.seed, "samples": args.samples, "steps": args.steps,
               "all_passed": all(r.passed for r in rows), "rows": [r.to_dict() for r in rows]}
    if not payload["all_passed"]:
        print("audit found inconsistent observables", file=sys.stderr)
    return payload, {}, {}


COMMANDS = {
    "periodic-orbits": cmd_periodic_orbits,
    "obstruction": cmd_obstruction,
    "solve": cmd_solve,
    "clt": cmd_clt,
    "certify": cmd_certify,
    "witness": cmd_witness,
    "flow-obstruction": cmd_flow_obstruction,
    "flow-clt": cmd_flow_clt,
    "demo": cmd_demo,
}


def _versions() -> dict:
    import scipy
    try:
        own = metadata.version(PROG)
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {PROG: own, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def _write_outputs(args, payload, files) -> list:
    outs = []
    if args.out:
        outs.append({"flag": "--out", "path": args.out, "sha256": output.write_json(args.out, payload)})
    elif payload is not None:
        sys.stdout.write(output.dumps(payload))
    for flag, content in files.items():
        path = getattr(args, flag[2:])
        if flag == "--csv":
            grid = content
            vals, spr = grid.values, grid.spread
            rows = [(i, j, int(grid.visits[i, j]), float(vals[i, j]), float(spr[i, j]))
                    for i in range(grid.resolution) for j in range(grid.resolution)]
            output.write_csv(path, ["i", "j", "visits", "value", "spread"], rows)
        else:
            Path(path).write_text(content, encoding="utf-8")
        outs.append({"flag": flag, "path": path, "sha256": output.sha256_file(path)})
    return outs


def _write_manifest(argv, args, inputs, outs, elapsed) -> None:
    manifest = {
        "argv": list(argv),
        "command": args.command,
        "seed": getattr(args, "seed", None),
        "threads": args.threads,
        "inputs": inputs,
        "versions": _versions(),
        "started_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_clock_seconds": elapsed,
        "outputs": outs,
    }
    Path(args.out + ".manifest.json").write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")


def replay(manifest_path) -> int:
    manifest = _load(manifest_path)
    argv = list(manifest["argv"])
    outs = manifest.get("outputs", [])
    tmp = Path(tempfile.mkdtemp(prefix="livsiclab-replay-"))
    try:
        flags = {o["flag"]: o for o in outs}
        new_paths = {}
        i = 0
        while i < len(argv):
            if argv[i] in flags and i + 1 < len(argv):
                new_paths[argv[i]] = str(tmp / (argv[i][2:] + Path(argv[i + 1]).suffix))
                argv[i + 1] = new_paths[argv[i]]
                i += 2
            else:
                i += 1
        code = run(argv)
        if code:
            return code
        ok = True
        for o in outs:
            if o["flag"] != "--out":
                continue
            got = output.sha256_file(new_paths["--out"])
            same = got == o["sha256"]
            ok &= same
            print(f"{o['path']}: {'identical' if same else 'DIFFERS'} ({got[:16]})")
        return 0 if ok else 1
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def run(argv) -> int:
    argv = list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 2
        set_default_threads(args.threads)
        if args.command == "replay":
            return replay(args.manifest)
        t0 = time.perf_counter()
        payload, files, inputs = COMMANDS[args.command](args)
        outs = _write_outputs(args, payload, files)
        if args.out:
            _write_manifest(argv, args, inputs, outs, time.perf_counter() - t0)
        if args.command == "demo" and not payload["all_passed"]:
            return 1
        return 0
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        name = e.filename or (e.args[0] if e.args else "")
        print(f"{PROG}: error: {name if e.filename else e}", file=sys.stderr)
        return 2
    except (LivsicError, ValueError, KeyError, TypeError) as e:
        msg = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"{PROG}: error: {msg}", file=sys.stderr)
        return 2
    finally:
        set_default_threads(None)


def main() -> None:
    try:
        code = run(sys.argv[1:])
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
