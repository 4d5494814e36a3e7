"""
Command-line front end: ``mvm {gen,shape,map,eval,simulate,inspect}``.

Exit codes: 0 success, 2 usage or validation error, 3 SIC generator did not
converge, 4 optimizer diverged, 5 numerical fault in an evaluated curve.
Every written file gets a ``<file>.manifest.json`` next to it.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from typing import List, Optional

import numpy as np

from . import __version__
from .channel import ChannelConfig, simulate
from .core import coherence_matrix, load_constellation, random_constellation, save_constellation
from .errprob import (
    METHODS,
    BerCurve,
    CurveKind,
    SnrPoint,
    TargetUnreachable,
    evaluate_curve,
    pairwise_error_matrix,
    solve_snr_at_target,
    spectral_efficiency,
    welch_rankin_bound,
    write_curves_csv,
)
from .mapping import T0_FLOOR, AnnealSchedule, BitMapping, anneal_mapping, initial_temperature
from .shaping import (
    DescentConfig,
    DescentDiverged,
    Potential,
    SicConvergenceError,
    coherence_histogram,
    neighbor_graph,
    optimize,
    orthogonal_set,
    sic_povm,
    standard_hypercube,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SIC = 3
EXIT_DIVERGED = 4
EXIT_NUMERIC = 5


class UsageError(Exception):
    pass


class NumericalFault(Exception):
    pass


def parse_range(text: str) -> List[float]:
    """``"a:b:step"`` (inclusive) or a comma-separated list of dB values."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise ValueError
            count = int(math.floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1
            vals = [parts[0] + i * parts[2] for i in range(count)]
        else:
            vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"bad SNR range {text!r}; use start:stop:step or a comma list") from None
    if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
        raise UsageError("SNR grid must be non-empty and strictly increasing")
    return vals


def write_manifest(path: str, args: argparse.Namespace, started: float, inputs=(), seeds=()) -> None:
    manifest = {
        "command": ["mvm"] + list(args.argv),
        "subcommand": args.command,
        "seeds": [int(s) for s in seeds],
        "inputs": [os.path.abspath(p) for p in inputs],
        "output": os.path.abspath(path),
        "version": __version__,
        "wall_time_s": round(time.time() - started, 6),
    }
    with open(path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _load(path: str):
    try:
        return load_constellation(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"malformed constellation {path}: {exc}") from exc


def _coherence_summary(c) -> str:
    g = coherence_matrix(c)
    iu = np.triu_indices(c.m, 1)
    vals = g[iu]
    line = f"N={c.n} M={c.m} min_gamma={vals.min():.6g} max_gamma={vals.max():.6g}"
    if c.m > c.n:
        wr = welch_rankin_bound(c.n, c.m)
        line += f" welch={wr:.6g} welch_gap={vals.max() - wr:.3g}"
    return line


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    started = time.time()
    if args.n < 2:
        raise UsageError("--n must be >= 2")
    kind = args.kind
    if kind == "hypercube":
        c = standard_hypercube(args.n)
    elif kind == "sic":
        c = sic_povm(args.n, seed=args.seed)
    elif kind == "orthogonal":
        c = orthogonal_set(args.n, args.m if args.m is not None else args.n)
    else:
        if args.m is None or args.m < 1:
            raise UsageError("--kind random needs --m >= 1")
        c = random_constellation(args.n, args.m, seed=args.seed)
    save_constellation(c, args.out)
    write_manifest(args.out, args, started, seeds=[args.seed])
    print(_coherence_summary(c))
    return EXIT_OK


def _edge_summary(c) -> str:
    g = neighbor_graph(c, "stokes", 1.05)
    hist = coherence_histogram(c, "stokes", 0.05)
    low = hist.nonempty()[:3]
    bins = ", ".join(f"[{lo:.2f},{lo + 0.05:.2f}):{k}" for lo, k in low)
    return f"closest pairs={len(g.edges)} at d={g.min_distance:.4f}; lowest Stokes-distance bins {bins}"


def cmd_shape(args) -> int:
    started = time.time()
    c0 = _load(args.inp)
    if args.potential == "union-bound":
        if args.snr_db is None:
            raise UsageError("--potential union-bound needs --snr-db")
        pot = Potential.union_bound(SnrPoint.from_symbol_db(args.snr_db, c0.k), method="auto")
        cfg = DescentConfig(
            max_iters=args.iters, initial_step=args.step, grad_tolerance=args.grad_tol,
            seed=args.seed, normalize_energy=True,
        )
    else:
        pot = Potential.coulomb()
        cfg = DescentConfig(max_iters=args.iters, initial_step=args.step, grad_tolerance=args.grad_tol, seed=args.seed)
    out, trace = optimize(c0, pot, cfg)
    out.metadata["seed"] = str(args.seed)
    save_constellation(out, args.out)
    write_manifest(args.out, args, started, inputs=[args.inp], seeds=[args.seed])
    if args.trace:
        trace.to_csv(args.trace)
        write_manifest(args.trace, args, started, inputs=[args.inp], seeds=[args.seed])
    print(
        f"energy {trace.initial_energy:.12g} -> {trace.final_energy:.12g} "
        f"after {trace.accepted} steps ({trace.status}, grad {trace.final_grad_norm:.3g})"
    )
    print(_edge_summary(out))
    return EXIT_OK


def cmd_map(args) -> int:
    started = time.time()
    c = _load(args.inp)
    m = c.m
    if m < 2 or m & (m - 1):
        raise UsageError(f"M={m} is not a power of two")
    snr = SnrPoint.from_bit_db(args.snr_db, c.k)
    pmat = pairwise_error_matrix(c, snr)
    t0 = max(initial_temperature(c, snr, seed=args.seed, pmat=pmat), T0_FLOOR)
    sched = AnnealSchedule(t0, alpha=args.alpha, iters_per_temp=args.iters_per_temp, seed=args.seed)
    start = BitMapping(tuple(c.bits)) if c.bits is not None else None
    res = anneal_mapping(c, snr, sched, start=start, restarts=args.restarts)
    out = c.with_bits(np.array(res.mapping.labels))
    out.metadata.update({"mapping_snr_db": f"{args.snr_db:g}", "mapping_seed": str(args.seed)})
    save_constellation(out, args.out)
    write_manifest(args.out, args, started, inputs=[args.inp], seeds=[args.seed + r for r in range(args.restarts)])
    print(f"xi {res.start_xi:.6e} -> {res.xi:.6e} at bit SNR {args.snr_db:g} dB ({args.restarts} restart(s))")
    return EXIT_OK


def cmd_eval(args) -> int:
    started = time.time()
    c = _load(args.inp)
    if args.kind == "ber" and c.bits is None:
        raise UsageError("--kind ber needs bit labels in the input")
    grid = parse_range(args.snr_db)
    try:
        curve = evaluate_curve(c, grid, args.kind, args.method)
    except ValueError as exc:
        raise NumericalFault(str(exc)) from exc
    write_curves_csv(args.out, [curve])
    write_manifest(args.out, args, started, inputs=[args.inp])
    axis = "bit" if args.kind == "ber" else "symbol"
    for target in (1e-4, 1e-9):
        try:
            pt = solve_snr_at_target(c, target, "bit" if args.kind == "ber" else "symbol", mode=args.method)
            db = pt.bit_db if args.kind == "ber" else pt.symbol_db
            print(f"{args.kind} {target:g} reached at {axis} SNR {db:.2f} dB")
        except TargetUnreachable:
            print(f"{args.kind} {target:g} not reached in [-10, 60] dB")
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.time()
    c = _load(args.inp)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    grid = parse_range(args.snr_db)
    kind = args.kind or ("ber" if c.bits is not None else "ser")
    if kind == "ber" and c.bits is None:
        raise UsageError("--kind ber needs bit labels in the input")
    results = []
    vals = []
    for db in grid:
        snr = SnrPoint.from_bit_db(db, c.k) if kind == "ber" else SnrPoint.from_symbol_db(db, c.k)
        cfg = ChannelConfig(snr, args.random_phase, args.seed, args.trials, args.early_stop)
        res = simulate(c, cfg)
        results.append({"snr_db": db, **json.loads(res.to_json())})
        val = res.ber if kind == "ber" else res.ser
        vals.append(val)
        err = res.ber_stderr if kind == "ber" else res.ser_stderr
        print(f"{db:g} dB: {kind}={val:.6e} +- {err:.2e} ({res.trials} trials)")
    write_curves_csv(args.out, [BerCurve(tuple(grid), tuple(vals), CurveKind.MONTE_CARLO)], append=True)
    write_manifest(args.out, args, started, inputs=[args.inp], seeds=[args.seed])
    json_path = args.json or os.path.splitext(args.out)[0] + ".json"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(results, fh, indent=2)
        fh.write("\n")
    write_manifest(json_path, args, started, inputs=[args.inp], seeds=[args.seed])
    return EXIT_OK


def cmd_inspect(args) -> int:
    c = _load(args.inp)
    print(f"N={c.n} M={c.m} eta={spectral_efficiency(c):.6g} b/s/Hz/SDOF")
    print(_coherence_summary(c))
    hist = coherence_histogram(c, args.metric, args.bin)
    print(f"{args.metric} distance: min={hist.minimum:.6g} max={hist.maximum:.6g} mean={hist.mean:.6g}")
    for lo, k in hist.nonempty():
        print(f"  [{lo:.4f}, {lo + args.bin:.4f}): {k}")
    g = neighbor_graph(c, args.metric, args.factor)
    print(f"closest pairs={len(g.edges)} within {args.factor:g}x d_min={g.min_distance:.6g}")
    print(f"mean degree={g.mean_degree:.6g}")
    print("degree histogram: " + ", ".join(f"{d}:{k}" for d, k in g.degree_histogram().items()))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvm", description="Mode-vector-modulation constellation toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a constellation")
    g.add_argument("--kind", required=True, choices=["hypercube", "sic", "orthogonal", "random"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("shape", help="optimize constellation geometry")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--potential", choices=["thomson", "union-bound"], default="thomson")
    s.add_argument("--snr-db", type=float, help="symbol SNR per SDOF for the union-bound potential")
    s.add_argument("--iters", type=int, default=5000)
    s.add_argument("--step", type=float, default=0.05)
    s.add_argument("--grad-tol", type=float, default=1e-6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--trace")
    s.set_defaults(func=cmd_shape)

    m = sub.add_parser("map", help="optimize the bit labeling")
    m.add_argument("--in", dest="inp", required=True)
    m.add_argument("--snr-db", type=float, default=10.0, help="training bit SNR per SDOF (dB)")
    m.add_argument("--restarts", type=int, default=1)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--alpha", type=float, default=0.995)
    m.add_argument("--iters-per-temp", type=int)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_map)

    e = sub.add_parser("eval", help="union-bound curve over an SNR grid")
    e.add_argument("--in", dest="inp", required=True)
    e.add_argument("--snr-db", required=True, help="start:stop:step or comma list")
    e.add_argument("--kind", choices=["ser", "ber"], default="ser")
    e.add_argument("--method", choices=list(METHODS), default="auto")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    mc = sub.add_parser("simulate", help="Monte-Carlo error rates")
    mc.add_argument("--in", dest="inp", required=True)
    mc.add_argument("--snr-db", required=True)
    mc.add_argument("--kind", choices=["ser", "ber"])
    mc.add_argument("--trials", type=int, default=1_000_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--early-stop", action="store_true")
    mc.add_argument("--random-phase", action="store_true")
    mc.add_argument("--json")
    mc.add_argument("--out", required=True)
    mc.set_defaults(func=cmd_simulate)

    i = sub.add_parser("inspect", help="packing diagnostics")
    i.add_argument("--in", dest="inp", required=True)
    i.add_argument("--metric", choices=["stokes", "dd", "hs"], default="stokes")
    i.add_argument("--bin", type=float, default=0.05)
    i.add_argument("--factor", type=float, default=1.05)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    args.argv = argv
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mvm {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SicConvergenceError as exc:
        print(f"mvm {args.command}: {exc}", file=sys.stderr)
        return EXIT_SIC
    except DescentDiverged as exc:
        print(f"mvm {args.command}: optimizer diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except NumericalFault as exc:
        print(f"mvm {args.command}: numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"mvm {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
