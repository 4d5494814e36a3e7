"""Bit union bound against Monte-Carlo BER for a shaped and labeled (N, M) constellation."""

import argparse

import numpy as np

from mvm.channel import ChannelConfig, simulate
from mvm.core import random_constellation
from mvm.errprob import BerCurve, CurveKind, SnrPoint, evaluate_curve, write_curves_csv
from mvm.mapping import anneal_mapping
from mvm.shaping import Potential, optimize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--m", type=int, default=64)
    ap.add_argument("--snr-db", default="4:9:0.5", help="bit SNR grid start:stop:step")
    ap.add_argument("--trials", type=int, default=4_000_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="bound_vs_mc.csv")
    args = ap.parse_args()

    lo, hi, step = (float(v) for v in args.snr_db.split(":"))
    grid = np.arange(lo, hi + step / 2, step)
    c, trace = optimize(random_constellation(args.n, args.m, seed=args.seed), Potential.coulomb())
    c = c.with_bits(anneal_mapping(c).mapping.labels)
    print(f"shaped in {trace.accepted} steps ({trace.status})")

    bound = evaluate_curve(c, grid, kind="ber", method="exact")
    mc = []
    for db, ub in zip(grid, bound.values):
        res = simulate(c, ChannelConfig(SnrPoint.from_bit_db(db, c.k), seed=args.seed, trials=args.trials))
        mc.append(res.ber)
        print(f"{db:5.2f} dB  bound {ub:.4e}  mc {res.ber:.4e} +- {res.ber_stderr:.1e}  ratio {res.ber / ub:.3f}")
    write_curves_csv(args.out, [bound, BerCurve(tuple(grid), tuple(mc), CurveKind.MONTE_CARLO)])


if __name__ == "__main__":
    main()
