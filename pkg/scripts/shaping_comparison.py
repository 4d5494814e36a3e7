"""SNR needed for a target SER: hypercube vs Thomson vs union-bound shaping."""

import argparse

import numpy as np

from mvm.core import coherence_matrix, random_constellation
from mvm.errprob import solve_snr_at_target, welch_rankin_bound
from mvm.shaping import DescentConfig, Potential, optimize, standard_hypercube


def max_coherence(c):
    g = coherence_matrix(c)
    return float(g[~np.eye(c.m, dtype=bool)].max())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--target", type=float, default=1e-4)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cube = standard_hypercube(args.n)
    thomson, _ = optimize(random_constellation(args.n, cube.m, seed=args.seed), Potential.coulomb())
    snr = solve_snr_at_target(thomson, args.target)
    ub, _ = optimize(
        thomson, Potential.union_bound(snr, method="auto"), DescentConfig(max_iters=args.iters, normalize_energy=True)
    )
    print(f"(N, M) = ({args.n}, {cube.m}), Welch-Rankin coherence floor {welch_rankin_bound(args.n, cube.m):.4f}")
    ref = solve_snr_at_target(cube, args.target).symbol_db
    for name, c in (("hypercube", cube), ("thomson", thomson), ("union-bound", ub)):
        db = solve_snr_at_target(c, args.target).symbol_db
        print(f"{name:12s} SER {args.target:g} at {db:7.3f} dB  gain {ref - db:6.3f} dB  max coherence {max_coherence(c):.4f}")


if __name__ == "__main__":
    main()
