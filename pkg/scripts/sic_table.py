"""SIC constellations: coherence, Welch-Rankin gap, spectral efficiency and bit SNR at a target."""

import argparse
import time

import numpy as np

from mvm.core import coherence_matrix
from mvm.errprob import solve_snr_at_target, spectral_efficiency, welch_rankin_bound
from mvm.shaping import sic_povm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=16)
    ap.add_argument("--target", type=float, default=1e-9)
    args = ap.parse_args()

    print(" N    M   max coh    Welch gap   eta     bit dB   time")
    for n in range(2, args.n_max + 1):
        t0 = time.perf_counter()
        c = sic_povm(n)
        g = coherence_matrix(c)[~np.eye(c.m, dtype=bool)].max()
        line = f"{n:2d} {c.m:4d}  {g:.6f}  {g - welch_rankin_bound(n, c.m):.1e}  {spectral_efficiency(c):.4f}"
        if (c.m & (c.m - 1)) == 0:  # bit labels need M = 2^k
            db = solve_snr_at_target(c.with_bits(range(c.m)), args.target, kind="bit").bit_db
            line += f"  {db:7.3f}"
        else:
            line += "        -"
        print(line + f"  {time.perf_counter() - t0:5.1f}s")


if __name__ == "__main__":
    main()
