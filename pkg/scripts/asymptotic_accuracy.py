"""Relative error of the order-0 and order-1 expansions against the exact pairwise error."""

import argparse

import numpy as np

from mvm.errprob import pairwise_error_asymptotic, pairwise_error_exact, pairwise_error_simple


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gammas", default="0.1,0.3,0.5,0.7,0.9,0.95")
    ap.add_argument("--x", default="5,10,30,100,300", help="values of gamma*gamma_s/2")
    args = ap.parse_args()

    print("  gamma      x        exact      order0    order1    simple")
    for g in (float(v) for v in args.gammas.split(",")):
        for x in (float(v) for v in args.x.split(",")):
            gs = 2 * x / g
            ref = pairwise_error_exact(g, gs)
            if ref < 1e-280:
                continue
            errs = [
                abs(f - ref) / ref
                for f in (
                    pairwise_error_asymptotic(g, gs, order=0),
                    pairwise_error_asymptotic(g, gs, order=1),
                    pairwise_error_simple(g, gs),
                )
            ]
            print(f"{g:7.2f} {x:7.1f}  {ref:.4e}  " + "  ".join(f"{e:.2e}" for e in errs))


if __name__ == "__main__":
    main()
