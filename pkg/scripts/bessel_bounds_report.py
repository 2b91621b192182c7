#!/usr/bin/env python3
"""Print the explicit kernel-bound reports over a grid of ratios g/h."""

import argparse

from starklat import specfun


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--orders", type=int, default=40)
    ap.add_argument(
        "--ratios", type=float, nargs="+", default=[0.1, 0.5, 1.0, 2.0, 5.0, 10.0]
    )
    args = ap.parse_args()
    for x in args.ratios:
        ub = specfun.check_upper_bound(args.orders, x)
        sm = specfun.check_summability(x, 2 * int(abs(x)) + 60)
        pd = specfun.pair_decay_sum(0, 8, x, 2 * int(abs(x)) + 60)
        print(f"x = {x:g}")
        print(f"  factorial bound  max ratio {ub.max_ratio:.3e}  ok={ub.passed}")
        print(
            f"  summability      sum {sm.fitted['sum']:.6f}"
            f"  bound {sm.fitted['bound']:.6f}  ok={sm.passed}"
        )
        print(f"  pair decay       value {pd.fitted['value']:.3e}  C {pd.fitted['C_fit']:.3e}")


if __name__ == "__main__":
    main()
