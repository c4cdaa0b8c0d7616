#!/usr/bin/env python3
"""Concentration bounds for a chain over a grid of (steps, deviation).

Computes all three variance proxies for the coupling-time instance of a
kernel (worked two-state example by default, or a problem JSON) and prints
the bounded-differences deviation bound for each.

Usage:
    python scripts/concentration_table.py
    python scripts/concentration_table.py --problem my_chain.json --t 5 10 20
"""

import argparse
import json

from bicausal import (
    BoundRequest,
    coupling_time_instance,
    mcdiarmid_bound,
    validate_kernel,
    variance_proxy,
)

WORKED = [[0.9, 0.1], [0.2, 0.8]]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--problem", help="problem JSON (uses its P); default worked kernel")
    parser.add_argument("--n", type=int, nargs="+", default=[100, 1000, 10000])
    parser.add_argument("--t", type=float, nargs="+", default=[10.0, 20.0, 50.0])
    args = parser.parse_args()

    if args.problem:
        with open(args.problem) as fh:
            K = validate_kernel(json.load(fh)["P"])
    else:
        K = validate_kernel(WORKED)
    spec = coupling_time_instance(K, 0, K.n - 1)

    proxies = {
        mode: variance_proxy(spec, mode)
        for mode in ("noncausal_series", "bicausal_dp", "doeblin")
    }
    print("variance proxies (sup-norm transport costs):")
    for mode, value in proxies.items():
        print(f"  {mode:>16}: {value:.6f}")
    print()
    print(f"{'n':>8} {'t':>8}" + "".join(f"{m:>18}" for m in proxies))
    for n in args.n:
        for t in args.t:
            req = BoundRequest(n=n, t=t)
            row = "".join(f"{mcdiarmid_bound(req, p):>18.6g}" for p in proxies.values())
            print(f"{n:>8} {t:>8.1f}{row}")


if __name__ == "__main__":
    main()
