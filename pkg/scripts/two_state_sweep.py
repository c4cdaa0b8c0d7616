#!/usr/bin/env python3
"""Sweep two-state kernels [[1-p, p], [q, 1-q]] and compare solvers.

For each (p, q) the adapted cost between the two starts has the closed form
1 / (1 - |1 - p - q|); the table reports value iteration against it, the
maximal-coupling series, and the printed (caveat-flagged) non-causal form.

Usage:
    python scripts/two_state_sweep.py
    python scripts/two_state_sweep.py --steps 9 --beta 1.0
"""

import argparse

import numpy as np

from bicausal import (
    coupling_time_instance,
    noncausal_cost_series,
    two_state_closed_forms,
    validate_kernel,
    value_iterate,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=5, help="grid points per axis")
    parser.add_argument("--lo", type=float, default=0.05)
    parser.add_argument("--hi", type=float, default=0.45)
    parser.add_argument("--tol", type=float, default=1e-9)
    args = parser.parse_args()

    grid = np.linspace(args.lo, args.hi, args.steps)
    header = f"{'p':>6} {'q':>6} {'closed':>12} {'value-iter':>12} {'series':>12} {'w-form*':>12} {'iters':>6}"
    print(header)
    print("-" * len(header))
    worst = 0.0
    for p in grid:
        for q in grid:
            K = validate_kernel([[1 - p, p], [q, 1 - q]])
            spec = coupling_time_instance(K, 0, 1)
            rep = value_iterate(spec, tol=args.tol)
            series = noncausal_cost_series(K, 0, 1, beta=1.0, tol=args.tol)
            forms = two_state_closed_forms(K)
            worst = max(worst, abs(rep.value_table[0, 1] - forms.w_bc_formula))
            print(
                f"{p:6.2f} {q:6.2f} {forms.w_bc_formula:12.6f} "
                f"{rep.value_table[0, 1]:12.6f} {series.value:12.6f} "
                f"{forms.w_formula:12.6f} {rep.iterations:6d}"
            )
    print(f"\nmax |value-iter - closed form| = {worst:.3e}")
    print("* the w-form column is the printed non-causal closed form; it is")
    print("  inconsistent with the series column (see README, known discrepancies)")


if __name__ == "__main__":
    main()
