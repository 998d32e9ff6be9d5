#!/usr/bin/env python3
"""Finite-volume convergence from two extreme pasts.

Deepening the averaging window from the all-zeros and all-ones pasts
produces two sequences that squeeze toward the stationary expectation;
for a two-state chain the gap contracts geometrically.  Printed purely
as an observational table.
"""

import argparse

from lislab import (
    PastConfig,
    Window,
    finite_volume_expectation,
    indicator,
    stationary_measure,
    two_state_markov,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--p01", type=float, default=0.3)
    parser.add_argument("--p11", type=float, default=0.7)
    parser.add_argument("--max-n", type=int, default=10)
    args = parser.parse_args()

    f = two_state_markov(args.p01, args.p11)
    h = indicator(0, 1, f.alphabet)
    mu = stationary_measure(f)
    print(f"stationary expectation: {mu.weights[1]:.12f}")
    print(f"{'n':>3} {'from all-0':>14} {'from all-1':>14} {'gap':>14}")
    for n in range(0, args.max_n + 1):
        window = Window(-n, 0)
        lo = finite_volume_expectation(f, window, PastConfig.fill(0, 1), h)
        hi = finite_volume_expectation(f, window, PastConfig.fill(1, 1), h)
        print(f"{n:3d} {lo:14.10f} {hi:14.10f} {abs(hi - lo):14.10f}")


if __name__ == "__main__":
    main()
