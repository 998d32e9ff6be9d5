#!/usr/bin/env python3
"""Loss-of-memory sweep: analytic bound vs exact oscillation.

Emits CSV rows (n, bound, exact, ratio) for a two-state chain, probing
how much the window average of a single-site indicator at site n still
depends on the site just left of the window.
"""

import argparse
import sys

from lislab import (
    Window,
    build_sensitivity_matrix,
    exact_oscillation_of_average,
    indicator,
    memory_bound_general,
    two_state_markov,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--p01", type=float, default=0.3)
    parser.add_argument("--p11", type=float, default=0.7)
    parser.add_argument("--max-n", type=int, default=10)
    args = parser.parse_args()

    f = two_state_markov(args.p01, args.p11)
    alpha = build_sensitivity_matrix(f)
    writer = sys.stdout
    writer.write("n,bound,exact,ratio\n")
    for n in range(1, args.max_n + 1):
        window = Window(0, n)
        h = indicator(n, 1, f.alphabet)
        bound = memory_bound_general(alpha, window, h, -1).value
        exact = exact_oscillation_of_average(f, window, h, -1)
        ratio = exact / bound if bound else float("nan")
        writer.write(f"{n},{bound:.17g},{exact:.17g},{ratio:.6f}\n")


if __name__ == "__main__":
    main()
