"""Batch front door: ``lis-lab check|bound|verify|simulate``.

Every report embeds the spec source hash, library version, memory depth,
caps, tolerances, and seeds, so a report alone identifies its inputs.
Exit codes: 0 pass, 1 usage or input error, 2 criterion or verification
failure.  ``LIS_LAB_THREADS`` caps worker parallelism; all current
computations are deterministic and single-threaded, which trivially
honours any cap, and the value is recorded in reports.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    ABS_TOL,
    DEFAULT_CONFIG_CAP,
    SUM_TOL,
    CapExceededError,
    Window,
    constant_observable,
    indicator,
    oscillation,
    random_observable,
)
from .kernels import (
    KernelSpec,
    compose_window,
    kernel_average_observable,
    verify_consistency,
)
from .analysis import (
    boundary_uniformity_check,
    build_sensitivity_matrix,
    dobrushin_check,
)
from .bounds import (
    BoundNotApplicableError,
    comparison_bound,
    correlation_bound,
    memory_bound_general,
)
from . import oracle, sim
from .specio import (
    SpecError,
    kernel_to_doc,
    load_spec_file,
    power_law_linear,
    two_state_markov,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve 2
        raise _UsageError(message)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _canonical(obj):
    """Round floats through 17 significant digits (value-preserving)."""
    if isinstance(obj, float):
        return float(_fmt(obj))
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(_fmt(float(obj)))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data)
    os.replace(tmp, path)


def _emit_report(report: dict, out: str | None) -> None:
    text = json.dumps(_canonical(report), indent=2, sort_keys=True)
    if out:
        _atomic_write(Path(out), text + "\n")
    else:
        print(text)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) if isinstance(x, float) else x for x in row])
    _atomic_write(Path(path), buf.getvalue())


def _threads() -> int:
    raw = os.environ.get("LIS_LAB_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise _UsageError(f"LIS_LAB_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise _UsageError("LIS_LAB_THREADS must be at least 1")
    return value


def _load_kernel(args) -> tuple[KernelSpec, dict]:
    if args.example:
        if args.example == "paper-powerlaw":
            f = power_law_linear(args.epsilon, args.depth, label="paper-powerlaw")
            params = {"example": "paper-powerlaw", "epsilon": args.epsilon, "depth": args.depth}
        elif args.example == "markov":
            f = two_state_markov(args.p01, args.p11, label="markov")
            params = {"example": "markov", "p01": args.p01, "p11": args.p11}
        else:
            raise _UsageError(f"unknown example {args.example!r}")
        doc = json.dumps(_canonical(kernel_to_doc(f)), sort_keys=True)
        params["sha256"] = hashlib.sha256(doc.encode()).hexdigest()
        return f, params
    if not args.spec:
        raise _UsageError("a spec file or --example is required")
    return load_spec_file(args.spec)


def _metadata(f: KernelSpec, source: dict, seed: int | None = None) -> dict:
    family = type(f.family).__name__
    return {
        "version": __version__,
        "spec": source,
        "kernel": {
            "memory_depth": f.memory_depth,
            "alphabet_size": f.alphabet.size,
            "family": family,
            "stationary": f.stationary,
            "truncation_tail": f.truncation_tail,
            "label": f.label,
        },
        "caps": {"config_cap": DEFAULT_CONFIG_CAP},
        "tolerances": {"sum_tol": SUM_TOL, "abs_tol": ABS_TOL},
        "threads": _threads(),
        "seed": seed,
    }


def _indicator_symbol(f: KernelSpec, name: str | None) -> int:
    if name is None:
        return min(1, f.alphabet.size - 1)
    return f.alphabet.index_of(name)


def _parse_lags(raw: str) -> list[int]:
    if ":" in raw:
        lo, hi = raw.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in raw.split(",")]


def cmd_check(args) -> int:
    f, source = _load_kernel(args)
    alpha = build_sensitivity_matrix(f)
    verdicts = {
        "dobrushin": dobrushin_check(alpha),
        "boundary": boundary_uniformity_check(f),
    }
    report = _metadata(f, source)
    report["command"] = "check"
    report["criteria"] = {name: v.as_dict() for name, v in verdicts.items()}
    report["selected"] = args.criterion
    if args.criterion == "both":
        passed = all(v.satisfied for v in verdicts.values())
    else:
        passed = verdicts[args.criterion].satisfied
    report["passed"] = passed
    _emit_report(report, args.out)
    return 0 if passed else 2


def _memory_rows(f, alpha, args) -> list[list]:
    symbol = _indicator_symbol(f, args.symbol)
    rows = []
    for n in range(1, args.max_n + 1):
        window = Window(0, n)
        h = indicator(n, symbol, f.alphabet)
        bound = memory_bound_general(alpha, window, h, args.site).value
        exact = ""
        slack = ""
        if args.verify:
            try:
                exact = oracle.exact_oscillation_of_average(f, window, h, args.site)
                slack = bound - exact
            except CapExceededError:
                exact = slack = ""
        rows.append([n, bound, exact, slack])
    return rows


def _correlation_rows(f, alpha, args) -> tuple[list[list], int | None]:
    symbol = _indicator_symbol(f, args.symbol)
    h0 = indicator(0, symbol, f.alphabet)
    lags = _parse_lags(args.lags)
    path = None
    burn = None
    if args.length:
        path = sim.sample_path(f, args.length, args.seed)
        burn = sim.default_burn_in(f)
    rows = []
    for lag in lags:
        h_lag = indicator(lag, symbol, f.alphabet)
        try:
            bound = (
                correlation_bound(
                    alpha, Window(lag, lag), Window(0, 0), h_lag, h0, f.alphabet.diameter
                ).value
                if lag >= 1
                else ""
            )
        except BoundNotApplicableError:
            bound = ""
        exact = ""
        if args.verify:
            try:
                exact = oracle.exact_correlation(f, h0, h0, lag)
            except (CapExceededError, ValueError, oracle.ChainStructureError):
                exact = ""
        empirical = se = ""
        if path is not None:
            est = sim.estimate_correlation(path, h0, h0, lag, burn)
            empirical, se = est.estimate, est.standard_error
        rows.append([lag, bound, exact, empirical, se])
    return rows, args.seed if args.length else None


def _compare_rows(f, f_other, args) -> list[list]:
    rows = []
    for symbol in range(f.alphabet.size):
        h = indicator(0, symbol, f.alphabet)
        bound = comparison_bound(f, f_other, Window(0, 0), h).value
        exact = ""
        try:
            mu = oracle.stationary_measure(f)
            mu_t = oracle.stationary_measure(f_other)
            k = max(f.effective_order, 1)
            k_t = max(f_other.effective_order, 1)
            e1 = oracle._expectation(oracle._markov_view(f)[0], mu, k, h)
            e2 = oracle._expectation(oracle._markov_view(f_other)[0], mu_t, k_t, h)
            exact = abs(e1 - e2)
        except (CapExceededError, ValueError, oracle.ChainStructureError):
            exact = ""
        rows.append([f.alphabet.symbols[symbol], bound, exact])
    return rows


def cmd_bound(args) -> int:
    f, source = _load_kernel(args)
    report = _metadata(f, source)
    report["command"] = f"bound {args.mode}"
    seed = None
    if args.mode == "memory":
        alpha = build_sensitivity_matrix(f)
        header = ["n", "bound", "exact", "slack"]
        rows = _memory_rows(f, alpha, args)
    elif args.mode == "correlation":
        alpha = build_sensitivity_matrix(f)
        header = ["lag", "bound", "exact", "empirical", "se"]
        rows, seed = _correlation_rows(f, alpha, args)
    elif args.mode == "compare":
        if not args.other:
            raise _UsageError("bound compare requires --other SPEC")
        f_other, other_source = load_spec_file(args.other)
        report["other_spec"] = other_source
        header = ["symbol", "bound", "exact"]
        rows = _compare_rows(f, f_other, args)
    else:  # pragma: no cover - argparse restricts choices
        raise _UsageError(f"unknown bound mode {args.mode!r}")
    report["seed"] = seed
    report["table"] = {"header": header, "rows": _canonical(rows)}
    if args.csv:
        _write_csv(args.csv, header, rows)
    _emit_report(report, args.out)
    return 0


def _verify_suite(f: KernelSpec, trials: int, seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    n = f.alphabet.size
    depth = f.memory_depth
    results = []

    # normalisation of window averages
    worst = 0.0
    for length in range(1, 4):
        window = Window(0, length - 1)
        one = constant_observable(window, f.alphabet, 1.0)
        for _ in range(5):
            past = tuple(int(s) for s in rng.integers(0, n, max(depth, 1)))
            worst = max(worst, abs(compose_window(f, window, past, one) - 1.0))
    results.append(
        {"property": "normalization", "worst_residual": worst, "passed": worst <= 1e-12}
    )

    # nested-window consistency
    worst = 0.0
    for hi in range(0, 3):
        delta = Window(0, hi)
        for lo_in in range(0, hi + 1):
            for hi_in in range(lo_in, hi + 1):
                rep = verify_consistency(
                    f, delta, Window(lo_in, hi_in), trials=max(trials // 10, 5),
                    seed=int(rng.integers(2**31)),
                )
                worst = max(worst, rep.max_residual)
    results.append(
        {"property": "consistency", "worst_residual": worst, "passed": worst <= 1e-12}
    )

    # factorisation across split points
    worst = 0.0
    for hi in range(1, 4):
        window = Window(0, hi)
        for split in range(0, hi):
            for _ in range(max(trials // 20, 3)):
                h = random_observable(Window(rng.integers(0, hi + 1), hi), f.alphabet, rng)
                right = kernel_average_observable(f, Window(split + 1, hi), h)
                past = tuple(int(s) for s in rng.integers(0, n, max(depth, 1)))
                lhs = compose_window(f, window, past, h)
                rhs = compose_window(f, Window(0, split), past, right)
                worst = max(worst, abs(lhs - rhs))
    results.append(
        {"property": "factorization", "worst_residual": worst, "passed": worst <= 1e-12}
    )

    alpha = build_sensitivity_matrix(f)

    # oscillation spread (dusting)
    rep = oracle.verify_dusting(f, Window(0, 1), alpha, trials=max(trials // 2, 20), seed=seed)
    results.append(
        {
            "property": "dusting",
            "instances": rep.instances,
            "violations": rep.violations,
            "min_slack": rep.min_slack,
            "passed": rep.passed,
        }
    )

    # memory-bound domination
    worst = -1.0
    violations = 0
    for _ in range(max(trials // 5, 10)):
        hi = int(rng.integers(0, 3))
        window = Window(0, hi)
        h = random_observable(window, f.alphabet, rng)
        j = -int(rng.integers(1, depth + 2))
        exact = oracle.exact_oscillation_of_average(f, window, h, j)
        bound = memory_bound_general(alpha, window, h, j).value
        slack = bound - exact
        worst = max(worst, -slack)
        if slack < -1e-9:
            violations += 1
    results.append(
        {
            "property": "memory-domination",
            "violations": violations,
            "worst_excess": max(worst, 0.0),
            "passed": violations == 0,
        }
    )
    return results


def cmd_verify(args) -> int:
    f, source = _load_kernel(args)
    if f.alphabet.size ** f.memory_depth > DEFAULT_CONFIG_CAP:
        raise SpecError(
            "memory depth too large for the exact verification suite "
            f"({f.alphabet.size}**{f.memory_depth} pasts)"
        )
    started = time.monotonic()
    results = _verify_suite(f, args.trials, args.seed)
    elapsed = time.monotonic() - started
    report = _metadata(f, source, seed=args.seed)
    report["command"] = "verify"
    report["elapsed_seconds"] = elapsed
    report["properties"] = results
    passed = all(r["passed"] for r in results)
    report["passed"] = passed
    _emit_report(report, args.out)
    return 0 if passed else 2


def cmd_simulate(args) -> int:
    f, source = _load_kernel(args)
    symbol = _indicator_symbol(f, args.symbol)
    h = indicator(0, symbol, f.alphabet)
    path = sim.sample_path(f, args.length, args.seed)
    burn = args.burn_in if args.burn_in is not None else sim.default_burn_in(f)
    alpha = build_sensitivity_matrix(f)
    rows = []
    for lag in _parse_lags(args.lags):
        est = sim.estimate_correlation(path, h, h, lag, burn)
        try:
            bound = (
                correlation_bound(
                    alpha,
                    Window(lag, lag),
                    Window(0, 0),
                    indicator(lag, symbol, f.alphabet),
                    h,
                    f.alphabet.diameter,
                ).value
                if lag >= 1
                else ""
            )
        except BoundNotApplicableError:
            bound = ""
        rows.append([lag, est.estimate, est.standard_error, bound])
    header = ["lag", "empirical", "se", "bound"]
    report = _metadata(f, source, seed=args.seed)
    report["command"] = "simulate"
    report["length"] = args.length
    report["burn_in"] = burn
    report["table"] = {"header": header, "rows": _canonical(rows)}
    if args.csv:
        _write_csv(args.csv, header, rows)
    _emit_report(report, args.out)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("spec", nargs="?", help="kernel spec JSON file")
    p.add_argument("--example", choices=["paper-powerlaw", "markov"], help="builtin kernel family")
    p.add_argument("--epsilon", type=float, default=0.5, help="power-law example parameter")
    p.add_argument("--depth", type=int, default=64, help="power-law example memory depth")
    p.add_argument("--p01", type=float, default=0.3, help="markov example P(1|0)")
    p.add_argument("--p11", type=float, default=0.7, help="markov example P(1|1)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--csv", help="also write the tabular output as CSV")


def build_parser() -> _Parser:
    parser = _Parser(prog="lis-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="run the uniqueness criteria")
    _add_common(p_check)
    p_check.add_argument(
        "--criterion",
        choices=["dobrushin", "boundary", "both"],
        default="dobrushin",
        help="criterion deciding the exit code",
    )
    p_check.set_defaults(func=cmd_check)

    p_bound = sub.add_parser("bound", help="evaluate decay bounds")
    p_bound.add_argument("mode", choices=["memory", "correlation", "compare"])
    _add_common(p_bound)
    p_bound.add_argument("--site", type=int, default=-1, help="past site probed by memory bounds")
    p_bound.add_argument("--symbol", help="indicator symbol (defaults to the second one)")
    p_bound.add_argument("--max-n", type=int, default=8, help="memory sweep window size")
    p_bound.add_argument("--lags", default="1:8", help="lag list fragment, e.g. 1:8 or 1,2,5")
    p_bound.add_argument("--verify", action="store_true", help="add exact oracle columns")
    p_bound.add_argument("--length", type=int, help="add empirical columns from a sampled path")
    p_bound.add_argument("--seed", type=int, default=1, help="sampling seed")
    p_bound.add_argument("--other", help="second spec file for compare mode")
    p_bound.set_defaults(func=cmd_bound)

    p_verify = sub.add_parser("verify", help="run the exact property suite")
    _add_common(p_verify)
    p_verify.add_argument("--trials", type=int, default=200, help="randomised trial budget")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)

    p_sim = sub.add_parser("simulate", help="sample a path and estimate correlations")
    _add_common(p_sim)
    p_sim.add_argument("--length", type=int, default=100000)
    p_sim.add_argument("--seed", type=int, default=1)
    p_sim.add_argument("--lags", default="1:5")
    p_sim.add_argument("--burn-in", type=int, help="override the heuristic burn-in")
    p_sim.add_argument("--symbol", help="indicator symbol (defaults to the second one)")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SpecError, CapExceededError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BoundNotApplicableError as exc:
        print(f"criterion not met: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
