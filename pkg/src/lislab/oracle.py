"""Exact brute-force ground truth at desk scale.

Everything here is computed by direct enumeration or exact linear
algebra, never through the bound formulas it is used to validate:
agreement between the two is evidence, not tautology.  Random value
tables are drawn i.i.d. uniform on [0, 1) with per-trial seeds derived
deterministically from the run seed, so parallel and serial runs report
identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_CONFIG_CAP,
    FiniteDistribution,
    Observable,
    PastConfig,
    Window,
    oscillation,
    product_observable,
    random_observable,
    shift_observable,
)
from .kernels import (
    KernelSpec,
    MarkovTable,
    compose_window,
    conditional_array,
    kernel_average_observable,
)
from .analysis import SensitivityMatrix


class ChainStructureError(RuntimeError):
    """The induced block chain is reducible or periodic."""


class ConvergenceError(RuntimeError):
    """Power iteration missed its residual target within the budget."""


def exact_oscillation_of_average(
    f: KernelSpec,
    window: Window,
    h: Observable,
    j: int,
    cap: int = DEFAULT_CONFIG_CAP,
) -> float:
    """Exact oscillation at site ``j`` of the window average of ``h``.

    Tabulates the average over every past deep enough to leave site ``j``
    free, then measures the oscillation of the resulting table.  Sites
    inside the window come out exactly zero: the average no longer
    depends on them.
    """
    if window.contains(j):
        return 0.0
    if j >= window.lo:
        raise ValueError("the probed site must lie left of the window or inside it")
    depth = max(f.memory_depth, window.lo - j, window.lo - h.support.lo, 1)
    g = kernel_average_observable(f, window, h, depth=depth, cap=cap)
    return oscillation(g, j)


def _dusting_matrix(alpha: SensitivityMatrix, window: Window) -> np.ndarray:
    """Window-limited spread matrix, by plain dense matrix powers.

    Independent implementation (full square matrices over the padded
    site range) of the power sums used by the bounds module.
    """
    lo = window.lo - alpha.depth
    size = window.hi - lo + 1
    a = np.zeros((size, size))
    for i in window.sites():
        for lag in range(1, alpha.depth + 1):
            if i - lag >= lo:
                a[i - lo, i - lag - lo] = alpha.entry(i, i - lag)
    total = np.zeros_like(a)
    power = np.eye(size)
    for _ in range(len(window)):
        power = power @ a
        total += power
    return total[alpha.depth :, :]


@dataclass(frozen=True)
class DustingReport:
    """Outcome of randomized spread-inequality checks."""

    instances: int
    violations: int
    min_slack: float
    worst_case: tuple[int, int] | None

    @property
    def passed(self) -> bool:
        return self.violations == 0


def verify_dusting(
    f: KernelSpec,
    window: Window,
    alpha: SensitivityMatrix,
    trials: int = 500,
    seed: int = 0,
    strip: int | None = None,
    tol: float = 1e-9,
    cap: int = DEFAULT_CONFIG_CAP,
) -> DustingReport:
    """Check that averaging spreads oscillations no further than ``alpha`` says.

    For random observables on the window plus a strip of past sites, and
    every site of the strip, compares the exact oscillation of the
    average against the direct term plus the window-limited spread of the
    support oscillations.  Reports the worst slack; negative slack beyond
    ``tol`` counts as a violation.
    """
    depth = f.memory_depth
    strip = max(depth, 1) + 1 if strip is None else strip
    strip_lo = window.lo - strip
    spread = _dusting_matrix(alpha, window)
    lo_col = window.lo - alpha.depth
    min_slack = math.inf
    violations = 0
    worst_case: tuple[int, int] | None = None
    instances = 0
    trial = 0
    while instances < trials:
        rng = np.random.default_rng((seed, trial))
        trial += 1
        lo = int(rng.integers(strip_lo, window.lo + 1))
        hi = int(rng.integers(window.lo, window.hi + 1))
        h = random_observable(Window(lo, hi), f.alphabet, rng, cap)
        j = int(rng.integers(strip_lo, window.lo))
        lhs = exact_oscillation_of_average(f, window, h, j, cap)
        rhs = oscillation(h, j)
        for k in window.sites():
            osc_k = oscillation(h, k)
            if osc_k > 0.0 and j >= lo_col:
                rhs += osc_k * float(spread[k - window.lo, j - lo_col])
        slack = rhs - lhs
        if slack < min_slack:
            min_slack = slack
            worst_case = (trial - 1, j)
        if slack < -tol:
            violations += 1
        instances += 1
    return DustingReport(instances, violations, min_slack, worst_case)


def _markov_view(f: KernelSpec) -> tuple[KernelSpec, int]:
    """Re-declare the kernel at its effective order (at least 1)."""
    if not f.stationary:
        raise ValueError("exact chain computations require a stationary kernel")
    order = f.effective_order
    k_eff = max(order, 1)
    fam = f.family_at(0)
    rows = conditional_array(fam, f.alphabet, order)
    table = MarkovTable(order, tuple(tuple(float(x) for x in row) for row in rows))
    return KernelSpec(f.alphabet, k_eff, table, label=f.label, check=f.check), k_eff


def _block_step(f: KernelSpec, k: int) -> np.ndarray:
    """Conditional array over depth-``k`` block states."""
    return conditional_array(f.family_at(0), f.alphabet, k)


def stationary_measure(
    f: KernelSpec,
    residual: float = 1e-14,
    max_iter: int = 100000,
    cap_states: int = 4096,
) -> FiniteDistribution:
    """Unique stationary law on blocks of the kernel's effective order.

    Exact power iteration on the induced block chain; the chain must be
    irreducible and aperiodic, both of which are checked first.
    """
    g, k = _markov_view(f)
    n = f.alphabet.size
    size = n**k
    if size > cap_states:
        raise ValueError(f"block state space of size {size} exceeds the cap {cap_states}")
    rows = _block_step(g, k)
    succ = [
        [((s * n + x) % size) for x in range(n) if rows[s, x] > 0.0] for s in range(size)
    ]
    _check_irreducible_aperiodic(succ, size)
    mu = np.full(size, 1.0 / size)
    next_states = np.array(
        [[(s * n + x) % size for x in range(n)] for s in range(size)], dtype=np.int64
    )
    for _ in range(max_iter):
        nxt = np.zeros(size)
        np.add.at(nxt, next_states, mu[:, None] * rows)
        gap = float(np.abs(nxt - mu).sum())
        mu = nxt
        if gap <= residual:
            mu = mu / mu.sum()
            return FiniteDistribution(tuple(mu.tolist()))
    raise ConvergenceError(
        f"power iteration residual {gap!r} above {residual} after {max_iter} steps"
    )


def _check_irreducible_aperiodic(succ: list[list[int]], size: int) -> None:
    def reachable(adj: list[list[int]]) -> set[int]:
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    if len(reachable(succ)) != size:
        raise ChainStructureError("block chain is reducible (forward reachability fails)")
    rev: list[list[int]] = [[] for _ in range(size)]
    for v, outs in enumerate(succ):
        for w in outs:
            rev[w].append(v)
    if len(reachable(rev)) != size:
        raise ChainStructureError("block chain is reducible (backward reachability fails)")
    # period = gcd over edges of (level[u] + 1 - level[v]) on a BFS tree
    level = {0: 0}
    queue = [0]
    g = 0
    while queue:
        v = queue.pop(0)
        for w in succ[v]:
            if w not in level:
                level[w] = level[v] + 1
                queue.append(w)
            else:
                g = math.gcd(g, level[v] + 1 - level[w])
    if abs(g) != 1:
        raise ChainStructureError(f"block chain is periodic with period {abs(g)}")


def _expectation(f: KernelSpec, mu: FiniteDistribution, k: int, h: Observable) -> float:
    """Stationary expectation of ``h`` by conditioning on the initial block."""
    total = 0.0
    window = h.support
    n = f.alphabet.size
    size = n**k
    for code in range(size):
        w = mu.weights[code]
        if w == 0.0:
            continue
        past = PastConfig(tuple(_digits(code, n, k)))
        total += w * compose_window(f, window, past, h)
    return total


def _digits(code: int, base: int, length: int) -> list[int]:
    out = []
    for _ in range(length):
        out.append(code % base)
        code //= base
    return list(reversed(out))


def exact_correlation(
    f: KernelSpec,
    h1: Observable,
    h2: Observable,
    separation: int,
    cap: int = DEFAULT_CONFIG_CAP,
) -> float:
    """|Cov| of ``h1`` and ``h2`` shifted ``separation`` sites to the right.

    Exact: stationary block law plus enumeration over the joint window.
    """
    g, k = _markov_view(f)
    mu = stationary_measure(f)
    shifted = shift_observable(h2, separation + h1.support.lo - h2.support.lo)
    joint = product_observable(h1, shifted, cap)
    e_joint = _expectation(g, mu, k, joint)
    e1 = _expectation(g, mu, k, h1)
    e2 = _expectation(g, mu, k, h2)
    return abs(e_joint - e1 * e2)


def finite_volume_expectation(
    f: KernelSpec,
    window: Window,
    past: "PastConfig | list[int] | tuple[int, ...]",
    h: Observable,
    cap: int = DEFAULT_CONFIG_CAP,
) -> float:
    """Window average of ``h`` from a fixed past.

    Thin alias of the composition primitive, exposed for convergence
    experiments: sweep the window's left end further into the past and
    watch the value stabilise (for finite-memory kernels it freezes once
    the window is deeper than the memory).
    """
    return compose_window(f, window, past, h, cap)
