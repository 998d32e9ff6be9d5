"""Single-site transition kernels and their exact interval composition.

A kernel specification declares a memory depth ``R`` and one of four
families of conditional laws for the symbol at a site given the ``R``
preceding symbols.  Interval kernels are products of singletons swept
left to right; composition against an observable is an exact enumeration
over the window, vectorised over pasts so that tabulating a kernel
average over every relevant past costs about as much as one evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .core import (
    DEFAULT_CONFIG_CAP,
    SUM_TOL,
    WORK_CAP,
    AlphabetSpec,
    CapExceededError,
    FiniteDistribution,
    Observable,
    PastConfig,
    Window,
    as_symbols,
    check_cap,
    config_code,
    random_observable,
)

#: Largest conditional table that may be materialised as a dense array.
TABLE_CAP = 1 << 20


@dataclass(frozen=True)
class MarkovTable:
    """Conditional law depending on the last ``order`` symbols only.

    ``rows[p]`` is the distribution of the next symbol given the past
    whose lexicographic code is ``p`` (over the ``order`` trailing sites,
    oldest first).  ``order`` may be smaller than the declared memory
    depth of the enclosing spec.
    """

    order: int
    rows: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class GeneralTable:
    """Full conditional table over every depth-``R`` past."""

    rows: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class LinearLongMemory:
    """Binary kernel, affine in each past coordinate.

    ``P(1 | past) = intercept + sum_k coefficients[k-1] * past[-k]`` where
    ``past[-k]`` is the symbol ``k`` sites back.  ``coefficient_tail``
    records the mass of any discarded coefficients beyond the depth when
    the family is a truncation of an infinite sequence; it is reported,
    never renormalised away, so criterion sums match the truncated object.
    """

    intercept: float
    coefficients: tuple[float, ...]
    coefficient_tail: float = 0.0


@dataclass(frozen=True)
class SiteIndexed:
    """Finite list of per-site overrides over a stationary default."""

    default: Union[MarkovTable, GeneralTable, LinearLongMemory]
    overrides: tuple[tuple[int, Union[MarkovTable, GeneralTable, LinearLongMemory]], ...]


Family = Union[MarkovTable, GeneralTable, LinearLongMemory, SiteIndexed]
SingleFamily = Union[MarkovTable, GeneralTable, LinearLongMemory]


def family_order(family: SingleFamily) -> int:
    """Number of trailing past sites the family actually reads."""
    if isinstance(family, MarkovTable):
        return family.order
    if isinstance(family, GeneralTable):
        rows = len(family.rows)
        return 0 if rows == 1 else int(round(math.log(rows, len(family.rows[0]))))
    return len(family.coefficients)


def _validate_single(family: SingleFamily, alphabet: AlphabetSpec, depth: int, check: bool) -> None:
    n = alphabet.size
    if isinstance(family, LinearLongMemory):
        if n != 2:
            raise ValueError("linear long-memory kernels require a binary alphabet")
        if len(family.coefficients) != depth:
            raise ValueError(
                f"linear kernel declares {len(family.coefficients)} coefficients "
                f"for memory depth {depth}"
            )
        if check:
            if family.intercept < 0.0 or any(a < 0.0 for a in family.coefficients):
                raise ValueError("linear kernel coefficients must be non-negative")
            total = family.intercept + sum(family.coefficients)
            if total > 1.0 + SUM_TOL:
                raise ValueError(f"linear kernel mass {total!r} exceeds 1")
            if family.coefficient_tail < 0.0:
                raise ValueError("coefficient tail must be non-negative")
        return
    order = family.order if isinstance(family, MarkovTable) else depth
    if not 0 <= order <= depth:
        raise ValueError(f"table order {order} outside 0..{depth}")
    expected = n**order
    if len(family.rows) != expected:
        raise ValueError(f"table has {len(family.rows)} rows, expected {expected}")
    for p, row in enumerate(family.rows):
        if len(row) != n:
            raise ValueError(f"row {p} has {len(row)} entries, expected {n}")
        if check:
            if any(x < 0.0 for x in row):
                raise ValueError(f"row {p} has a negative probability")
            total = sum(row)
            if abs(total - 1.0) > SUM_TOL:
                raise ValueError(f"row {p} sums to {total!r}, expected 1")


@dataclass(frozen=True)
class KernelSpec:
    """A stationary or site-indexed family of singleton kernels.

    ``check=False`` skips normalisation validation; it exists so that
    deliberately corrupted kernels can be fed to the verification
    routines as negative controls.
    """

    alphabet: AlphabetSpec
    memory_depth: int
    family: Family
    label: str = ""
    check: bool = True

    def __post_init__(self) -> None:
        if self.memory_depth < 0:
            raise ValueError("memory depth must be non-negative")
        if isinstance(self.family, SiteIndexed):
            _validate_single(self.family.default, self.alphabet, self.memory_depth, self.check)
            seen = set()
            for site, fam in self.family.overrides:
                if site in seen:
                    raise ValueError(f"duplicate override for site {site}")
                seen.add(site)
                _validate_single(fam, self.alphabet, self.memory_depth, self.check)
        else:
            _validate_single(self.family, self.alphabet, self.memory_depth, self.check)

    @property
    def stationary(self) -> bool:
        return not isinstance(self.family, SiteIndexed)

    @property
    def override_sites(self) -> tuple[int, ...]:
        if isinstance(self.family, SiteIndexed):
            return tuple(site for site, _ in self.family.overrides)
        return ()

    def family_at(self, site: int) -> SingleFamily:
        if isinstance(self.family, SiteIndexed):
            for s, fam in self.family.overrides:
                if s == site:
                    return fam
            return self.family.default
        return self.family

    def families(self) -> tuple[SingleFamily, ...]:
        if isinstance(self.family, SiteIndexed):
            return (self.family.default,) + tuple(f for _, f in self.family.overrides)
        return (self.family,)

    @property
    def effective_order(self) -> int:
        return max(family_order(f) for f in self.families())

    @property
    def truncation_tail(self) -> float:
        return max(
            (f.coefficient_tail for f in self.families() if isinstance(f, LinearLongMemory)),
            default=0.0,
        )


def family_row(family: SingleFamily, alphabet: AlphabetSpec, past: Sequence[int]) -> tuple[float, ...]:
    """Conditional law given a full-depth past (reads its trailing sites)."""
    if isinstance(family, LinearLongMemory):
        p1 = family.intercept
        coeffs = family.coefficients
        for k, a in enumerate(coeffs, start=1):
            p1 += a * past[-k]
        return (1.0 - p1, p1)
    order = family_order(family)
    trailing = past[len(past) - order :] if order else ()
    return family.rows[config_code(trailing, alphabet.size)]


@lru_cache(maxsize=256)
def conditional_array(family: SingleFamily, alphabet: AlphabetSpec, depth: int) -> np.ndarray:
    """Dense ``(|E|**depth, |E|)`` conditional table, rows by past code."""
    n = alphabet.size
    if n**depth > TABLE_CAP:
        raise CapExceededError(
            f"conditional table over {n}**{depth} pasts exceeds the table cap"
        )
    if isinstance(family, LinearLongMemory):
        codes = np.arange(n**depth, dtype=np.int64)
        p1 = np.full(len(codes), family.intercept, dtype=float)
        for k, a in enumerate(family.coefficients, start=1):
            p1 += a * ((codes >> (k - 1)) & 1)
        out = np.column_stack([1.0 - p1, p1])
    else:
        base = np.asarray(family.rows, dtype=float)
        order = family_order(family)
        reps = n ** (depth - order)
        out = np.tile(base, (reps, 1)) if reps > 1 else base.copy()
    out.setflags(write=False)
    return out


def eval_singleton(f: KernelSpec, i: int, past: "PastConfig | Sequence[int]") -> FiniteDistribution:
    """Distribution of the symbol at site ``i`` given the R preceding symbols."""
    symbols = as_symbols(past)
    if len(symbols) != f.memory_depth:
        raise ValueError(
            f"past has length {len(symbols)}, kernel memory depth is {f.memory_depth}"
        )
    n = f.alphabet.size
    if any(not 0 <= s < n for s in symbols):
        raise ValueError("past contains a symbol outside the alphabet")
    row = family_row(f.family_at(i), f.alphabet, symbols)
    return FiniteDistribution(tuple(float(x) for x in row))


def _required_past(f: KernelSpec, window: Window, h: Observable) -> int:
    need = f.memory_depth
    if h.support.lo < window.lo:
        need = max(need, window.lo - h.support.lo)
    return need


def window_weights(
    f: KernelSpec,
    window: Window,
    past_codes: np.ndarray,
    past_len: int,
    cap: int = DEFAULT_CONFIG_CAP,
) -> np.ndarray:
    """Product-of-singletons weights over the window, one row per past.

    ``past_codes`` are big-endian codes of depth-``past_len`` pasts with
    ``past_len >= memory_depth``.  Returns shape ``(n_pasts, |E|**|W|)``.
    """
    n = f.alphabet.size
    length = len(window)
    size = check_cap(n, length, cap)
    if past_codes.size * size > WORK_CAP:
        raise CapExceededError(
            f"{past_codes.size} pasts x {size} configurations exceeds the work cap"
        )
    depth = f.memory_depth
    if past_len < depth:
        raise ValueError(f"past has length {past_len}, kernel memory depth is {depth}")
    state_mod = n**depth if depth else 1
    tail_codes = past_codes % state_mod
    w = np.ones((past_codes.size, 1), dtype=float)
    for t, site in enumerate(window.sites()):
        kernel = conditional_array(f.family_at(site), f.alphabet, depth)
        c = np.arange(n**t, dtype=np.int64)
        if depth == 0:
            states = np.zeros((past_codes.size, c.size), dtype=np.int64)
        elif t >= depth:
            states = np.broadcast_to(c % state_mod, (past_codes.size, c.size))
        else:
            offsets = (tail_codes % (n ** (depth - t))) * (n**t)
            states = offsets[:, None] + c[None, :]
        w = (w[:, :, None] * kernel[states]).reshape(past_codes.size, n ** (t + 1))
    return w


def _observable_values(
    h: Observable, window: Window, past_codes: np.ndarray, past_len: int
) -> np.ndarray:
    """Values of ``h`` on (past, window configuration) pairs.

    Returns shape ``(n_pasts, |E|**|W|)`` broadcastable against weights.
    The support may overlap the window and reach into the past, but not
    extend right of the window.
    """
    n = h.alphabet.size
    a, b = h.support.lo, h.support.hi
    l, m = window.lo, window.hi
    table = h.table_array()
    size = n ** len(window)
    if a >= l:
        shift = n ** (m - b)
        idx = (np.arange(size, dtype=np.int64) // shift) % (n ** (b - a + 1))
        return np.broadcast_to(table[idx], (past_codes.size, size))
    if l - a > past_len:
        raise ValueError(
            f"past has length {past_len} but the observable reaches {l - a} sites back"
        )
    code_p = past_codes % (n ** (l - a))
    if b < l:
        vals = table[code_p // (n ** (l - 1 - b))]
        return np.broadcast_to(vals[:, None], (past_codes.size, size))
    inner = n ** (b - l + 1)
    shift = n ** (m - b)
    idx_in = (np.arange(size, dtype=np.int64) // shift) % inner
    return table[code_p[:, None] * inner + idx_in[None, :]]


def _check_compose_args(f: KernelSpec, window: Window, h: Observable) -> None:
    if h.alphabet.size != f.alphabet.size:
        raise ValueError("observable alphabet does not match the kernel alphabet")
    if h.support.hi > window.hi:
        raise ValueError(
            f"observable depends on site {h.support.hi}, right of the window end {window.hi}"
        )


def compose_window(
    f: KernelSpec,
    window: Window,
    past: "PastConfig | Sequence[int]",
    h: Observable,
    cap: int = DEFAULT_CONFIG_CAP,
) -> float:
    """Exact kernel average of ``h`` over the window given ``past``.

    Sums ``h`` against the product of singleton conditionals over every
    window configuration; dependence of ``h`` left of the window is
    resolved against ``past``, which must cover both the kernel memory
    and the support overhang.
    """
    _check_compose_args(f, window, h)
    symbols = as_symbols(past)
    need = _required_past(f, window, h)
    if len(symbols) < need:
        raise ValueError(f"past has length {len(symbols)}, need at least {need}")
    n = f.alphabet.size
    if any(not 0 <= s < n for s in symbols):
        raise ValueError("past contains a symbol outside the alphabet")
    codes = np.array([config_code(symbols, n)], dtype=np.int64)
    w = window_weights(f, window, codes, len(symbols), cap)
    vals = _observable_values(h, window, codes, len(symbols))
    return float((w * vals).sum(axis=1)[0])


def marginal_distribution(
    f: KernelSpec,
    window: Window,
    past: "PastConfig | Sequence[int]",
    cap: int = DEFAULT_CONFIG_CAP,
) -> FiniteDistribution:
    """Law of the window configuration given ``past`` (lexicographic order)."""
    symbols = as_symbols(past)
    if len(symbols) < f.memory_depth:
        raise ValueError(
            f"past has length {len(symbols)}, kernel memory depth is {f.memory_depth}"
        )
    codes = np.array([config_code(symbols, f.alphabet.size)], dtype=np.int64)
    w = window_weights(f, window, codes, len(symbols), cap)[0]
    return FiniteDistribution(tuple(w.tolist()))


def kernel_average_observable(
    f: KernelSpec,
    window: Window,
    h: Observable,
    depth: int | None = None,
    cap: int = DEFAULT_CONFIG_CAP,
) -> Observable:
    """Tabulate the kernel average of ``h`` as an observable on the past.

    The result lives on the ``depth`` sites left of the window; ``depth``
    defaults to (and must be at least) the dependence depth of the
    average, so the tabulation is exact.
    """
    _check_compose_args(f, window, h)
    need = _required_past(f, window, h)
    if depth is None:
        depth = max(need, 1)
    elif depth < need:
        raise ValueError(f"depth {depth} is below the required past depth {need}")
    n = f.alphabet.size
    n_pasts = check_cap(n, depth, cap)
    codes = np.arange(n_pasts, dtype=np.int64)
    w = window_weights(f, window, codes, depth, cap)
    vals = _observable_values(h, window, codes, depth)
    table = (w * vals).sum(axis=1)
    support = Window(window.lo - depth, window.lo - 1)
    return Observable(support, h.alphabet, tuple(table.tolist()))


@dataclass(frozen=True)
class ConsistencyReport:
    """Worst residual of the nested-average identity over random trials."""

    trials: int
    max_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol


def verify_consistency(
    f: KernelSpec,
    delta: Window,
    lam: Window,
    trials: int = 100,
    tol: float = 1e-12,
    seed: int = 0,
    cap: int = DEFAULT_CONFIG_CAP,
) -> ConsistencyReport:
    """Check that averaging over ``lam`` inside ``delta`` changes nothing.

    For random pasts and random observables measurable left of the end of
    ``lam``, compares the iterated average against the direct one by
    exact enumeration and reports the largest residual.
    """
    if not delta.contains_window(lam):
        raise ValueError("inner window must be contained in the outer window")
    rng = np.random.default_rng(seed)
    n = f.alphabet.size
    depth = f.memory_depth
    worst = 0.0
    for _ in range(trials):
        lo = int(rng.integers(delta.lo - max(depth, 2), lam.hi + 1))
        hi = int(min(lam.hi, lo + rng.integers(0, 3)))
        h = random_observable(Window(lo, hi), f.alphabet, rng, cap)
        g = kernel_average_observable(f, lam, h, cap=cap)
        past_len = max(depth, delta.lo - min(h.support.lo, g.support.lo), 1)
        past = tuple(int(s) for s in rng.integers(0, n, past_len))
        lhs = compose_window(f, delta, past, g, cap)
        rhs = compose_window(f, delta, past, h, cap)
        worst = max(worst, abs(lhs - rhs))
    return ConsistencyReport(trials, worst, tol)
