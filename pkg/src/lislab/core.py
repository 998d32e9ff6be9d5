"""Alphabets, site windows, configurations, distributions, and observables.

Everything downstream (kernel composition, sensitivity analysis, decay
bounds) works over a finite alphabet carrying a bounded metric and over
finite windows of sites, so every supremum in the theory collapses to an
exact finite maximum.  The enumeration cap keeps those maxima at desk
scale and makes cap violations loud instead of slow.

Conventions used throughout the package:

* symbols are handled as integer indices into ``AlphabetSpec.symbols``;
* a configuration of a window is a tuple of symbol indices, ordered left
  to right, and its integer code is the big-endian base-``|E|`` number of
  that tuple (leftmost site most significant);
* ``enumerate_configs`` yields configurations in increasing code order,
  which is exactly lexicographic symbol order.  This order is part of the
  contract: reports built from it are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

#: Default ceiling on the number of configurations any single window may
#: enumerate (2**12, i.e. 12 binary sites).
DEFAULT_CONFIG_CAP = 4096

#: Ceiling on the total work (pasts x window configurations) of a
#: vectorised sweep; guards tabulation loops rather than single windows.
WORK_CAP = 1 << 22

#: Probability vectors must normalise this tightly.
SUM_TOL = 1e-12

#: Default absolute tolerance for scalar comparisons.
ABS_TOL = 1e-9


class CapExceededError(ValueError):
    """An enumeration would exceed the configured cap."""


def check_cap(n_symbols: int, length: int, cap: int = DEFAULT_CONFIG_CAP) -> int:
    """Return ``n_symbols**length`` or raise if it exceeds ``cap``."""
    size = n_symbols**length
    if size > cap:
        raise CapExceededError(
            f"{n_symbols}**{length} = {size} configurations exceeds the cap of {cap}"
        )
    return size


@dataclass(frozen=True)
class AlphabetSpec:
    """Finite symbol set with a bounded metric on symbols.

    ``metric[a][b]`` is the distance between the symbols with indices
    ``a`` and ``b``.  The table must be symmetric, zero exactly on the
    diagonal, strictly positive off it, and satisfy the triangle
    inequality on all triples.
    """

    symbols: tuple[str, ...]
    metric: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.symbols)
        if not 2 <= n <= 16:
            raise ValueError(f"alphabet size must be in 2..16, got {n}")
        if len(set(self.symbols)) != n:
            raise ValueError("alphabet symbols must be distinct")
        if len(self.metric) != n or any(len(row) != n for row in self.metric):
            raise ValueError("metric table must be square of alphabet size")
        d = self.metric
        for a in range(n):
            if d[a][a] != 0.0:
                raise ValueError(f"metric diagonal must vanish, d({a},{a}) = {d[a][a]}")
            for b in range(n):
                if not np.isfinite(d[a][b]):
                    raise ValueError("metric entries must be finite")
                if a != b and d[a][b] <= 0.0:
                    raise ValueError(f"metric must be positive off-diagonal, d({a},{b}) = {d[a][b]}")
                if d[a][b] != d[b][a]:
                    raise ValueError(f"metric must be symmetric, d({a},{b}) != d({b},{a})")
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    if d[a][b] > d[a][c] + d[c][b] + 1e-15:
                        raise ValueError(
                            f"metric violates the triangle inequality on ({a},{b},{c})"
                        )

    @staticmethod
    def discrete(symbols: Sequence[str]) -> "AlphabetSpec":
        """Canonical default: distance 1 between any two distinct symbols."""
        n = len(symbols)
        metric = tuple(
            tuple(0.0 if a == b else 1.0 for b in range(n)) for a in range(n)
        )
        return AlphabetSpec(tuple(symbols), metric)

    @staticmethod
    def binary() -> "AlphabetSpec":
        return AlphabetSpec.discrete(("0", "1"))

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def diameter(self) -> float:
        return max(max(row) for row in self.metric)

    def distance(self, a: int, b: int) -> float:
        return self.metric[a][b]

    def metric_array(self) -> np.ndarray:
        return np.asarray(self.metric, dtype=float)

    def index_of(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValueError(f"unknown symbol {symbol!r}") from None


@dataclass(frozen=True, order=True)
class Window:
    """Finite integer interval of sites ``[lo, hi]``."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ValueError(f"window requires lo <= hi, got [{self.lo}, {self.hi}]")

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    def sites(self) -> range:
        return range(self.lo, self.hi + 1)

    def contains(self, j: int) -> bool:
        return self.lo <= j <= self.hi

    def contains_window(self, other: "Window") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def shifted(self, offset: int) -> "Window":
        return Window(self.lo + offset, self.hi + offset)


@dataclass(frozen=True)
class PastConfig:
    """Symbols at the sites immediately left of a window, oldest first.

    A kernel of memory depth ``R`` conditions on the trailing ``R``
    entries; composition against an observable reaching further left may
    require a longer suffix.
    """

    symbols: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.symbols)

    @staticmethod
    def of(symbols: Sequence[int]) -> "PastConfig":
        return PastConfig(tuple(int(s) for s in symbols))

    @staticmethod
    def fill(symbol: int, depth: int) -> "PastConfig":
        return PastConfig((int(symbol),) * depth)


def as_symbols(past: "PastConfig | Sequence[int]") -> tuple[int, ...]:
    if isinstance(past, PastConfig):
        return past.symbols
    return tuple(int(s) for s in past)


def config_code(config: Sequence[int], n_symbols: int) -> int:
    """Big-endian integer code of a configuration tuple."""
    code = 0
    for s in config:
        code = code * n_symbols + int(s)
    return code


def code_config(code: int, n_symbols: int, length: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        out.append(code % n_symbols)
        code //= n_symbols
    return tuple(reversed(out))


def enumerate_configs(
    window: Window, alphabet: AlphabetSpec, cap: int = DEFAULT_CONFIG_CAP
) -> Iterator[tuple[int, ...]]:
    """Yield every configuration of ``window`` once, in lexicographic order."""
    size = check_cap(alphabet.size, len(window), cap)
    length = len(window)
    for code in range(size):
        yield code_config(code, alphabet.size, length)


@dataclass(frozen=True)
class FiniteDistribution:
    """Probability weights over alphabet symbols or window configurations."""

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(w < 0.0 for w in self.weights):
            raise ValueError("distribution weights must be non-negative")
        total = sum(self.weights)
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"distribution weights sum to {total!r}, expected 1")

    def __len__(self) -> int:
        return len(self.weights)

    def p(self, i: int) -> float:
        return self.weights[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


@dataclass(frozen=True)
class Observable:
    """Local function on a finite window, stored as a value table.

    ``table[code]`` is the value at the configuration with that code.
    Oscillations are computed on demand and cached per (site, alphabet).
    """

    support: Window
    alphabet: AlphabetSpec
    table: tuple[float, ...]
    _osc_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        expected = self.alphabet.size ** len(self.support)
        if len(self.table) != expected:
            raise ValueError(
                f"observable table has {len(self.table)} entries, expected {expected}"
            )

    def value_at(self, config: Sequence[int]) -> float:
        if len(config) != len(self.support):
            raise ValueError("configuration length must match the support")
        return self.table[config_code(config, self.alphabet.size)]

    def table_array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=float)

    def max_abs(self) -> float:
        return max(abs(v) for v in self.table)


def oscillation(h: Observable, j: int, alphabet: AlphabetSpec | None = None) -> float:
    """Worst change of ``h`` per unit metric distance at site ``j``.

    Exhaustive maximum over configuration pairs equal off ``j``; sites
    outside the support contribute 0 by definition (and 0/0 counts as 0,
    which never arises since the metric is positive off-diagonal).
    """
    alphabet = h.alphabet if alphabet is None else alphabet
    if alphabet.size != h.alphabet.size:
        raise ValueError("alphabet size does not match the observable table")
    if not h.support.contains(j):
        return 0.0
    key = (j, alphabet)
    cached = h._osc_cache.get(key)
    if cached is not None:
        return cached
    n = alphabet.size
    arr = h.table_array().reshape((n,) * len(h.support))
    axis = j - h.support.lo
    flat = np.moveaxis(arr, axis, -1).reshape(-1, n)
    best = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            gap = float(np.max(np.abs(flat[:, a] - flat[:, b])))
            best = max(best, gap / alphabet.distance(a, b))
    h._osc_cache[key] = best
    return best


def oscillation_vector(h: Observable, window: Window) -> dict[int, float]:
    """Oscillations of ``h`` at every site of ``window`` (zeros dropped)."""
    out: dict[int, float] = {}
    for k in window.sites():
        v = oscillation(h, k)
        if v > 0.0:
            out[k] = v
    return out


def constant_observable(window: Window, alphabet: AlphabetSpec, value: float) -> Observable:
    size = alphabet.size ** len(window)
    return Observable(window, alphabet, (float(value),) * size)


def indicator(site: int, symbol: int, alphabet: AlphabetSpec) -> Observable:
    """Indicator of the event ``sigma_site == symbol``."""
    if not 0 <= symbol < alphabet.size:
        raise ValueError(f"symbol index {symbol} outside the alphabet")
    table = tuple(1.0 if x == symbol else 0.0 for x in range(alphabet.size))
    return Observable(Window(site, site), alphabet, table)


def tabulate(
    window: Window,
    alphabet: AlphabetSpec,
    fn: Callable[[tuple[int, ...]], float],
    cap: int = DEFAULT_CONFIG_CAP,
) -> Observable:
    table = tuple(float(fn(cfg)) for cfg in enumerate_configs(window, alphabet, cap))
    return Observable(window, alphabet, table)


def random_observable(
    window: Window,
    alphabet: AlphabetSpec,
    rng: np.random.Generator,
    cap: int = DEFAULT_CONFIG_CAP,
) -> Observable:
    """Value table drawn i.i.d. uniform on [0, 1)."""
    size = check_cap(alphabet.size, len(window), cap)
    return Observable(window, alphabet, tuple(rng.random(size).tolist()))


def shift_observable(h: Observable, offset: int) -> Observable:
    return Observable(h.support.shifted(offset), h.alphabet, h.table)


def product_observable(h1: Observable, h2: Observable, cap: int = DEFAULT_CONFIG_CAP) -> Observable:
    """Pointwise product on the hull of the two supports."""
    if h1.alphabet != h2.alphabet:
        raise ValueError("observables live on different alphabets")
    hull = Window(min(h1.support.lo, h2.support.lo), max(h1.support.hi, h2.support.hi))

    def value(cfg: tuple[int, ...]) -> float:
        sub1 = cfg[h1.support.lo - hull.lo : h1.support.hi - hull.lo + 1]
        sub2 = cfg[h2.support.lo - hull.lo : h2.support.hi - hull.lo + 1]
        return h1.value_at(sub1) * h2.value_at(sub2)

    return tabulate(hull, h1.alphabet, value, cap)
