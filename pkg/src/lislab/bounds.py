"""Quantitative decay bounds driven by a sensitivity matrix.

All bounds reduce to sums of powers of the projected sensitivity matrix.
Because the matrix is strictly banded below the diagonal, its powers
within a finite window vanish after as many terms as the window has
sites, so every window sum here is exact; only sums over arbitrarily
deep past sites are truncated, and those truncations always carry an
explicit geometric certificate that is added to the bound rather than
dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .core import (
    DEFAULT_CONFIG_CAP,
    Observable,
    Window,
    check_cap,
    oscillation,
    oscillation_vector,
)
from .analysis import (
    SensitivityMatrix,
    build_sensitivity_matrix,
    dobrushin_check,
)
from .kernels import KernelSpec, family_row


class BoundNotApplicableError(RuntimeError):
    """A bound's hypothesis fails at the supplied inputs."""

    def __init__(self, message: str, gamma: float | None = None):
        super().__init__(message)
        self.gamma = gamma


@dataclass(frozen=True)
class BoundReport:
    """A bound value plus every intermediate quantity behind it."""

    name: str
    value: float
    quantities: Mapping[str, float] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "bound": self.name,
            "value": self.value,
            "quantities": dict(self.quantities),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class DecaySpec:
    """Distance-decay profile entering the exponential-form bounds."""

    family: str
    rate: float

    def __post_init__(self) -> None:
        if self.family not in ("exponential", "powerlog"):
            raise ValueError(f"unknown decay family {self.family!r}")
        if not self.rate > 0.0:
            raise ValueError("decay rate must be positive")

    def weight(self, gap: int) -> float:
        gap = abs(gap)
        if self.family == "exponential":
            return self.rate * gap
        return self.rate * math.log1p(gap)


def _window_row_sup(alpha: SensitivityMatrix, window: Window) -> float:
    return max(alpha.row_sum(i) for i in window.sites())


def _dense_power_sum(
    alpha: SensitivityMatrix,
    window: Window,
    max_terms: int | None = None,
    tol: float = 0.0,
) -> tuple[np.ndarray, int, int, float, float]:
    """Sum of powers of the window-projected matrix, rows in the window.

    Returns ``(matrix, col_lo, terms, tail_bound, row_sum_sup)`` where the
    matrix columns cover ``[window.lo - depth, window.hi]``.  With
    ``tol == 0`` the sum runs until the powers vanish, which happens after
    at most ``len(window)`` terms, so the result is exact.
    """
    length = len(window)
    depth = alpha.depth
    col_lo = window.lo - depth
    a = np.zeros((length, length + depth))
    for ri, i in enumerate(window.sites()):
        for lag in range(1, depth + 1):
            j = i - lag
            if j >= col_lo:
                a[ri, j - col_lo] = alpha.entry(i, j)
    row_sup = _window_row_sup(alpha, window)
    limit = length if max_terms is None else min(max_terms, length)
    total = a.copy()
    term = a
    terms = 1
    tail = 0.0
    while terms < limit:
        term = term[:, depth:] @ a
        terms += 1
        total += term
        peak = float(np.abs(term).max())
        if peak == 0.0:
            break
        if tol > 0.0 and peak < tol:
            tail = row_sup ** (terms + 1) / (1.0 - row_sup) if row_sup < 1.0 else math.inf
            break
    return total, col_lo, terms, tail, row_sup


@dataclass(frozen=True)
class NeumannSeries:
    """All-orders power sum of a window-projected sensitivity matrix."""

    window: Window
    col_lo: int
    matrix: np.ndarray = field(repr=False)
    terms: int
    tail_bound: float
    row_sum_sup: float
    diverged: bool

    def entry(self, k: int, j: int) -> float:
        if not self.window.contains(k):
            raise ValueError(f"row site {k} outside the window")
        if j < self.col_lo or j > self.window.hi:
            return 0.0
        return float(self.matrix[k - self.window.lo, j - self.col_lo])


def neumann_series(
    alpha: SensitivityMatrix, window: Window, tol: float = 1e-12
) -> NeumannSeries:
    """Exact Neumann sum over the window, with a divergence flag.

    The banded structure makes the series a finite sum, so the value is
    exact even when the row-sum condition fails; the flag records that
    the infinite-volume object behind it would not converge.
    """
    total, col_lo, terms, tail, row_sup = _dense_power_sum(alpha, window, None, tol)
    return NeumannSeries(
        window=window,
        col_lo=col_lo,
        matrix=total,
        terms=terms,
        tail_bound=tail,
        row_sum_sup=row_sup,
        diverged=row_sup >= 1.0,
    )


def _column_paths(alpha: SensitivityMatrix, k: int, top: int) -> np.ndarray:
    """Neumann column at site ``k`` for windows ``[k+1, anything >= i]``.

    ``vals[g]`` sums the weights of all strictly decreasing paths from
    ``k + g`` down to ``k``; a descending path never leaves the interval,
    so the window's right end is irrelevant and one recursion serves all
    windows.  ``vals[0] = 1`` is the empty-path boundary value, not a
    series entry.
    """
    depth = alpha.depth
    vals = np.zeros(top - k + 1)
    vals[0] = 1.0
    for i in range(k + 1, top + 1):
        acc = 0.0
        for lag in range(1, min(depth, i - k) + 1):
            a = alpha.entry(i, i - lag)
            if a != 0.0:
                acc += a * vals[i - lag - k]
        vals[i - k] = acc
    return vals


def memory_bound_general(
    alpha: SensitivityMatrix, window: Window, h: Observable, j: int
) -> BoundReport:
    """Oscillation bound at a past site for the window average of ``h``.

    Sums the support oscillations of ``h`` against the window-limited
    power sum (as many terms as the window has sites, which is exact).
    """
    if j >= window.lo:
        raise ValueError("the probed site must lie left of the window")
    if not window.contains_window(h.support):
        raise ValueError("observable support must lie inside the window")
    total, col_lo, terms, _, row_sup = _dense_power_sum(alpha, window, len(window), 0.0)
    value = 0.0
    if col_lo <= j:
        for k, osc in oscillation_vector(h, h.support).items():
            value += osc * float(total[k - window.lo, j - col_lo])
    return BoundReport(
        name="memory-general",
        value=value,
        quantities={"terms": float(terms), "row_sum_sup": row_sup},
    )


def _gammas(alpha: SensitivityMatrix, decay: DecaySpec) -> dict[str, float]:
    def row_gamma(row: tuple[float, ...]) -> float:
        return float(
            sum(a * math.exp(decay.weight(lag)) for lag, a in enumerate(row, start=1))
        )

    out = {"stationary": row_gamma(alpha.stationary_row)}
    for site, row in alpha.site_rows:
        out[f"site:{site}"] = row_gamma(row)
    return out


def gamma_for_window(alpha: SensitivityMatrix, decay: DecaySpec, window: Window) -> float:
    gammas = _gammas(alpha, decay)
    override = {int(k.split(":")[1]): v for k, v in gammas.items() if k != "stationary"}
    return max(override.get(i, gammas["stationary"]) for i in window.sites())


def memory_bound_exponential(
    alpha: SensitivityMatrix,
    decay: DecaySpec,
    window: Window,
    h: Observable,
    j: int,
) -> BoundReport:
    """Closed-form decay bound: prefactor times metric-decay weights.

    Requires the decay-tilted row sums to stay below 1 on the window;
    raises otherwise, carrying the violating value.
    """
    if j >= window.lo:
        raise ValueError("the probed site must lie left of the window")
    if not window.contains_window(h.support):
        raise ValueError("observable support must lie inside the window")
    gamma = gamma_for_window(alpha, decay, window)
    if gamma >= 1.0:
        raise BoundNotApplicableError(
            f"tilted row sum {gamma!r} is not below 1 on the window", gamma=gamma
        )
    pref = gamma / (1.0 - gamma)
    value = 0.0
    for k, osc in oscillation_vector(h, h.support).items():
        value += osc * math.exp(-decay.weight(k - j))
    return BoundReport(
        name="memory-exponential",
        value=pref * value,
        quantities={"gamma_window": gamma, "prefactor": pref, "rate": decay.rate},
        notes=(f"decay family {decay.family}",),
    )


def fit_decay_rate(
    alpha: SensitivityMatrix,
    family: str = "exponential",
    slack: float = 1e-6,
    hi: float = 50.0,
    steps: int = 40,
) -> DecaySpec:
    """Largest decay rate keeping every tilted row sum below 1 - slack.

    Deterministic bisection on [0, hi]; returns the grid maximum when
    even that is feasible, and raises when no positive rate is.
    """

    def sup_gamma(rate: float) -> float:
        if rate == 0.0:
            return alpha.sup_row_sum()
        return max(_gammas(alpha, DecaySpec(family, rate)).values())

    target = 1.0 - slack
    if sup_gamma(0.0) > target:
        raise BoundNotApplicableError(
            "row sums leave no room for a positive decay rate", gamma=sup_gamma(0.0)
        )
    if sup_gamma(hi) <= target:
        return DecaySpec(family, hi)
    lo_rate, hi_rate = 0.0, hi
    for _ in range(steps):
        mid = 0.5 * (lo_rate + hi_rate)
        if sup_gamma(mid) <= target:
            lo_rate = mid
        else:
            hi_rate = mid
    if lo_rate == 0.0:
        raise BoundNotApplicableError("no positive feasible decay rate", gamma=sup_gamma(0.0))
    return DecaySpec(family, lo_rate)


@dataclass(frozen=True)
class SeriesDecayReport:
    """Per-entry comparison of the power sum against its decay envelope."""

    window: Window
    gamma_window: float
    entries_checked: int
    worst_margin: float

    @property
    def holds(self) -> bool:
        return self.worst_margin >= -1e-12


def series_decay_bound(
    alpha: SensitivityMatrix, decay: DecaySpec, window: Window
) -> SeriesDecayReport:
    """Check the power-sum entries against the exponential envelope.

    The envelope dominates every entry whenever the tilted row sums stay
    below 1; used as a cross-check on the dense power sums.
    """
    gamma = gamma_for_window(alpha, decay, window)
    if gamma >= 1.0:
        raise BoundNotApplicableError(
            f"tilted row sum {gamma!r} is not below 1 on the window", gamma=gamma
        )
    total, col_lo, _, _, _ = _dense_power_sum(alpha, window, None, 0.0)
    pref = gamma / (1.0 - gamma)
    worst = math.inf
    checked = 0
    for ri, k in enumerate(window.sites()):
        for cj in range(total.shape[1]):
            j = col_lo + cj
            if j >= k:
                continue
            rhs = pref * math.exp(-decay.weight(k - j))
            worst = min(worst, rhs - float(total[ri, cj]))
            checked += 1
    return SeriesDecayReport(window, gamma, checked, worst)


def _tail_step_base(alpha: SensitivityMatrix) -> float:
    """Per-site geometric factor for past-tail certificates."""
    s = alpha.sup_row_sum()
    if s <= 0.0:
        return 0.0
    return s ** (1.0 / alpha.depth)


def _weighted_column(osc: dict[int, float], col: np.ndarray, k: int) -> float:
    acc = 0.0
    for site, weight in osc.items():
        gap = site - k
        if gap >= 1:
            acc += weight * float(col[gap])
    return acc


def correlation_bound(
    alpha: SensitivityMatrix,
    lam: Window,
    delta: Window,
    h1: Observable,
    h2: Observable,
    diameter: float,
    tol: float = 1e-12,
) -> BoundReport:
    """Covariance bound for observables on two ordered windows.

    Pairs the oscillations of the two observables through products of
    Neumann column entries; the sum over arbitrarily deep coupling sites
    is truncated with a geometric certificate that is added to the bound.
    Requires the window of ``h2`` to end left of the window of ``h1`` and
    the row-sum criterion to hold.
    """
    if delta.hi >= lam.lo:
        raise ValueError("the second window must end strictly left of the first")
    if not lam.contains_window(h1.support) or not delta.contains_window(h2.support):
        raise ValueError("observable supports must lie inside their windows")
    s = alpha.sup_row_sum()
    if s >= 1.0:
        raise BoundNotApplicableError(
            f"row-sum criterion unsatisfied (sup {s!r}), the bound does not apply",
            gamma=s,
        )
    base = diameter * diameter / 4.0
    osc1 = oscillation_vector(h1, h1.support)
    osc2 = oscillation_vector(h2, h2.support)
    if not osc1 or not osc2:
        return BoundReport(
            name="correlation",
            value=0.0,
            quantities={"row_sum_sup": s, "tail_certificate": 0.0, "k_floor": float(delta.hi)},
        )
    term1 = 0.0
    for l, w2 in osc2.items():
        col = _column_paths(alpha, l, lam.hi)
        term1 += w2 * _weighted_column(osc1, col, l)
    u = _tail_step_base(alpha)
    acc = 0.0
    k = delta.hi
    tail = 0.0
    floor = delta.hi - 200000
    while True:
        col = _column_paths(alpha, k, lam.hi)
        f1 = _weighted_column(osc1, col, k)
        f2 = _weighted_column(osc2, col, k)
        acc += f1 * f2
        p1 = sum(w * u ** (site - (k - 1)) for site, w in osc1.items())
        p2 = sum(w * u ** (site - (k - 1)) for site, w in osc2.items())
        tail = (p1 / (1.0 - s)) * (p2 / (1.0 - s)) / (1.0 - u * u)
        if tail <= tol * max(1.0, term1 + acc):
            break
        k -= 1
        if k < floor:
            raise RuntimeError("correlation tail failed to certify within the site budget")
    value = base * (term1 + acc + tail)
    return BoundReport(
        name="correlation",
        value=value,
        quantities={
            "row_sum_sup": s,
            "direct_term": base * term1,
            "coupling_term": base * acc,
            "tail_certificate": base * tail,
            "k_floor": float(k),
        },
    )


def correlation_bound_semi_exact(
    f: KernelSpec,
    alpha: SensitivityMatrix,
    lam: Window,
    delta: Window,
    h1: Observable,
    h2: Observable,
    diameter: float | None = None,
    tol: float = 1e-12,
    cap: int = DEFAULT_CONFIG_CAP,
) -> BoundReport:
    """Variant using exact oscillations of the second window's averages.

    Theoscillation factor for ``h2`` is taken from the brute-force
    oracle while it fits under the cap; deeper sites fall back to the
    Neumann product with the same geometric certificate.
    """
    from . import oracle as _oracle
    from .core import CapExceededError

    if delta.hi >= lam.lo:
        raise ValueError("the second window must end strictly left of the first")
    s = alpha.sup_row_sum()
    if s >= 1.0:
        raise BoundNotApplicableError("row-sum criterion unsatisfied", gamma=s)
    diameter = f.alphabet.diameter if diameter is None else diameter
    base = diameter * diameter / 4.0
    osc1 = oscillation_vector(h1, h1.support)
    osc2 = oscillation_vector(h2, h2.support)
    if not osc1 or not osc2:
        return BoundReport(name="correlation-semi-exact", value=0.0, quantities={"row_sum_sup": s})
    value = 0.0
    exact_terms = 0
    k = delta.hi
    while True:
        col = _column_paths(alpha, k, lam.hi)
        f1 = _weighted_column(osc1, col, k)
        if k == delta.hi:
            factor = oscillation(h2, k)
        else:
            try:
                factor = _oracle.exact_oscillation_of_average(
                    f, Window(k + 1, delta.hi), h2, k, cap=cap
                )
                exact_terms += 1
            except CapExceededError:
                break
        value += f1 * factor
        k -= 1
    # beyond the cap: certified Neumann products, direct terms included
    u = _tail_step_base(alpha)
    while True:
        col = _column_paths(alpha, k, lam.hi)
        f1 = _weighted_column(osc1, col, k)
        f2 = osc2.get(k, 0.0) + _weighted_column(osc2, col, k)
        value += f1 * f2
        if k < delta.lo:
            p1 = sum(w * u ** (site - (k - 1)) for site, w in osc1.items())
            p2 = sum(w * u ** (site - (k - 1)) for site, w in osc2.items())
            cert = (p1 / (1.0 - s)) * (p2 / (1.0 - s)) / (1.0 - u * u) if s > 0.0 else 0.0
            if cert <= tol * max(1.0, value):
                value += cert
                break
        k -= 1
        if k < delta.hi - 200000:
            raise RuntimeError("correlation tail failed to certify within the site budget")
    return BoundReport(
        name="correlation-semi-exact",
        value=base * value,
        quantities={"row_sum_sup": s, "exact_terms": float(exact_terms)},
        notes=("exact oscillation factors below the cap, certified products beyond",),
    )


def _kernel_gap_sup(
    f: KernelSpec, f_tilde: KernelSpec, site: int, cap: int
) -> float:
    """Worst transport distance between the two site conditionals."""
    from .analysis import vkr_distance

    depth = max(f.memory_depth, f_tilde.memory_depth)
    n = f.alphabet.size
    size = check_cap(n, depth, cap)
    fam = f.family_at(site)
    fam_t = f_tilde.family_at(site)
    worst = 0.0
    from .core import code_config

    for code in range(size):
        past = code_config(code, n, depth)
        row = family_row(fam, f.alphabet, past)
        row_t = family_row(fam_t, f_tilde.alphabet, past)
        worst = max(worst, vkr_distance(row, row_t, f.alphabet))
    return worst


def comparison_bound(
    f: KernelSpec,
    f_tilde: KernelSpec,
    lam: Window,
    h: Observable,
    tol: float = 1e-12,
    gap_override: float | None = None,
    cap: int = DEFAULT_CONFIG_CAP,
) -> BoundReport:
    """Bound on the expectation gap between the chains of two kernels.

    The per-site transport gap is maximised over pasts (a valid stand-in
    for its unknown average under the second chain), and each site's gap
    is weighted by how strongly the window average still depends on that
    site.  The sum over past sites carries a geometric tail certificate.
    ``gap_override`` substitutes a precomputed per-site gap, e.g. a
    truncation tail, when enumerating pasts is impossible.
    """
    if f.alphabet != f_tilde.alphabet:
        raise ValueError("kernels must share one alphabet")
    alpha = build_sensitivity_matrix(f, cap)
    verdict = dobrushin_check(alpha)
    if not verdict.satisfied:
        raise BoundNotApplicableError(
            "the reference kernel fails the row-sum criterion", gamma=alpha.sup_row_sum()
        )
    if not lam.contains_window(h.support):
        raise ValueError("observable support must lie inside the window")
    s = alpha.sup_row_sum()
    osc = oscillation_vector(h, h.support)
    if not osc:
        return BoundReport(name="comparison", value=0.0, quantities={"row_sum_sup": s})

    gap_cache: dict[int, float] = {}
    _DEFAULT_KEY = -(10**9)

    def gap_at(site: int) -> float:
        if gap_override is not None:
            return gap_override
        if site in f.override_sites or site in f_tilde.override_sites:
            key = site
        else:
            key = _DEFAULT_KEY
        if key not in gap_cache:
            gap_cache[key] = _kernel_gap_sup(f, f_tilde, site, cap)
        return gap_cache[key]

    override_floor = min(
        (site for site in f.override_sites + f_tilde.override_sites), default=lam.lo
    )
    acc = 0.0
    k = lam.hi
    tail = 0.0
    u = _tail_step_base(alpha)
    gap_sup = 0.0
    while True:
        col = _column_paths(alpha, k, lam.hi)
        osc_factor = osc.get(k, 0.0) + _weighted_column(osc, col, k)
        gap_k = gap_at(k)
        gap_sup = max(gap_sup, gap_k)
        acc += gap_k * osc_factor
        if s == 0.0:
            if k <= lam.lo:
                break
        elif k < min(lam.lo, override_floor):
            p = sum(w * u ** (site - (k - 1)) for site, w in osc.items())
            tail = gap_sup * p / ((1.0 - s) * (1.0 - u))
            if tail <= tol * max(1.0, acc):
                break
        k -= 1
        if k < lam.hi - 200000:
            raise RuntimeError("comparison tail failed to certify within the site budget")
    value = acc + tail
    return BoundReport(
        name="comparison",
        value=value,
        quantities={
            "row_sum_sup": s,
            "gap_sup": gap_sup,
            "tail_certificate": tail,
            "k_floor": float(k),
        },
    )
