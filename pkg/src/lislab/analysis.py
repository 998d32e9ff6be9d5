"""Variations, transport distances, sensitivity matrices, and the two
uniqueness criteria (row-sum contraction and boundary uniformity).

Transport distances between conditional laws are solved exactly: by
vertex enumeration on the transportation polytope for alphabets of up to
three symbols, and by the HiGHS simplex (which terminates at a vertex)
above that; the two solvers are cross-checked in the test suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .core import (
    DEFAULT_CONFIG_CAP,
    AlphabetSpec,
    FiniteDistribution,
    check_cap,
)
from .kernels import (
    KernelSpec,
    LinearLongMemory,
    conditional_array,
    family_order,
    family_row,
)

#: Alphabet size up to which the transport problem is solved by
#: enumerating spanning-tree vertices of the transportation polytope.
VERTEX_ENUM_MAX = 3


def variation(f: KernelSpec, i: int, j: int, cap: int = DEFAULT_CONFIG_CAP) -> float:
    """Worst change of the site-``i`` conditional over pasts agreeing on ``[j, i]``.

    The agreement region includes the evaluated site itself, so ``j == i``
    frees the whole past; pasts further back than the memory depth cannot
    matter and the value is 0 once ``i - j >= R``.
    """
    if j > i:
        raise ValueError("variation requires j <= i")
    lag = i - j
    depth = f.memory_depth
    free = depth - min(lag, depth)
    if free <= 0:
        return 0.0
    family = f.family_at(i)
    if isinstance(family, LinearLongMemory):
        # affine dependence: the sup flips every free coordinate at once
        return float(sum(family.coefficients[lag:]))
    n = f.alphabet.size
    agree = depth - free
    check_cap(n, depth, cap)
    rows = conditional_array(family, f.alphabet, depth)
    worst = 0.0
    agree_size = n**agree
    for shared in range(agree_size):
        idx = np.arange(n**free, dtype=np.int64) * agree_size + shared
        block = rows[idx]
        worst = max(worst, float((block.max(axis=0) - block.min(axis=0)).max()))
    return worst


def _variation_enumerated(f: KernelSpec, i: int, j: int, cap: int = DEFAULT_CONFIG_CAP) -> float:
    """Enumeration-only path, used to cross-check the closed forms."""
    if isinstance(f.family_at(i), LinearLongMemory):
        table = KernelSpec(
            f.alphabet,
            f.memory_depth,
            _as_general_table(f, i),
            check=f.check,
        )
        return variation(table, i, j, cap)
    return variation(f, i, j, cap)


def _as_general_table(f: KernelSpec, i: int):
    from .kernels import GeneralTable

    rows = conditional_array(f.family_at(i), f.alphabet, f.memory_depth)
    return GeneralTable(tuple(tuple(float(x) for x in row) for row in rows))


def _solve_tree(
    edges: tuple[tuple[int, int], ...], p: np.ndarray, q: np.ndarray
) -> np.ndarray | None:
    """Flow on a spanning tree of the supply/demand bipartite graph.

    Returns the edge flows (ordered as ``edges``) or None when the basic
    solution is infeasible.
    """
    n, m = len(p), len(q)
    supply = list(p) + list(q)
    adj: dict[int, list[int]] = {v: [] for v in range(n + m)}
    for e, (i, j) in enumerate(edges):
        adj[i].append(e)
        adj[n + j].append(e)
    flows = [0.0] * len(edges)
    done = [False] * len(edges)
    degrees = {v: len(a) for v, a in adj.items()}
    leaves = [v for v, d in degrees.items() if d == 1]
    while leaves:
        v = leaves.pop()
        live = [e for e in adj[v] if not done[e]]
        if not live:
            continue
        e = live[0]
        flows[e] = supply[v]
        done[e] = True
        i, j = edges[e]
        other = n + j if v == i else i
        supply[other] -= supply[v]
        supply[v] = 0.0
        degrees[other] -= 1
        if degrees[other] == 1:
            leaves.append(other)
    if any(x < -1e-12 for x in flows):
        return None
    return np.maximum(np.asarray(flows), 0.0)


def _vkr_vertex_enum(p: np.ndarray, q: np.ndarray, dist: np.ndarray) -> float:
    """Exact transport cost by enumerating spanning-tree vertices."""
    n, m = len(p), len(q)
    all_edges = [(i, j) for i in range(n) for j in range(m)]
    best = math.inf
    for edges in itertools.combinations(all_edges, n + m - 1):
        parent = list(range(n + m))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        acyclic = True
        for i, j in edges:
            a, b = find(i), find(n + j)
            if a == b:
                acyclic = False
                break
            parent[a] = b
        if not acyclic:
            continue
        flows = _solve_tree(edges, p, q)
        if flows is None:
            continue
        cost = float(sum(fl * dist[i, j] for fl, (i, j) in zip(flows, edges)))
        best = min(best, cost)
    return best


def _vkr_linprog(p: np.ndarray, q: np.ndarray, dist: np.ndarray) -> float:
    n, m = len(p), len(q)
    c = dist.reshape(-1)
    a_rows = np.zeros((n, n * m))
    for i in range(n):
        a_rows[i, i * m : (i + 1) * m] = 1.0
    a_cols = np.zeros((m, n * m))
    for j in range(m):
        a_cols[j, j::m] = 1.0
    res = linprog(
        c,
        A_eq=np.vstack([a_rows, a_cols]),
        b_eq=np.concatenate([p, q]),
        bounds=(0, None),
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"transport solver failed: {res.message}")
    return float(res.fun)


def vkr_distance(
    p: "FiniteDistribution | Sequence[float]",
    q: "FiniteDistribution | Sequence[float]",
    alphabet: AlphabetSpec,
) -> float:
    """Exact optimal-transport cost between two laws on the alphabet."""
    pa = p.as_array() if isinstance(p, FiniteDistribution) else np.asarray(p, dtype=float)
    qa = q.as_array() if isinstance(q, FiniteDistribution) else np.asarray(q, dtype=float)
    if len(pa) != alphabet.size or len(qa) != alphabet.size:
        raise ValueError("distributions must live on the given alphabet")
    dist = alphabet.metric_array()
    if alphabet.size <= VERTEX_ENUM_MAX:
        return _vkr_vertex_enum(pa, qa, dist)
    return _vkr_linprog(pa, qa, dist)


def sensitivity_estimator(f: KernelSpec, i: int, j: int, cap: int = DEFAULT_CONFIG_CAP) -> float:
    """Transport sensitivity of the site-``i`` conditional to site ``j``.

    Maximum over pasts equal off ``j`` of the transport distance between
    the two conditional laws, per unit metric distance of the flipped
    symbols.  Zero beyond the memory depth.
    """
    if j >= i:
        raise ValueError("sensitivity estimator requires j < i")
    lag = i - j
    depth = f.memory_depth
    if lag > depth:
        return 0.0
    family = f.family_at(i)
    if isinstance(family, LinearLongMemory):
        # transport distance between Bernoulli laws is |p - p'| * d(0,1);
        # flipping the lag-k coordinate moves p by exactly a_{-k}
        return float(family.coefficients[lag - 1])
    n = f.alphabet.size
    check_cap(n, depth, cap)
    rows = conditional_array(family, f.alphabet, depth)
    pos = depth - lag
    low_size = n ** (depth - 1 - pos)
    worst = 0.0
    for rest in range(n ** (depth - 1)):
        high, low = divmod(rest, low_size)
        base = high * n * low_size + low
        for a in range(n):
            for b in range(a + 1, n):
                dab = f.alphabet.distance(a, b)
                cost = vkr_distance(
                    rows[base + a * low_size], rows[base + b * low_size], f.alphabet
                )
                worst = max(worst, cost / dab)
    return worst


@dataclass(frozen=True)
class SensitivityMatrix:
    """Banded non-negative matrix bounding oscillation spread to the past.

    Entries live strictly below the diagonal within ``depth`` bands.  The
    stationary row applies everywhere except at explicit site overrides.
    """

    depth: int
    stationary_row: tuple[float, ...]
    site_rows: tuple[tuple[int, tuple[float, ...]], ...] = ()
    provenance: str = "vkr-estimator"
    truncation_tail: float = 0.0

    def __post_init__(self) -> None:
        if len(self.stationary_row) != self.depth:
            raise ValueError("stationary row length must equal the depth")
        if any(a < 0.0 for a in self.stationary_row):
            raise ValueError("sensitivity entries must be non-negative")
        for site, row in self.site_rows:
            if len(row) != self.depth:
                raise ValueError(f"row for site {site} has the wrong length")
            if any(a < 0.0 for a in row):
                raise ValueError("sensitivity entries must be non-negative")

    def row(self, i: int) -> tuple[float, ...]:
        for site, row in self.site_rows:
            if site == i:
                return row
        return self.stationary_row

    def entry(self, i: int, j: int) -> float:
        lag = i - j
        if not 1 <= lag <= self.depth:
            return 0.0
        return self.row(i)[lag - 1]

    def row_sum(self, i: int) -> float:
        return float(sum(self.row(i)))

    def sup_row_sum(self) -> float:
        sums = [float(sum(self.stationary_row))]
        sums.extend(float(sum(row)) for _, row in self.site_rows)
        return max(sums)

    @property
    def stationary(self) -> bool:
        return not self.site_rows

    @staticmethod
    def from_stationary(
        row: Sequence[float], provenance: str = "user-supplied", truncation_tail: float = 0.0
    ) -> "SensitivityMatrix":
        row = tuple(float(a) for a in row)
        return SensitivityMatrix(len(row), row, (), provenance, truncation_tail)


def build_sensitivity_matrix(f: KernelSpec, cap: int = DEFAULT_CONFIG_CAP) -> SensitivityMatrix:
    """Canonical transport estimator per lag, stationary or site-indexed."""
    depth = f.memory_depth
    anchor = 0

    def row_at(site: int) -> tuple[float, ...]:
        return tuple(sensitivity_estimator(f, site, site - lag, cap) for lag in range(1, depth + 1))

    stationary_row = row_at(anchor) if f.stationary else None
    if f.stationary:
        return SensitivityMatrix(
            depth, stationary_row, (), "vkr-estimator", f.truncation_tail
        )
    default_spec = KernelSpec(f.alphabet, depth, f.family_at(10**9), check=f.check)
    default_row = tuple(
        sensitivity_estimator(default_spec, 0, -lag, cap) for lag in range(1, depth + 1)
    )
    site_rows = tuple((site, row_at(site)) for site in sorted(f.override_sites))
    return SensitivityMatrix(depth, default_row, site_rows, "vkr-estimator", f.truncation_tail)


@dataclass(frozen=True)
class CriterionVerdict:
    """Criterion outcome together with every scalar the verdict rests on."""

    criterion: str
    satisfied: bool
    scalars: Mapping[str, float] = field(default_factory=dict)
    truncation_tail: float = 0.0
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name, value in self.scalars.items():
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"criterion scalar {name} = {value!r} must be finite and >= 0")

    def as_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "satisfied": self.satisfied,
            "scalars": dict(self.scalars),
            "truncation_tail": self.truncation_tail,
            "notes": list(self.notes),
        }


def dobrushin_check(alpha: SensitivityMatrix) -> CriterionVerdict:
    """Row-sum contraction check: satisfied iff the sup row sum is < 1.

    Sums equal to 1 fail; the inequality is strict.  Uses the trivial
    one-site partition only.
    """
    s = alpha.sup_row_sum()
    return CriterionVerdict(
        criterion="dobrushin",
        satisfied=s < 1.0,
        scalars={"row_sum_sup": s, "margin": max(0.0, 1.0 - s)},
        truncation_tail=alpha.truncation_tail,
        notes=("strict inequality required: a row sum of exactly 1 fails",),
    )


def _min_probability(f: KernelSpec, cap: int) -> float:
    worst = math.inf
    for fam in f.families():
        if isinstance(fam, LinearLongMemory):
            top = fam.intercept + sum(fam.coefficients)
            worst = min(worst, fam.intercept, 1.0 - top)
        else:
            order = family_order(fam)
            check_cap(f.alphabet.size, order, cap)
            worst = min(worst, min(min(row) for row in fam.rows))
    return max(worst, 0.0)


def boundary_uniformity_check(
    f: KernelSpec, horizon: int | None = None, cap: int = DEFAULT_CONFIG_CAP
) -> CriterionVerdict:
    """Uniform non-nullness plus summable variations.

    Reports the minimal conditional probability m, the variation sum V
    over the horizon, and the uniform comparability constant exp(-V/m)
    the criterion certifies.  Satisfied iff m > 0 (V is a finite sum for
    finite-memory kernels).
    """
    depth = f.memory_depth
    horizon = depth if horizon is None else horizon
    if horizon < depth:
        raise ValueError(f"horizon {horizon} must cover the memory depth {depth}")
    m = _min_probability(f, cap)

    def v_from(n: int) -> float:
        return sum(variation(f, i, n, cap) for i in range(n, n + horizon + 1))

    if f.stationary:
        v = v_from(0)
    else:
        sites = f.override_sites
        candidates = set(range(min(sites) - horizon - 1, max(sites) + 2))
        candidates.add(max(sites) + horizon + 2)
        v = max(v_from(n) for n in sorted(candidates))
    c = math.exp(-v / m) if m > 0.0 else 0.0
    return CriterionVerdict(
        criterion="boundary-uniformity",
        satisfied=m > 0.0,
        scalars={"min_probability": m, "variation_sum": v, "constant": c},
        truncation_tail=f.truncation_tail,
        notes=(
            "variation at lag 0 (agreement on the evaluated site only) is included in V",
        ),
    )


def ergodic_coefficient(f: KernelSpec) -> float:
    """Contraction coefficient of a one-step chain.

    One minus the minimal overlap of the conditional rows over pairs of
    predecessor symbols; rejects site-indexed kernels and families that
    read more than one site back.
    """
    if not f.stationary:
        raise ValueError("ergodic coefficient requires a stationary kernel")
    if f.effective_order > 1:
        raise ValueError("ergodic coefficient requires a one-step (or i.i.d.) kernel")
    n = f.alphabet.size
    fam = f.family_at(0)
    rows = np.array(
        [family_row(fam, f.alphabet, (s,) * max(f.memory_depth, 1)) for s in range(n)],
        dtype=float,
    )
    gamma = 0.0
    for a in range(n):
        for b in range(a + 1, n):
            overlap = float(np.minimum(rows[a], rows[b]).sum())
            gamma = max(gamma, 1.0 - overlap)
    return gamma
