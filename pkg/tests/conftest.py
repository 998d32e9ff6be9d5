"""Shared fixtures: the three reference kernels and random-kernel factories."""

from __future__ import annotations

import numpy as np
import pytest

from lislab import AlphabetSpec, GeneralTable, KernelSpec
from lislab.specio import iid_kernel, power_law_linear, two_state_markov


@pytest.fixture(scope="session")
def k1() -> KernelSpec:
    """Two-state chain, P(1|0) = 0.3, P(1|1) = 0.7."""
    return two_state_markov(0.3, 0.7, label="K1")


@pytest.fixture(scope="session")
def k2() -> KernelSpec:
    """Depth-4 linear long-memory kernel with power-law lags (eps = 0.5).

    Normalised by the partial sum, so the coefficients add to exactly
    1 - eps = 0.5 and the all-ones past gives P(1) = 0.5.
    """
    return power_law_linear(0.5, 4, normalization="partial", label="K2")


@pytest.fixture(scope="session")
def k3() -> KernelSpec:
    """Fair i.i.d. coin."""
    return iid_kernel((0.5, 0.5), label="K3")


def random_table_kernel(
    rng: np.random.Generator,
    n_symbols: int | None = None,
    depth: int | None = None,
    floor: float = 0.05,
    label: str = "",
) -> KernelSpec:
    """Random full-table kernel with a probability floor on every entry."""
    n = int(rng.integers(2, 4)) if n_symbols is None else n_symbols
    r = int(rng.integers(0, 3)) if depth is None else depth
    rows = []
    for _ in range(n**r):
        w = floor + rng.random(n)
        w = w / w.sum()
        rows.append(tuple(float(x) for x in w))
    alphabet = AlphabetSpec.discrete(tuple(str(i) for i in range(n)))
    return KernelSpec(alphabet, r, GeneralTable(tuple(rows)), label=label)


def random_distribution(rng: np.random.Generator, n: int) -> tuple[float, ...]:
    w = rng.random(n) + 1e-3
    w = w / w.sum()
    return tuple(float(x) for x in w)
