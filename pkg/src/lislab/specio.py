"""Kernel spec files: strict JSON parsing and builtin generators.

A spec document is a single JSON object:

    {
      "label": "K1",                      // optional
      "alphabet": {
        "symbols": ["0", "1"],
        "metric": [[0, 1], [1, 0]]        // optional, discrete by default
      },
      "memory_depth": 1,
      "kernel": { ... }                   // one of the families below
    }

Kernel families (``rows`` are conditional distributions indexed by the
lexicographic code of the conditioning past, oldest site first):

    {"type": "markov", "range": 1, "rows": [[0.7, 0.3], [0.3, 0.7]]}
    {"type": "table", "rows": [[...], ...]}
    {"type": "linear", "intercept": 0.0, "coefficients": [a1, ...],
     "tail": 0.0}
    {"type": "site_indexed", "default": {...}, "overrides": {"0": {...}}}

Unknown fields are rejected everywhere: silently ignoring a misspelled
field would silently change every downstream verdict.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from scipy.special import zeta

from .core import AlphabetSpec
from .kernels import (
    GeneralTable,
    KernelSpec,
    LinearLongMemory,
    MarkovTable,
    SiteIndexed,
)


class SpecError(ValueError):
    """A spec document is malformed."""


def _require_keys(doc: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise SpecError(f"unknown field(s) {sorted(unknown)} in {where}")
    missing = required - set(doc)
    if missing:
        raise SpecError(f"missing field(s) {sorted(missing)} in {where}")


def _as_rows(raw, where: str) -> tuple[tuple[float, ...], ...]:
    if not isinstance(raw, list) or not all(isinstance(r, list) for r in raw):
        raise SpecError(f"{where} must be a list of rows")
    try:
        return tuple(tuple(float(x) for x in row) for row in raw)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"non-numeric entry in {where}: {exc}") from None


def _parse_alphabet(doc, where: str = "alphabet") -> AlphabetSpec:
    if not isinstance(doc, dict):
        raise SpecError(f"{where} must be an object")
    _require_keys(doc, {"symbols", "metric"}, {"symbols"}, where)
    symbols = doc["symbols"]
    if not isinstance(symbols, list) or not all(isinstance(s, str) for s in symbols):
        raise SpecError(f"{where}.symbols must be a list of strings")
    if "metric" not in doc:
        return AlphabetSpec.discrete(tuple(symbols))
    metric = _as_rows(doc["metric"], f"{where}.metric")
    try:
        return AlphabetSpec(tuple(symbols), metric)
    except ValueError as exc:
        raise SpecError(f"invalid {where}: {exc}") from None


def _parse_family(doc, depth: int, where: str = "kernel"):
    if not isinstance(doc, dict):
        raise SpecError(f"{where} must be an object")
    kind = doc.get("type")
    if kind == "markov":
        _require_keys(doc, {"type", "range", "rows"}, {"type", "range", "rows"}, where)
        if not isinstance(doc["range"], int):
            raise SpecError(f"{where}.range must be an integer")
        return MarkovTable(doc["range"], _as_rows(doc["rows"], f"{where}.rows"))
    if kind == "table":
        _require_keys(doc, {"type", "rows"}, {"type", "rows"}, where)
        return GeneralTable(_as_rows(doc["rows"], f"{where}.rows"))
    if kind == "linear":
        _require_keys(
            doc, {"type", "intercept", "coefficients", "tail"}, {"type", "coefficients"}, where
        )
        coeffs = doc["coefficients"]
        if not isinstance(coeffs, list):
            raise SpecError(f"{where}.coefficients must be a list")
        return LinearLongMemory(
            float(doc.get("intercept", 0.0)),
            tuple(float(a) for a in coeffs),
            float(doc.get("tail", 0.0)),
        )
    if kind == "site_indexed":
        _require_keys(doc, {"type", "default", "overrides"}, {"type", "default", "overrides"}, where)
        default = _parse_family(doc["default"], depth, f"{where}.default")
        overrides = doc["overrides"]
        if not isinstance(overrides, dict):
            raise SpecError(f"{where}.overrides must be an object keyed by site")
        pairs = []
        for key, sub in overrides.items():
            try:
                site = int(key)
            except ValueError:
                raise SpecError(f"{where}.overrides key {key!r} is not a site index") from None
            pairs.append((site, _parse_family(sub, depth, f"{where}.overrides[{key}]")))
        return SiteIndexed(default, tuple(sorted(pairs)))
    raise SpecError(f"{where}.type must be markov|table|linear|site_indexed, got {kind!r}")


def parse_spec(doc) -> KernelSpec:
    if not isinstance(doc, dict):
        raise SpecError("spec document must be a JSON object")
    _require_keys(
        doc,
        {"label", "alphabet", "memory_depth", "kernel"},
        {"alphabet", "memory_depth", "kernel"},
        "spec",
    )
    if not isinstance(doc["memory_depth"], int) or doc["memory_depth"] < 0:
        raise SpecError("memory_depth must be a non-negative integer")
    label = doc.get("label", "")
    if not isinstance(label, str):
        raise SpecError("label must be a string")
    alphabet = _parse_alphabet(doc["alphabet"])
    family = _parse_family(doc["kernel"], doc["memory_depth"])
    try:
        return KernelSpec(alphabet, doc["memory_depth"], family, label=label)
    except ValueError as exc:
        raise SpecError(f"invalid kernel: {exc}") from None


def load_spec_file(path: "str | Path") -> tuple[KernelSpec, dict]:
    """Parse a spec file; returns the kernel and source metadata."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path} is not valid JSON: {exc}") from None
    kernel = parse_spec(doc)
    meta = {
        "path": str(path),
        "sha256": hashlib.sha256(raw).hexdigest(),
        "label": kernel.label,
    }
    return kernel, meta


def kernel_to_doc(f: KernelSpec) -> dict:
    """Spec document for a kernel (inverse of ``parse_spec``)."""

    def family_doc(fam) -> dict:
        if isinstance(fam, MarkovTable):
            return {"type": "markov", "range": fam.order, "rows": [list(r) for r in fam.rows]}
        if isinstance(fam, GeneralTable):
            return {"type": "table", "rows": [list(r) for r in fam.rows]}
        if isinstance(fam, LinearLongMemory):
            return {
                "type": "linear",
                "intercept": fam.intercept,
                "coefficients": list(fam.coefficients),
                "tail": fam.coefficient_tail,
            }
        return {
            "type": "site_indexed",
            "default": family_doc(fam.default),
            "overrides": {str(site): family_doc(sub) for site, sub in fam.overrides},
        }

    doc = {
        "alphabet": {
            "symbols": list(f.alphabet.symbols),
            "metric": [list(row) for row in f.alphabet.metric],
        },
        "memory_depth": f.memory_depth,
        "kernel": family_doc(f.family),
    }
    if f.label:
        doc["label"] = f.label
    return doc


def two_state_markov(p1_given_0: float, p1_given_1: float, label: str = "") -> KernelSpec:
    """Binary one-step chain from the two 'stay at 1' probabilities."""
    alphabet = AlphabetSpec.binary()
    rows = ((1.0 - p1_given_0, p1_given_0), (1.0 - p1_given_1, p1_given_1))
    return KernelSpec(alphabet, 1, MarkovTable(1, rows), label=label)


def iid_kernel(probabilities, symbols=None, label: str = "") -> KernelSpec:
    probs = tuple(float(p) for p in probabilities)
    alphabet = (
        AlphabetSpec.discrete(tuple(symbols))
        if symbols is not None
        else AlphabetSpec.discrete(tuple(str(i) for i in range(len(probs))))
    )
    return KernelSpec(alphabet, 0, MarkovTable(0, (probs,)), label=label)


def power_law_linear(
    epsilon: float,
    depth: int,
    normalization: str = "full",
    label: str = "",
) -> KernelSpec:
    """Binary long-memory family with power-law coefficients.

    Coefficient at lag k is ``(1 - epsilon) / (M * k**(1 + epsilon))``.
    With ``normalization="full"`` M is the full series sum (so the
    truncation leaves a reported tail); with ``"partial"`` M is the sum
    of the first ``depth`` terms (so the kept coefficients sum to exactly
    ``1 - epsilon``).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie strictly between 0 and 1")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    exponent = 1.0 + epsilon
    partial = sum(k ** (-exponent) for k in range(1, depth + 1))
    if normalization == "full":
        m = float(zeta(exponent))
        tail = (1.0 - epsilon) * float(zeta(exponent, depth + 1)) / m
    elif normalization == "partial":
        m = partial
        tail = 0.0
    else:
        raise ValueError("normalization must be 'full' or 'partial'")
    coeffs = tuple((1.0 - epsilon) / (m * k**exponent) for k in range(1, depth + 1))
    family = LinearLongMemory(0.0, coeffs, coefficient_tail=tail)
    return KernelSpec(AlphabetSpec.binary(), depth, family, label=label)
