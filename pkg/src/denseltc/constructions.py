"""Canonical code/tester pairs and the duplication and padding transforms."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from math import comb

import numpy as np

from .gf2 import MAX_ENUM_K, LinearCode, min_distance, rank
from .hypergraph import (
    Constraint,
    Equality,
    Parity,
    Table,
    TestHypergraph,
    density,
    evaluate_edge,
    validate_against_code,
)
from .tester_eval import EnumerationTooLarge, extract_dual_tester

EDGE_BUDGET = 3_000_000


class BudgetExceeded(ValueError):
    pass


@dataclass
class TransformReceipt:
    """Parameter bookkeeping of a construction or transform, with exact checks."""

    name: str
    input: dict | None
    output: dict
    parameters: dict = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_json_dict(self) -> dict:
        return {
            "checks": self.checks,
            "input": self.input,
            "name": self.name,
            "output": self.output,
            "parameters": self.parameters,
            "schema_version": 1,
            "warnings": self.warnings,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


def _delta(code: LinearCode) -> Fraction | None:
    return min_distance(code) if code.k <= MAX_ENUM_K else None


def describe(code: LinearCode, H: TestHypergraph) -> dict:
    d = _delta(code)
    return {
        "density": str(density(H)),
        "delta": None if d is None else str(d),
        "edges": len(H.edges),
        "k": code.k,
        "n": code.n,
        "q": H.q,
        "rate": str(code.rate),
        "weighted": H.weighted,
    }


def _check_budget(count: int) -> None:
    if count > EDGE_BUDGET:
        raise BudgetExceeded(f"{count} edges exceeds the budget of {EDGE_BUDGET}")


# -- constructions ----------------------------------------------------------


def hadamard(k: int) -> tuple[LinearCode, TestHypergraph]:
    """Hadamard code on the points of F_2^k with its BLR triples.

    Coordinate ``x`` is the point whose binary expansion is ``x``; row ``i`` is
    the i-th coordinate functional.  Point 0 is kept and is a fixed vertex.
    """
    if not 2 <= k <= 12:
        raise ValueError("hadamard needs 2 <= k <= 12")
    n = 1 << k
    rows = []
    for i in range(k):
        r = 0
        for x in range(n):
            if (x >> i) & 1:
                r |= 1 << x
        rows.append(r)
    edges = []
    for x in range(1, n):
        for y in range(x + 1, n):
            z = x ^ y
            if z > y:
                edges.append(((x, y, z), Parity(0)))
    return LinearCode(n, tuple(rows)), TestHypergraph.build(n, 3, edges)


def repetition(n: int, q: int) -> tuple[LinearCode, TestHypergraph]:
    """Repetition code with every q-subset as an Equality test."""
    if not (2 <= q <= 5 and q <= n <= 128):
        raise ValueError("repetition needs 2 <= q <= 5 and q <= n <= 128")
    count = comb(n, q)
    if count > EDGE_BUDGET:
        raise EnumerationTooLarge(f"C({n},{q}) = {count} edges exceeds the budget")
    code = LinearCode(n, ((1 << n) - 1,))
    H = TestHypergraph.build(n, q, ((s, Equality()) for s in combinations(range(n), q)))
    return code, H


def random_linear(n: int, k: int, seed: int) -> tuple[LinearCode, TestHypergraph, list[str]]:
    """Uniform full-rank generator; tester is every dual word of weight 2..3."""
    if not 1 <= k <= n:
        raise ValueError("random_linear needs 1 <= k <= n")
    rng = np.random.Generator(np.random.PCG64(seed))
    while True:
        gen = rng.integers(0, 2, size=(k, n), dtype=np.uint8)
        if rank(gen) == k:
            break
    code = LinearCode.from_matrix(gen)
    H = extract_dual_tester(code, 3)
    notes = []
    if not H.edges:
        notes.append("no dual codewords of weight <= 3: tester is empty")
        warnings.warn(notes[-1])
    return code, H, notes


def construction_receipt(
    name: str, params: dict, code: LinearCode, H: TestHypergraph, notes=()
) -> TransformReceipt:
    return TransformReceipt(
        name=name,
        input=None,
        output=describe(code, H),
        parameters=params,
        checks={"valid_against_code": validate_against_code(H, code) is None},
        warnings=list(notes),
    )


# -- transforms -------------------------------------------------------------


def duplicate(
    code: LinearCode, H: TestHypergraph, t: int
) -> tuple[LinearCode, TestHypergraph, TransformReceipt]:
    """Copy every coordinate t times; each edge becomes all t^arity copy choices.

    Copy ``j`` of coordinate ``i`` is coordinate ``i + j*n``.
    """
    if t < 2:
        raise ValueError("t must be at least 2")
    n = code.n
    _check_budget(sum(t ** e.arity for e in H.edges))
    rows = []
    for r in code.rows:
        nr = 0
        for j in range(t):
            nr |= r << (j * n)
        rows.append(nr)
    new_code = LinearCode(n * t, tuple(rows))
    edges = []
    weights = [] if H.weighted else None
    for i, e in enumerate(H.edges):
        copies = t ** e.arity
        for choice in product(range(t), repeat=e.arity):
            vs = [v + j * n for v, j in zip(e.vars, choice)]
            edges.append(_sorted_edge(vs, e.constraint))
            if weights is not None:
                weights.append(H.weights[i] / copies)
    new_H = TestHypergraph.build(n * t, H.q, edges, weights)

    d_in, d_out = density(H), density(new_H)
    uniform = all(e.arity == H.q for e in H.edges)
    delta_in, delta_out = _delta(code), _delta(new_code)
    checks = {
        "n_out == n*t": new_code.n == n * t,
        "k_out == k": new_code.k == code.k,
        "rate_out == rate/t": new_code.rate == code.rate / t,
        "delta_out == delta": delta_in == delta_out,
    }
    if uniform:
        checks["edges_out == edges*t^q"] = len(new_H.edges) == len(H.edges) * t**H.q
        checks["density_out == density*t^(q-1)"] = d_out == d_in * t ** (H.q - 1)
    receipt = TransformReceipt(
        "duplicate", describe(code, H), describe(new_code, new_H), {"t": t}, checks
    )
    return new_code, new_H, receipt


def _sorted_edge(vs: list[int], c: Constraint) -> tuple[tuple[int, ...], Constraint]:
    """Sort edge vertices, permuting a table's positions to match."""
    order = sorted(range(len(vs)), key=vs.__getitem__)
    if isinstance(c, Table) and order != list(range(len(vs))):
        sat = set()
        for a in c.satisfying:
            sat.add(sum(((a >> old) & 1) << new for new, old in enumerate(order)))
        c = Table(c.arity, frozenset(sat))
    return tuple(vs[i] for i in order), c


def _zero_extended(c: Constraint, arity: int, extra: int) -> Constraint:
    """``c`` on the first ``arity`` positions and zeros on ``extra`` more."""
    if extra == 0:
        return c
    sat = [a for a in range(1 << arity) if evaluate_edge(c, [(a >> i) & 1 for i in range(arity)])]
    return Table(arity + extra, frozenset(sat))


def zero_pad(
    code: LinearCode, H: TestHypergraph, qprime: int
) -> tuple[LinearCode, TestHypergraph, TransformReceipt]:
    """Append n always-zero coordinates; each edge is joined with every q'-subset of them."""
    if qprime < 0:
        raise ValueError("q' must be nonnegative")
    if H.q + qprime > 8:
        raise ValueError("q + q' must be at most 8")
    n = code.n
    subsets = comb(n, qprime)
    _check_budget(len(H.edges) * subsets)
    new_code = LinearCode(2 * n, code.rows)
    edges = []
    weights = [] if H.weighted else None
    for i, e in enumerate(H.edges):
        c = _zero_extended(e.constraint, e.arity, qprime)
        for sub in combinations(range(n, 2 * n), qprime):
            edges.append((e.vars + sub, c))
            if weights is not None:
                weights.append(H.weights[i] / subsets)
    new_H = TestHypergraph.build(2 * n, H.q + qprime, edges, weights)

    d_in, d_out = density(H), density(new_H)
    delta_in, delta_out = _delta(code), _delta(new_code)
    checks = {
        "n_out == 2n": new_code.n == 2 * n,
        "k_out == k": new_code.k == code.k,
        "edges_out == edges*C(n,q')": len(new_H.edges) == len(H.edges) * subsets,
        "density_out == edges_out/(2n)": d_out == Fraction(len(new_H.edges), 2 * n),
        "edges_out/n == density*C(n,q')": Fraction(len(new_H.edges), n) == d_in * subsets,
        "rate_out == rate/2": new_code.rate == code.rate / 2,
        "delta_out == delta/2": delta_in is not None and delta_out == delta_in / 2,
    }
    receipt = TransformReceipt(
        "zero_pad", describe(code, H), describe(new_code, new_H), {"qprime": qprime}, checks
    )
    return new_code, new_H, receipt


def weighted_pad(
    code: LinearCode, H: TestHypergraph
) -> tuple[LinearCode, TestHypergraph, TransformReceipt]:
    """Append n zero coordinates carrying every q-subset as an all-zero test.

    Old and new edges each get total weight 1/2, split uniformly (or
    proportionally, if the input was already weighted).
    """
    n, q = code.n, H.q
    new_count = comb(n, q)
    if new_count > EDGE_BUDGET:
        raise EnumerationTooLarge(f"C({n},{q}) = {new_count} new edges exceeds the budget")
    if not H.edges:
        raise ValueError("weighted_pad needs at least one original edge")
    new_code = LinearCode(2 * n, code.rows)
    zero = Table(q, frozenset({0}))
    edges = [(e.vars, e.constraint) for e in H.edges]
    if H.weighted:
        weights = [w / 2 for w in H.weights]
    else:
        weights = [Fraction(1, 2 * len(H.edges))] * len(H.edges)
    for sub in combinations(range(n, 2 * n), q):
        edges.append((sub, zero))
        weights.append(Fraction(1, 2 * new_count))
    new_H = TestHypergraph.build(2 * n, q, edges, weights)

    delta_in, delta_out = _delta(code), _delta(new_code)
    checks = {
        "n_out == 2n": new_code.n == 2 * n,
        "density_out == (edges + C(n,q))/(2n)": density(new_H)
        == Fraction(len(H.edges) + new_count, 2 * n),
        "rate_out == rate/2": new_code.rate == code.rate / 2,
        "delta_out == delta/2": delta_in is not None and delta_out == delta_in / 2,
        "weights sum to 1": sum(new_H.weights) == 1,
    }
    receipt = TransformReceipt("weighted_pad", describe(code, H), describe(new_code, new_H), {}, checks)
    return new_code, new_H, receipt
