"""Constraint hypergraphs (testers) with last-one-fixed constraints."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Iterable, Sequence, Union

import numpy as np

from .gf2 import LinearCode, XorBasis, word_from_bitstring, word_to_bitstring

MAX_TABLE_ARITY = 8
WEIGHT_TOLERANCE = 1e-9


class ArityMismatch(ValueError):
    pass


class LOFViolation(ValueError):
    """A constraint where some q-1 values leave the last one free."""


@dataclass(frozen=True)
class Parity:
    rhs: int = 0

    def __post_init__(self) -> None:
        if self.rhs not in (0, 1):
            raise ValueError("parity rhs must be 0 or 1")


@dataclass(frozen=True)
class Equality:
    pass


@dataclass(frozen=True)
class Table:
    """Explicit list of accepted assignments.

    ``satisfying`` holds assignments packed as ints, bit ``i`` being the value
    at position ``i`` of the (sorted) edge.
    """

    arity: int
    satisfying: frozenset[int]

    def __post_init__(self) -> None:
        if not 1 <= self.arity <= MAX_TABLE_ARITY:
            raise ValueError(f"table arity must be in 1..{MAX_TABLE_ARITY}")
        if any(a < 0 or a >= 1 << self.arity for a in self.satisfying):
            raise ValueError("table assignment out of range")
        for pos in range(self.arity):
            bit = 1 << pos
            for a in self.satisfying:
                if a ^ bit in self.satisfying:
                    raise LOFViolation(
                        f"position {pos} is free given the others in assignment "
                        f"{word_to_bitstring(a, self.arity)}"
                    )

    @classmethod
    def from_bitstrings(cls, rows: Sequence[str], arity: int | None = None) -> "Table":
        if arity is None:
            if not rows:
                raise ValueError("empty table needs an explicit arity")
            arity = len(rows[0])
        if any(len(r) != arity for r in rows):
            raise ArityMismatch("table bitstrings differ in length")
        return cls(arity, frozenset(word_from_bitstring(r) for r in rows))

    def bitstrings(self) -> list[str]:
        return sorted(word_to_bitstring(a, self.arity) for a in self.satisfying)


Constraint = Union[Parity, Equality, Table]


def evaluate_edge(c: Constraint, values: Sequence[int], arity: int | None = None) -> int:
    """1 if ``values`` satisfies the constraint, else 0."""
    if arity is not None and len(values) != arity:
        raise ArityMismatch(f"expected {arity} values, got {len(values)}")
    if isinstance(c, Parity):
        acc = 0
        for v in values:
            acc ^= v & 1
        return int(acc == c.rhs)
    if isinstance(c, Equality):
        return int(len(set(v & 1 for v in values)) <= 1)
    if len(values) != c.arity:
        raise ArityMismatch(f"table has arity {c.arity}, got {len(values)} values")
    packed = 0
    for i, v in enumerate(values):
        packed |= (v & 1) << i
    return int(packed in c.satisfying)


def forced_value(c: Constraint, position: int, others: Sequence[int]) -> int | None:
    """Value at ``position`` forced by the other values; None if no completion works.

    ``others`` lists the values of the remaining positions in edge order.
    """
    arity = len(others) + 1
    if isinstance(c, Table) and arity != c.arity:
        raise ArityMismatch(f"table has arity {c.arity}, got {arity - 1} other values")
    if not 0 <= position < arity:
        raise IndexError(f"position {position} outside edge of arity {arity}")
    ok = []
    for b in (0, 1):
        vals = list(others[:position]) + [b] + list(others[position:])
        if evaluate_edge(c, vals):
            ok.append(b)
    if len(ok) == 2:
        raise LOFViolation(f"{c!r} leaves position {position} free")
    return ok[0] if ok else None


@dataclass(frozen=True)
class Edge:
    vars: tuple[int, ...]
    constraint: Constraint

    @property
    def arity(self) -> int:
        return len(self.vars)


@dataclass(frozen=True)
class Violation:
    edge: int
    codeword: int


@dataclass(frozen=True)
class InducedGraph:
    """The graph G_B on V \\ B with, per pair, the hyperedges that induce it."""

    vertices: tuple[int, ...]
    preimages: dict[tuple[int, int], tuple[int, ...]] = field(hash=False)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(self.preimages)

    def preimage_count(self, a1: int, a2: int) -> int:
        return len(self.preimages.get((min(a1, a2), max(a1, a2)), ()))


@dataclass(frozen=True, eq=False)
class TestHypergraph:
    """Tester hypergraph on coordinates 0..n-1.

    Edges keep their coordinates sorted; constraint values are read in that
    order.  ``weights`` is None for the uniform tester.
    """

    __test__ = False  # not a pytest class

    n: int
    q: int
    edges: tuple[Edge, ...]
    weights: tuple[Fraction, ...] | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("hypergraph needs n >= 1")
        seen = set()
        for i, e in enumerate(self.edges):
            if not e.vars:
                raise ValueError(f"edge {i} is empty")
            if list(e.vars) != sorted(set(e.vars)):
                raise ValueError(f"edge {i} vars must be sorted and distinct: {e.vars}")
            if e.vars[0] < 0 or e.vars[-1] >= self.n:
                raise ValueError(f"edge {i} has a vertex outside 0..{self.n - 1}")
            if e.arity > self.q:
                raise ArityMismatch(f"edge {i} has arity {e.arity} > q={self.q}")
            if isinstance(e.constraint, Table) and e.constraint.arity != e.arity:
                raise ArityMismatch(f"edge {i} table arity differs from edge size")
            key = (e.vars, e.constraint)
            if key in seen:
                raise ValueError(f"duplicate edge {e.vars} with the same constraint")
            seen.add(key)
        if self.weights is not None:
            if len(self.weights) != len(self.edges):
                raise ValueError("one weight per edge required")
            if any(w <= 0 for w in self.weights):
                raise ValueError("weights must be positive")
            if abs(float(sum(self.weights)) - 1.0) > WEIGHT_TOLERANCE:
                raise ValueError("weights must sum to 1")

    def __eq__(self, other) -> bool:
        if not isinstance(other, TestHypergraph):
            return NotImplemented
        return (self.n, self.q, self.edges, self.weights) == (
            other.n,
            other.q,
            other.edges,
            other.weights,
        )

    @classmethod
    def build(
        cls,
        n: int,
        q: int,
        edges: Iterable[tuple[Iterable[int], Constraint]],
        weights: Sequence[Fraction] | None = None,
    ) -> "TestHypergraph":
        es = tuple(Edge(tuple(sorted(vs)), c) for vs, c in edges)
        return cls(n, q, es, None if weights is None else tuple(Fraction(w) for w in weights))

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    @cached_property
    def incidence(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for i, e in enumerate(self.edges):
            for v in e.vars:
                inc[v].append(i)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def var_array(self) -> np.ndarray:
        """Edges as an ``(|E|, q)`` array padded with the sentinel ``n``."""
        arr = np.full((len(self.edges), max(self.q, 1)), self.n, dtype=np.int64)
        for i, e in enumerate(self.edges):
            arr[i, : e.arity] = e.vars
        return arr

    @cached_property
    def arities(self) -> np.ndarray:
        return np.array([e.arity for e in self.edges], dtype=np.int64)

    def outside_counts(self, in_b: np.ndarray) -> np.ndarray:
        """Per edge, how many of its vertices are outside B (``in_b`` is bool[n])."""
        ext = np.append(in_b.astype(bool), True)
        if not self.edges:
            return np.zeros(0, dtype=np.int64)
        return (~ext[self.var_array]).sum(axis=1)

    # -- serialization

    def to_json_dict(self) -> dict:
        out: dict = {
            "edges": [
                {"constraint": constraint_to_json(e.constraint), "vars": list(e.vars)}
                for e in self.edges
            ],
            "n": self.n,
            "q": self.q,
        }
        if self.weights is not None:
            out["weights"] = [str(w) for w in self.weights]
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TestHypergraph":
        edges = []
        for e in obj["edges"]:
            vs = [int(v) for v in e["vars"]]
            if len(set(vs)) != len(vs):
                raise ValueError(f"repeated vertex in edge {vs}")
            c = constraint_from_json(e["constraint"], len(vs))
            edges.append((vs, c))
        weights = obj.get("weights")
        if weights is not None:
            weights = [Fraction(w) for w in weights]
        return cls.build(int(obj["n"]), int(obj["q"]), edges, weights)

    @classmethod
    def loads(cls, text: str) -> "TestHypergraph":
        return cls.from_json_dict(json.loads(text))


def constraint_to_json(c: Constraint) -> dict:
    if isinstance(c, Parity):
        return {"rhs": c.rhs, "type": "parity"}
    if isinstance(c, Equality):
        return {"type": "equality"}
    return {"satisfying": c.bitstrings(), "type": "table"}


def constraint_from_json(obj: dict, arity: int) -> Constraint:
    kind = obj.get("type")
    if kind == "parity":
        return Parity(int(obj.get("rhs", 0)))
    if kind == "equality":
        return Equality()
    if kind == "table":
        return Table.from_bitstrings(obj["satisfying"], arity)
    raise ValueError(f"unknown constraint type {kind!r}")


def density(H: TestHypergraph) -> Fraction:
    """|E|/n; weights are ignored."""
    return Fraction(len(H.edges), H.n)


def induced_graph(H: TestHypergraph, B: Iterable[int]) -> InducedGraph:
    """G_B: {a1, a2} outside B is an edge when some hyperedge has all its other vertices in B."""
    in_b = np.zeros(H.n, dtype=bool)
    in_b[list(B)] = True
    vertices = tuple(int(v) for v in np.flatnonzero(~in_b))
    pre: dict[tuple[int, int], list[int]] = {}
    if H.edges:
        outside = H.outside_counts(in_b)
        for i in np.flatnonzero((outside == 2) & (H.arities >= 2)):
            a1, a2 = (v for v in H.edges[i].vars if not in_b[v])
            pre.setdefault((a1, a2), []).append(int(i))
    return InducedGraph(vertices, {k: tuple(v) for k, v in pre.items()})


def connected_components(G: InducedGraph) -> list[tuple[int, ...]]:
    """Components ordered by smallest vertex; isolated vertices are singletons."""
    adj: dict[int, list[int]] = {v: [] for v in G.vertices}
    for a1, a2 in G.preimages:
        adj[a1].append(a2)
        adj[a2].append(a1)
    seen: set[int] = set()
    comps = []
    for v in G.vertices:
        if v in seen:
            continue
        seen.add(v)
        comp = [v]
        queue = deque([v])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        comps.append(tuple(sorted(comp)))
    return comps


def validate_against_code(H: TestHypergraph, code: LinearCode) -> Violation | None:
    """First (edge, codeword) pair where a codeword fails an edge, or None.

    Codeword patterns on an edge form the span of the projected generator
    rows, so each edge is checked against at most 2^arity patterns.
    """
    if H.n != code.n:
        raise ValueError(f"hypergraph has n={H.n}, code has n={code.n}")
    for i, e in enumerate(H.edges):
        basis = XorBasis()
        gens: list[tuple[int, int]] = []
        for r in code.rows:
            proj = _project(r, e.vars)
            independent, _ = basis.insert(proj)
            if independent:
                gens.append((proj, r))
        for combo in product((0, 1), repeat=len(gens)):
            pattern = 0
            word = 0
            for take, (proj, r) in zip(combo, gens):
                if take:
                    pattern ^= proj
                    word ^= r
            values = [(pattern >> j) & 1 for j in range(e.arity)]
            if not evaluate_edge(e.constraint, values):
                return Violation(i, word)
    return None


def _project(word: int, vars: Sequence[int]) -> int:
    out = 0
    for j, v in enumerate(vars):
        out |= ((word >> v) & 1) << j
    return out


def edge_values(word: int, e: Edge) -> list[int]:
    return [(word >> v) & 1 for v in e.vars]
