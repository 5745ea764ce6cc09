"""Binary linear codes with bit-packed words.

A word of length ``n`` is a Python ``int`` whose bit ``i`` is coordinate ``i``.
XOR of two words is therefore word-parallel, and ``int.bit_count`` gives the
Hamming weight.  Generator rows use the same encoding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

MAX_ENUM_K = 28


class DimensionTooLarge(ValueError):
    """Raised when an operation would enumerate more than 2**MAX_ENUM_K codewords."""


# -- word helpers -----------------------------------------------------------


def word_from_bits(bits: Iterable[int]) -> int:
    w = 0
    for i, b in enumerate(bits):
        if b & 1:
            w |= 1 << i
    return w


def word_to_bits(word: int, n: int) -> list[int]:
    return [(word >> i) & 1 for i in range(n)]


def word_from_bitstring(s: str) -> int:
    """Parse a bitstring whose first character is coordinate 0."""
    if any(c not in "01" for c in s):
        raise ValueError(f"not a bitstring: {s!r}")
    return int(s[::-1], 2) if s else 0


def word_to_bitstring(word: int, n: int) -> str:
    return format(word, f"0{n}b")[::-1] if n else ""


def support_mask(coords: Iterable[int]) -> int:
    m = 0
    for c in coords:
        m |= 1 << c
    return m


def words_to_bit_array(words: Sequence[int], n: int) -> np.ndarray:
    """Unpack words into an ``(len(words), n)`` uint8 array of bits."""
    nbytes = max(1, (n + 7) // 8)
    buf = b"".join(int(w).to_bytes(nbytes, "little") for w in words)
    raw = np.frombuffer(buf, dtype=np.uint8).reshape(len(words), nbytes)
    return np.unpackbits(raw, axis=1, bitorder="little")[:, :n]


# -- elimination ------------------------------------------------------------


class XorBasis:
    """Incremental GF(2) basis keyed by leading bit.

    Each stored vector carries a ``tag`` that is XOR-combined alongside it, so
    callers can track which original rows produced a reduced vector.
    """

    def __init__(self) -> None:
        self._vecs: dict[int, tuple[int, int]] = {}

    def __len__(self) -> int:
        return len(self._vecs)

    def reduce(self, vec: int, tag: int) -> tuple[int, int]:
        for p in sorted(self._vecs, reverse=True):
            if (vec >> p) & 1:
                v, t = self._vecs[p]
                vec ^= v
                tag ^= t
        return vec, tag

    def insert(self, vec: int, tag: int = 0) -> tuple[bool, int]:
        """Insert ``vec``; returns (independent, tag of the zero residue if dependent)."""
        vec, tag = self.reduce(vec, tag)
        if vec == 0:
            return False, tag
        self._vecs[vec.bit_length() - 1] = (vec, tag)
        return True, tag


def _as_rows(matrix) -> tuple[list[int], int]:
    if isinstance(matrix, np.ndarray) or (
        len(matrix) and not isinstance(matrix[0], (int, np.integer))
    ):
        arr = np.asarray(matrix, dtype=np.uint8) & 1
        if arr.ndim != 2:
            raise ValueError("matrix must be 2-dimensional")
        return [word_from_bits(r) for r in arr], arr.shape[1]
    rows = [int(r) for r in matrix]
    return rows, max((r.bit_length() for r in rows), default=0)


def rank(matrix) -> int:
    """GF(2) row rank of a 0/1 matrix or a sequence of bit-packed rows."""
    rows, _ = _as_rows(matrix)
    if not rows:
        raise ValueError("matrix must be nonempty")
    basis = XorBasis()
    for r in rows:
        basis.insert(r)
    return len(basis)


def rref(rows: Sequence[int], n: int) -> list[int]:
    """Reduced row echelon form, pivots taken in coordinate order 0..n-1."""
    work = [r for r in rows if r]
    out: list[int] = []
    for col in range(n):
        bit = 1 << col
        piv = next((i for i, r in enumerate(work) if r & bit), None)
        if piv is None:
            continue
        p = work.pop(piv)
        work = [r ^ p if r & bit else r for r in work]
        out = [r ^ p if r & bit else r for r in out]
        out.append(p)
        work = [r for r in work if r]
    return out


# -- codes ------------------------------------------------------------------


@dataclass(frozen=True)
class LinearCode:
    """Binary linear code given by a full-row-rank generator."""

    n: int
    rows: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.rows:
            raise ValueError("codes of dimension 0 are not supported")
        if self.n < len(self.rows):
            raise ValueError(f"n={self.n} smaller than k={len(self.rows)}")
        limit = 1 << self.n
        if any(r < 0 or r >= limit for r in self.rows):
            raise ValueError("generator row wider than n")
        if rank(list(self.rows)) != len(self.rows):
            raise ValueError("generator does not have full row rank")

    @property
    def k(self) -> int:
        return len(self.rows)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n)

    @classmethod
    def from_matrix(cls, matrix) -> "LinearCode":
        arr = np.asarray(matrix, dtype=np.uint8)
        return cls(arr.shape[1], tuple(word_from_bits(r) for r in arr))

    @classmethod
    def from_bitstrings(cls, rows: Sequence[str]) -> "LinearCode":
        if not rows:
            raise ValueError("codes of dimension 0 are not supported")
        n = len(rows[0])
        if any(len(r) != n for r in rows):
            raise ValueError("generator bitstrings differ in length")
        return cls(n, tuple(word_from_bitstring(r) for r in rows))

    @property
    def generator(self) -> np.ndarray:
        return words_to_bit_array(self.rows, self.n)

    @cached_property
    def columns(self) -> tuple[int, ...]:
        """Column ``v`` packed as an int whose bit ``j`` is generator[j, v]."""
        cols = [0] * self.n
        for j, r in enumerate(self.rows):
            while r:
                low = r & -r
                cols[low.bit_length() - 1] |= 1 << j
                r ^= low
        return tuple(cols)

    def encode(self, message: int) -> int:
        w = 0
        j = 0
        while message:
            if message & 1:
                w ^= self.rows[j]
            message >>= 1
            j += 1
        return w

    @cached_property
    def _codewords(self) -> tuple[int, ...]:
        _check_enum(self.k)
        cws = [0] * (1 << self.k)
        for m in range(1, 1 << self.k):
            low = m & -m
            cws[m] = cws[m ^ low] ^ self.rows[low.bit_length() - 1]
        return tuple(cws)

    def canonical(self) -> "LinearCode":
        return LinearCode(self.n, tuple(sorted(rref(self.rows, self.n))))

    # -- serialization

    def to_json_dict(self) -> dict:
        return {
            "generator": [word_to_bitstring(r, self.n) for r in self.rows],
            "k": self.k,
            "n": self.n,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, obj: dict) -> "LinearCode":
        code = cls.from_bitstrings(obj["generator"])
        if code.n != obj["n"] or code.k != obj["k"]:
            raise ValueError("declared n/k disagree with generator")
        return code

    @classmethod
    def loads(cls, text: str) -> "LinearCode":
        return cls.from_json_dict(json.loads(text))


def _check_enum(k: int) -> None:
    if k > MAX_ENUM_K:
        raise DimensionTooLarge(f"2^{k} codewords exceeds the 2^{MAX_ENUM_K} guard")


def enumerate_codewords(code: LinearCode) -> tuple[int, ...]:
    """All 2^k codewords; index ``m`` holds the encoding of message ``m``."""
    return code._codewords


def min_distance(code: LinearCode) -> Fraction:
    """Relative minimum distance (exact)."""
    cws = enumerate_codewords(code)
    return Fraction(min(c.bit_count() for c in cws[1:]), code.n)


def distance_to_code(code: LinearCode, x: int) -> Fraction:
    cws = enumerate_codewords(code)
    return Fraction(min((x ^ c).bit_count() for c in cws), code.n)


@dataclass(frozen=True)
class Determination:
    unique: bool
    witness: tuple[int, int] | None = None

    def __bool__(self) -> bool:
        return self.unique


def determined_by(code: LinearCode, coords: Iterable[int]) -> Determination:
    """Whether codeword values on ``coords`` pin down the codeword.

    When they do not, the witness is ``(0, c)`` for a nonzero codeword ``c``
    vanishing on ``coords``.
    """
    mask = support_mask(coords)
    basis = XorBasis()
    for j, r in enumerate(code.rows):
        independent, tag = basis.insert(r & mask, 1 << j)
        if not independent:
            return Determination(False, (0, code.encode(tag)))
    return Determination(True)


def restricted_rank(code: LinearCode, mask: int) -> int:
    basis = XorBasis()
    for r in code.rows:
        basis.insert(r & mask)
    return len(basis)


def complete_codeword(code: LinearCode, mask: int, values: int) -> int | None:
    """A codeword agreeing with ``values`` on ``mask``, or None if none exists."""
    basis = XorBasis()
    for j, r in enumerate(code.rows):
        basis.insert(r & mask, 1 << j)
    residue, tag = basis.reduce(values & mask, 0)
    if residue:
        return None
    return code.encode(tag)


@dataclass(frozen=True)
class EquivClasses:
    classes: tuple[tuple[int, ...], ...]
    fixed: frozenset[int]
    class_of: tuple[int, ...]

    def multiplicity(self, v: int) -> int:
        return len(self.classes[self.class_of[v]])

    def representative(self, v: int) -> int:
        return self.classes[self.class_of[v]][0]


def equivalence_classes(code: LinearCode) -> EquivClasses:
    """Coordinates carrying equal values on every codeword, by column equality."""
    groups: dict[int, list[int]] = {}
    for v, col in enumerate(code.columns):
        groups.setdefault(col, []).append(v)
    classes = tuple(sorted(tuple(g) for g in groups.values()))
    class_of = [0] * code.n
    for i, cls in enumerate(classes):
        for v in cls:
            class_of[v] = i
    fixed = frozenset(groups.get(0, ()))
    return EquivClasses(classes, fixed, tuple(class_of))
