"""Table functions: products of normalized traces of starred blocks.

A table such as ``tr(u[1,2]* u[2,3]) tr(u[1,1])`` stands for
``tr([G]_{12}^* [G]_{23}) * tr([G]_{11})``. Tables are identified up to
rotating a trace and reordering traces; :func:`canonicalize` picks the
minimal rotation of every trace and sorts the traces.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .hyperlinalg import BlockMatrix, Field, adjoint, block_of, matmul, normalized_trace


class TableSyntaxError(ValueError):
    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at position {position} in {text!r}")
        self.position = position
        self.text = text


@dataclass(frozen=True, order=True)
class Letter:
    """Block ``(i, j)`` of the process, starred when ``star == 1``."""

    i: int
    j: int
    star: int = 0

    def __post_init__(self):
        if self.star not in (0, 1):
            raise ValueError(f"star flag must be 0 or 1, got {self.star!r}")
        if self.i < 1 or self.j < 1:
            raise ValueError(f"block indices are 1-based, got ({self.i}, {self.j})")

    def flipped(self) -> Letter:
        return Letter(self.i, self.j, 1 - self.star)

    def __str__(self) -> str:
        return f"u[{self.i},{self.j}]" + ("*" if self.star else "")


Trace = tuple  # tuple[Letter, ...]


def _min_rotation(word: tuple) -> tuple:
    return min(word[k:] + word[:k] for k in range(len(word)))


@dataclass(frozen=True)
class TableFunction:
    traces: tuple
    n: int

    def __post_init__(self):
        traces = tuple(tuple(t) for t in self.traces)
        object.__setattr__(self, "traces", traces)
        if self.n < 1:
            raise ValueError(f"grid side must be positive, got {self.n}")
        for word in traces:
            if not word:
                raise ValueError("empty trace; drop it instead (its value is 1)")
            for letter in word:
                if letter.i > self.n or letter.j > self.n:
                    raise IndexError(f"letter {letter} outside the {self.n}x{self.n} block grid")

    @classmethod
    def of(cls, traces: Iterable[Iterable], n: int) -> TableFunction:
        """Build from nested ``(i, j, star)`` tuples or letters."""
        return cls(tuple(tuple(l if isinstance(l, Letter) else Letter(*l) for l in t) for t in traces), n)

    @property
    def order(self) -> int:
        return sum(len(t) for t in self.traces)

    def canonical(self) -> TableFunction:
        return canonicalize(self)

    def sort_key(self):
        return (self.order, len(self.traces), self.traces)

    def __lt__(self, other: TableFunction) -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return format_table(self)


def canonicalize(table: TableFunction) -> TableFunction:
    return TableFunction(tuple(sorted(_min_rotation(t) for t in table.traces)), table.n)


def adjoint_table(table: TableFunction) -> TableFunction:
    """Complex conjugate table: every trace reversed with all stars flipped."""
    return canonicalize(TableFunction(
        tuple(tuple(l.flipped() for l in reversed(t)) for t in table.traces), table.n))


def flip_stars(table: TableFunction) -> TableFunction:
    return canonicalize(TableFunction(tuple(tuple(l.flipped() for l in t) for t in table.traces), table.n))


def reverse_traces(table: TableFunction) -> TableFunction:
    return canonicalize(TableFunction(tuple(tuple(reversed(t)) for t in table.traces), table.n))


def initial_value(table: TableFunction) -> Fraction:
    """Value at the identity."""
    return Fraction(int(all(l.i == l.j for t in table.traces for l in t)))


# -- evaluation ---------------------------------------------------------------


def _trace_values(word, data: np.ndarray, field: Field, m: int, cache: dict) -> np.ndarray:
    prod = None
    for letter in word:
        key = (letter.i, letter.j, letter.star)
        if key not in cache:
            blk = block_of(data, letter.i, letter.j, m)
            cache[key] = adjoint(blk, field) if letter.star else blk
        prod = cache[key] if prod is None else matmul(prod, cache[key], field)
    return normalized_trace(prod, field)


def evaluate_batch(table: TableFunction, data: np.ndarray, field: Field | str, n: int) -> np.ndarray:
    """Values of ``table`` on a stack of group elements, one per leading index.

    Complex products are reduced to their real part after multiplying the
    traces together.
    """
    field = Field(field)
    if table.n != n:
        raise ValueError(f"table is over an {table.n}x{table.n} grid, matrices over {n}x{n}")
    size = data.shape[-1]
    if size % n:
        raise ValueError(f"matrix size {size} is not a multiple of n={n}")
    m = size // n
    lead = data.shape[:-3] if field is Field.QUATERNION else data.shape[:-2]
    cache: dict = {}
    out = np.ones(lead, dtype=complex if field is Field.COMPLEX else float)
    for word in table.traces:
        out = out * _trace_values(word, data, field, m, cache)
    return np.real(out)


def evaluate(table: TableFunction, g: BlockMatrix) -> float:
    if table.n != g.n:
        raise ValueError(f"table is over an {table.n}x{table.n} grid, matrix over {g.n}x{g.n}")
    return float(evaluate_batch(table, g.data, g.field, g.n))


# -- linear combinations --------------------------------------------------------


class TableExpr(Mapping):
    """Finite rational combination of canonical tables; zero terms are never stored."""

    def __init__(self, terms=None):
        self._terms: dict = {}
        if terms:
            items = terms.items() if isinstance(terms, Mapping) else terms
            for table, coeff in items:
                self.add(table, coeff)

    def add(self, table: TableFunction, coeff) -> None:
        table = canonicalize(table)
        total = self._terms.get(table, Fraction(0)) + Fraction(coeff)
        if total:
            self._terms[table] = total
        else:
            self._terms.pop(table, None)

    def __getitem__(self, table):
        return self._terms[canonicalize(table)]

    def __iter__(self):
        return iter(sorted(self._terms))

    def __len__(self) -> int:
        return len(self._terms)

    def __add__(self, other: TableExpr) -> TableExpr:
        out = TableExpr(self._terms)
        for table, coeff in other.items():
            out.add(table, coeff)
        return out

    def __rmul__(self, scalar) -> TableExpr:
        return TableExpr((t, Fraction(scalar) * c) for t, c in self._terms.items())

    def __eq__(self, other) -> bool:
        if isinstance(other, TableExpr):
            return self._terms == other._terms
        return NotImplemented

    def is_zero(self) -> bool:
        return not self._terms

    def map_tables(self, fn) -> TableExpr:
        return TableExpr((fn(t), c) for t, c in self._terms.items())

    def __repr__(self) -> str:
        if not self._terms:
            return "TableExpr(0)"
        return "TableExpr(" + " + ".join(f"({c})*{t}" for t, c in self.items()) + ")"


# -- text form ------------------------------------------------------------------

_LETTER = re.compile(r"u\[([0-9]+),([0-9]+)\](\*?)")


def parse_table(text: str, n: int | None = None, canonical: bool = True) -> TableFunction:
    """Parse ``tr(u[1,2]* u[2,3]) tr(u[1,1])``.

    Traces and letters are separated by exactly one space. Without ``n`` the
    grid side is the largest index that occurs.
    """
    pos = 0
    traces = []

    def fail(message, at):
        raise TableSyntaxError(message, text, at)

    while True:
        if not text.startswith("tr(", pos):
            fail("expected 'tr('", pos)
        pos += 3
        word = []
        while True:
            match = _LETTER.match(text, pos)
            if not match:
                fail("expected a letter 'u[i,j]' or 'u[i,j]*'", pos)
            word.append((int(match.group(1)), int(match.group(2)), int(bool(match.group(3))), pos))
            pos = match.end()
            if text.startswith(" ", pos):
                pos += 1
                continue
            if text.startswith(")", pos):
                pos += 1
                break
            fail("expected ' ' or ')'", pos)
        traces.append(tuple(word))
        if pos == len(text):
            break
        if text[pos] != " ":
            fail("expected ' ' between traces", pos)
        pos += 1

    letters = [l for word in traces for l in word]
    side = max(max(i, j) for i, j, _, _ in letters) if n is None else n
    for i, j, _, at in letters:
        if not (1 <= i <= side and 1 <= j <= side):
            fail(f"index ({i},{j}) outside 1..{side}", at)
    table = TableFunction(tuple(tuple(Letter(i, j, s) for i, j, s, _ in word) for word in traces), side)
    return canonicalize(table) if canonical else table


def format_table(table: TableFunction) -> str:
    """Text form; the empty table formats as the empty string."""
    return " ".join("tr(" + " ".join(str(l) for l in word) + ")" for word in table.traces)


def all_tables(order: int, n: int) -> list:
    """Every canonical table of the given order over an ``n x n`` grid, sorted."""
    if order < 1:
        return [TableFunction((), n)]
    letters = [Letter(i, j, s) for i in range(1, n + 1) for j in range(1, n + 1) for s in (0, 1)]
    found = set()
    for seq in itertools.product(letters, repeat=order):
        for cuts in range(2 ** (order - 1)):
            traces, start = [], 0
            for k in range(1, order):
                if cuts >> (k - 1) & 1:
                    traces.append(seq[start:k])
                    start = k
            traces.append(seq[start:])
            found.add(canonicalize(TableFunction(tuple(traces), n)))
    return sorted(found)
