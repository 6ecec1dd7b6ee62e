"""Limit moment flow of block traces.

As the block size grows, the expected table functions of the group Brownian
motions solve a closed linear system ``v' = B0 v`` with exact rational
coefficients. :func:`apply_generator` gives one row of ``B0``;
:func:`build_system` closes a set of seed tables under it; and
:func:`solve_moments` returns ``exp(B0 t) v0`` computed twice, once with
scaling and squaring and once with an adaptive Runge-Kutta integrator.

Row ``k`` of ``B0`` holds the generator applied to basis table ``k``, so the
solution is ``exp(B0 t) v0`` with ``v0`` the values at the identity.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
import scipy.sparse
from scipy.integrate import solve_ivp

from .expm import expm
from .tables import Letter, TableExpr, TableFunction, canonicalize, format_table, initial_value, parse_table

DEFAULT_CAP = 20000


class ClosureCapExceeded(RuntimeError):
    def __init__(self, dimension: int, cap: int):
        super().__init__(f"closure reached {dimension} tables, above the cap of {cap}")
        self.dimension = dimension
        self.cap = cap


class SolverDisagreement(ArithmeticError):
    def __init__(self, index: int, expm_value: float, ode_value: float, rtol: float):
        super().__init__(
            f"basis entry {index}: scaling-and-squaring gives {expm_value!r}, "
            f"the ODE integrator {ode_value!r} (tolerance {rtol:g} relative)")
        self.index = index


def dimension_bound(order: int, n: int) -> int:
    """Count of (letter sequence, trace split) pairs of the given order."""
    if order < 1 or n < 1:
        raise ValueError("order and n must be positive")
    return n ** (2 * order) * 2**order * sum(comb(order - 1, z - 1) for z in range(1, order + 1))


def _table(traces, n) -> TableFunction:
    return TableFunction(tuple(t for t in traces if t), n)


def apply_generator(table: TableFunction, n: int | None = None) -> TableExpr:
    """Limit generator applied to one table, as an exact combination of tables."""
    n = table.n if n is None else n
    if table.n != n:
        raise ValueError(f"table is over an {table.n}x{table.n} grid, expected {n}")
    out = TableExpr()
    if table.order == 0:
        return out
    out.add(table, Fraction(-n, 2) * table.order)
    traces = table.traces
    for k, word in enumerate(traces):
        others = traces[:k] + traces[k + 1:]
        for p1 in range(len(word)):
            for p2 in range(p1 + 1, len(word)):
                a, l1, b, l2, c = word[:p1], word[p1], word[p1 + 1:p2], word[p2], word[p2 + 1:]
                pattern = (l1.star, l2.star)
                if pattern == (0, 0):
                    out.add(_table(others + (a + (Letter(l1.i, l2.j),) + c, b + (Letter(l2.i, l1.j),)), n), -1)
                elif pattern == (1, 1):
                    out.add(_table(others + (a + (Letter(l2.i, l1.j, 1),) + c, b + (Letter(l1.i, l2.j, 1),)), n),
                            -1)
                elif l1.j == l2.j:
                    for s in range(1, n + 1):
                        if pattern == (0, 1):
                            pair = (Letter(l1.i, s), Letter(l2.i, s, 1))
                            new = others + (a + pair + c, b)
                        else:
                            new = others + (a + c, (Letter(l1.i, s, 1),) + b + (Letter(l2.i, s),))
                        out.add(_table(new, n), 1)
    return out


def apply_generator_expr(expr: TableExpr, n: int) -> TableExpr:
    """Linear extension of :func:`apply_generator`."""
    out = TableExpr()
    for table, coeff in expr.items():
        out = out + coeff * apply_generator(table, n)
    return out


@dataclass
class GeneratorSystem:
    n: int
    basis: tuple
    b0: dict  # (row, col) -> Fraction
    v0: tuple
    seeds: tuple = ()
    bounds: dict = field(default_factory=dict)  # order -> dimension_bound(order, n)

    def __post_init__(self):
        self._index = {t: k for k, t in enumerate(self.basis)}

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def index(self, table: TableFunction) -> int:
        return self._index[canonicalize(table)]

    def sparse(self) -> scipy.sparse.csr_matrix:
        k = self.dimension
        if not self.b0:
            return scipy.sparse.csr_matrix((k, k))
        rows, cols = zip(*self.b0)
        vals = [float(v) for v in self.b0.values()]
        return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(k, k))

    def dense(self) -> np.ndarray:
        return self.sparse().toarray()

    def v0_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.v0])

    def within_bound(self) -> bool:
        orders = {t.order for t in self.basis}
        return all(sum(1 for t in self.basis if t.order == o) <= self.bounds[o] for o in orders)

    def to_text(self) -> str:
        lines = [f"n {self.n}", f"dimension {self.dimension}"]
        for k, t in enumerate(self.basis):
            lines.append(f"table {k} {self.v0[k]} {format_table(t)}")
        for (r, c), v in sorted(self.b0.items()):
            lines.append(f"entry {r} {c} {v.numerator} {v.denominator}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> GeneratorSystem:
        n = None
        basis, v0, b0 = [], [], {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            head, *rest = line.split(" ", 1)
            rest = rest[0] if rest else ""
            if head == "n":
                n = int(rest)
            elif head == "dimension":
                expected = int(rest)
            elif head == "table":
                idx, val, table = rest.split(" ", 2)
                if int(idx) != len(basis):
                    raise ValueError(f"line {lineno}: table index {idx} out of sequence")
                basis.append(parse_table(table, n))
                v0.append(Fraction(val))
            elif head == "entry":
                r, c, num, den = (int(x) for x in rest.split())
                b0[(r, c)] = Fraction(num, den)
            else:
                raise ValueError(f"line {lineno}: unknown record {head!r}")
        if n is None or len(basis) != expected:
            raise ValueError("incomplete generator system dump")
        orders = {t.order for t in basis}
        return cls(n, tuple(basis), b0, tuple(v0), (), {o: dimension_bound(o, n) for o in orders})


def build_system(seeds, n: int | None = None, cap: int = DEFAULT_CAP) -> GeneratorSystem:
    """Close ``seeds`` under the generator and assemble ``B0`` and ``v0``.

    The basis is sorted by the canonical table order, so it does not depend
    on the order in which tables were discovered.
    """
    seeds = [canonicalize(s) for s in ([seeds] if isinstance(seeds, TableFunction) else seeds)]
    if not seeds:
        raise ValueError("need at least one seed table")
    n = seeds[0].n if n is None else n
    for s in seeds:
        if s.n != n:
            raise ValueError(f"seed {s} is over an {s.n}x{s.n} grid, expected {n}")
        if s.order == 0:
            raise ValueError("the empty table is constant; nothing to close")

    images = {}
    queue = deque(dict.fromkeys(seeds))
    seen = set(queue)
    while queue:
        table = queue.popleft()
        images[table] = apply_generator(table, n)
        for child in images[table]:
            if child not in seen:
                seen.add(child)
                if len(seen) > cap:
                    raise ClosureCapExceeded(len(seen), cap)
                queue.append(child)

    basis = tuple(sorted(seen))
    index = {t: k for k, t in enumerate(basis)}
    b0 = {(index[t], index[c]): v for t in basis for c, v in images[t].items()}
    orders = {t.order for t in basis}
    return GeneratorSystem(n, basis, b0, tuple(initial_value(t) for t in basis), tuple(seeds),
                           {o: dimension_bound(o, n) for o in orders})


@dataclass
class SolveReport:
    t: float
    values: np.ndarray  # scaling and squaring
    ode_values: np.ndarray  # adaptive Runge-Kutta (DOP853)
    max_rel_gap: float  # over entries larger than the floor
    max_abs_gap_small: float  # over entries at or below the floor
    ode_evaluations: int


def solve_moments_report(system: GeneratorSystem, t: float, rtol: float = 1e-9,
                         floor: float = 1e-12) -> SolveReport:
    """Both solutions and their largest gap; raises :class:`SolverDisagreement`.

    Entries are compared as ``|a - b| <= rtol * max(|a|, |b|) + floor``;
    ``floor`` only matters for entries that are zero up to rounding.
    """
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    v0 = system.v0_array()
    if t == 0:
        return SolveReport(0.0, v0.copy(), v0.copy(), 0.0, 0.0, 0)
    b = system.sparse()
    values = expm(b.toarray() * t) @ v0
    sol = solve_ivp(lambda _, y: b @ y, (0.0, t), v0, method="DOP853", rtol=1e-13, atol=1e-15)
    if not sol.success:
        raise ArithmeticError(f"ODE integrator failed: {sol.message}")
    ode = sol.y[:, -1]
    scale = np.maximum(np.abs(values), np.abs(ode))
    gap = np.abs(values - ode)
    large = scale > floor
    bad = np.nonzero(gap > rtol * scale + floor)[0]
    if len(bad):
        k = int(bad[0])
        raise SolverDisagreement(k, float(values[k]), float(ode[k]), rtol)
    return SolveReport(float(t), values, ode, float((gap[large] / scale[large]).max(initial=0.0)),
                       float(gap[~large].max(initial=0.0)), int(sol.nfev))


def solve_moments(system: GeneratorSystem, t: float) -> np.ndarray:
    """``exp(B0 t) v0``, cross-checked against an ODE integrator."""
    return solve_moments_report(system, t).values


def limit_value(table: TableFunction, t: float, system: GeneratorSystem | None = None) -> float:
    """Limit expectation of one table at time ``t``."""
    system = build_system([table]) if system is None else system
    return float(solve_moments(system, t)[system.index(table)])
