"""Monte Carlo estimates of table functions on simulated group paths.

Samples are processed in chunks whose size depends only on the driver shape.
Each chunk returns its per-sample values, and chunks are concatenated in
sample order before any reduction. The estimates are therefore bit-identical
for any worker count. The worker count comes from ``BLOCKLEVY_WORKERS``
(default 1) unless given explicitly.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .drivers import DriverKind
from .group_sde import Scheme, default_steps, integrate_paths, snapshot_step
from .hyperlinalg import adjoint, block_of, matmul, normalized_trace
from .moment_flow import build_system, solve_moments
from .tables import TableFunction, evaluate_batch, initial_value

WORKERS_ENV = "BLOCKLEVY_WORKERS"


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        raw = os.environ.get(WORKERS_ENV, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if workers < 1:
        raise ValueError(f"worker count must be positive, got {workers}")
    return workers


def chunk_size(kind, n: int, m: int) -> int:
    """Samples per chunk: about a million reals per stacked state, within [16, 16384]."""
    reals = {DriverKind.SO: 1, DriverKind.U: 2, DriverKind.SP: 4}[DriverKind.parse(kind)]
    return int(min(16384, max(16, 2**20 // (reals * (n * m) ** 2))))


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    stderr: float
    nsamples: int

    @classmethod
    def from_values(cls, values: np.ndarray) -> MomentEstimate:
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("non-finite sample values")
        k = len(values)
        if k == 0:
            raise ValueError("no samples")
        sd = float(np.std(values, ddof=1)) if k > 1 else 0.0
        return cls(float(np.mean(values)), sd / math.sqrt(k), k)

    @classmethod
    def exact(cls, value: float, nsamples: int) -> MomentEstimate:
        return cls(float(value), 0.0, nsamples)


# -- chunk workers (module level so that they pickle) -----------------------------


def _run_chunk(job):
    """Per-sample values for one chunk: array of shape (len(evals), chunk)."""
    kind, n, m, t_end, steps, scheme, seed, start, count, snap_idx, evals = job
    batch = integrate_paths(kind, n, m, t_end, steps, scheme, seed, start, count, snap_idx)
    field_ = DriverKind.parse(kind).field
    return np.stack([fn(batch.snapshots, field_, n) for fn in evals])


def _map_chunks(jobs, workers: int):
    if workers == 1 or len(jobs) == 1:
        return [_run_chunk(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_chunk, jobs))


@dataclass(frozen=True)
class _TableAt:
    table: TableFunction
    snap: int

    def __call__(self, snapshots, field_, n):
        return evaluate_batch(self.table, snapshots[self.snap], field_, n)


def _sample_values(kind, n, m, t_end, steps, scheme, seed, nsamples, snap_idx, evals, workers):
    size = chunk_size(kind, n, m)
    jobs = [(kind, n, m, t_end, steps, scheme, seed, start, min(size, nsamples - start), tuple(snap_idx),
             tuple(evals)) for start in range(0, nsamples, size)]
    return np.concatenate(_map_chunks(jobs, worker_count(workers)), axis=1)


def _check(n, m, nsamples, tables):
    if n < 1 or m < 1:
        raise ValueError(f"block dimensions must be positive, got n={n}, m={m}")
    if nsamples < 1:
        raise ValueError(f"need at least one sample, got {nsamples}")
    for t in tables:
        if t.n != n:
            raise ValueError(f"table {t} is over an {t.n}x{t.n} grid, expected {n}")


def estimate_moments(tables, kind, n: int, m: int, times, nsamples: int, steps: int | None = None,
                     scheme=Scheme.GEOMETRIC_EXP, seed: int = 0, workers: int | None = None) -> dict:
    """Estimates for every (table, time) pair from one set of paths.

    Paths run to the largest time; earlier times use snapshots on the same
    grid. ``steps`` counts steps up to the largest time and defaults to
    ``ceil(100 t)``. Returns ``{(table, t): MomentEstimate}``.
    """
    kind = DriverKind.parse(kind)
    scheme = Scheme.parse(scheme)
    tables = list(tables)
    times = [float(t) for t in times]
    _check(n, m, nsamples, tables)
    if any(t < 0 for t in times):
        raise ValueError("times must be non-negative")
    t_end = max(times)
    out = {}
    positive = sorted({t for t in times if t > 0})
    for tab in tables:
        for t in times:
            if t == 0:
                out[(tab, t)] = MomentEstimate.exact(initial_value(tab), nsamples)
    if not positive:
        return out
    steps = default_steps(t_end) if steps is None else steps
    snaps = {t: snapshot_step(t, t_end, steps) for t in positive}
    evals = [_TableAt(tab, snaps[t]) for tab in tables for t in positive]
    values = _sample_values(kind, n, m, t_end, steps, scheme, seed, nsamples, sorted(set(snaps.values())),
                            evals, workers)
    for row, ev in zip(values, [(tab, t) for tab in tables for t in positive]):
        out[ev] = MomentEstimate.from_values(row)
    return out


def estimate_moment(table: TableFunction, kind, n: int, m: int, t: float, nsamples: int,
                    steps: int | None = None, scheme=Scheme.GEOMETRIC_EXP, seed: int = 0,
                    workers: int | None = None) -> MomentEstimate:
    """Mean of the table over ``nsamples`` paths at time ``t``."""
    return estimate_moments([table], kind, n, m, [t], nsamples, steps, scheme, seed, workers)[(table, float(t))]


# -- convergence sweeps -------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    kind: DriverKind
    m: int
    table: TableFunction
    estimate: MomentEstimate
    limit: float

    @property
    def gap(self) -> float:
        return abs(self.estimate.mean - self.limit)


@dataclass
class SweepReport:
    n: int
    t: float
    rows: list = field(default_factory=list)
    workers: int = 1

    def series(self, kind, table: TableFunction) -> list:
        kind = DriverKind.parse(kind)
        return sorted((r for r in self.rows if r.kind is kind and r.table == table), key=lambda r: r.m)

    def monotone(self, kind, table: TableFunction, nsigma: float = 3.0) -> bool:
        """Gaps non-increasing in ``m`` up to ``nsigma`` combined standard errors."""
        rows = self.series(kind, table)
        return all(b.gap <= a.gap + nsigma * math.hypot(a.estimate.stderr, b.estimate.stderr)
                   for a, b in zip(rows, rows[1:]))


def convergence_sweep(tables, kinds, n: int, m_list, t: float, nsamples: int, steps: int | None = None,
                      seed: int = 0, scheme=Scheme.GEOMETRIC_EXP, workers: int | None = None) -> SweepReport:
    """Estimates for every (kind, m) next to the limit value from the moment flow."""
    tables = [tables] if isinstance(tables, TableFunction) else list(tables)
    kinds = [DriverKind.parse(k) for k in ([kinds] if isinstance(kinds, (str, DriverKind)) else kinds)]
    m_list = list(m_list)
    if not m_list or any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise ValueError(f"m_list must be non-empty and increasing, got {m_list}")
    system = build_system(tables, n)
    limits = solve_moments(system, t)
    report = SweepReport(n, float(t), workers=worker_count(workers))
    for kind in kinds:
        for m in m_list:
            est = estimate_moments(tables, kind, n, m, [t], nsamples, steps, scheme, seed, workers)
            for tab in tables:
                report.rows.append(SweepRow(kind, m, tab, est[(tab, float(t))], float(limits[system.index(tab)])))
    return report


# -- multi-time words -------------------------------------------------------------


@dataclass(frozen=True)
class TimedLetter:
    i: int
    j: int
    star: int
    time: int  # index into MultiTimeWord.times


@dataclass(frozen=True)
class MultiTimeWord:
    """A single trace whose letters are read off the path at different times."""

    letters: tuple
    times: tuple
    n: int

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(self.letters))
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        if not self.letters:
            raise ValueError("empty word")
        if any(t < 0 for t in self.times) or any(b < a for a, b in zip(self.times, self.times[1:])):
            raise ValueError(f"times must be non-negative and non-decreasing, got {self.times}")
        for l in self.letters:
            if not 0 <= l.time < len(self.times):
                raise IndexError(f"time index {l.time} outside 0..{len(self.times) - 1}")
            if not (1 <= l.i <= self.n and 1 <= l.j <= self.n) or l.star not in (0, 1):
                raise ValueError(f"bad letter {l} for n={self.n}")

    @classmethod
    def from_table(cls, table: TableFunction, time_of_letter, times) -> MultiTimeWord:
        if len(table.traces) != 1:
            raise ValueError("multi-time words carry a single trace")
        word = table.traces[0]
        return cls(tuple(TimedLetter(l.i, l.j, l.star, k) for l, k in zip(word, time_of_letter, strict=True)),
                   tuple(times), table.n)


@dataclass(frozen=True)
class _WordAt:
    word: MultiTimeWord
    snaps: tuple  # grid index per time index

    def __call__(self, snapshots, field_, n):
        m = snapshots[self.snaps[0]].shape[-1] // n
        prod = None
        for l in self.word.letters:
            blk = block_of(snapshots[self.snaps[l.time]], l.i, l.j, m)
            blk = adjoint(blk, field_) if l.star else blk
            prod = blk if prod is None else matmul(prod, blk, field_)
        return np.real(normalized_trace(prod, field_))


def estimate_multitime(word: MultiTimeWord, kind, n: int, m: int, nsamples: int, steps: int | None = None,
                       seed: int = 0, scheme=Scheme.GEOMETRIC_EXP, workers: int | None = None) -> MomentEstimate:
    """Average of the time-tagged trace along simulated paths."""
    kind = DriverKind.parse(kind)
    if word.n != n:
        raise ValueError(f"word is over an {word.n}x{word.n} grid, expected {n}")
    _check(n, m, nsamples, [])
    t_end = max(word.times)
    if t_end == 0:
        ident = all(l.i == l.j for l in word.letters)
        return MomentEstimate.exact(float(ident), nsamples)
    steps = default_steps(t_end) if steps is None else steps
    snaps = tuple(snapshot_step(t, t_end, steps) for t in word.times)
    values = _sample_values(kind, n, m, t_end, steps, scheme, seed, nsamples, sorted(set(snaps)),
                            [_WordAt(word, snaps)], workers)
    return MomentEstimate.from_values(values[0])

