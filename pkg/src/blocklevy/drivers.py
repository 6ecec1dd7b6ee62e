"""Lie-algebra valued Brownian increments for SO(nm), U(nm) and Sp(nm).

The unitary driver is sampled as a hermitian matrix ``X``; the group SDE is
driven by ``iX``. The orthogonal and symplectic drivers are sampled directly
in their Lie algebras (antisymmetric real, anti-self-adjoint quaternionic).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import rng
from .hyperlinalg import BlockMatrix, Field, qadjoint


class DriverKind(str, enum.Enum):
    SO = "so"
    U = "u"
    SP = "sp"

    @classmethod
    def parse(cls, value) -> DriverKind:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown driver kind {value!r}; expected one of so, u, sp") from None

    @property
    def field(self) -> Field:
        return {"so": Field.REAL, "u": Field.COMPLEX, "sp": Field.QUATERNION}[self.value]


# (components per off-diagonal entry, components per diagonal entry,
#  variance denominators relative to dt/m)
_LAYOUT = {
    DriverKind.SO: (1, 0, 1, None),
    DriverKind.U: (2, 1, 2, 1),
    DriverKind.SP: (4, 3, 4, 3),
}


def n_entries(kind: DriverKind, n: int, m: int) -> int:
    """Number of independent standard normals in one increment."""
    size = n * m
    c_off, c_diag, _, _ = _LAYOUT[DriverKind.parse(kind)]
    return size * (size - 1) // 2 * c_off + size * c_diag


def sample_increments(kind, n: int, m: int, dt: float, seed: int, sample_start: int = 0,
                      nsamples: int = 1, step: int = 0) -> np.ndarray:
    """Increments over ``[step*dt, (step+1)*dt]`` for a range of sample indices.

    Returns shape ``(nsamples, nm, nm)`` (real or complex) or
    ``(nsamples, 4, nm, nm)`` for the symplectic driver.
    """
    kind = DriverKind.parse(kind)
    if dt < 0:
        raise ValueError(f"time step must be non-negative, got {dt}")
    if n < 1 or m < 1:
        raise ValueError(f"block dimensions must be positive, got n={n}, m={m}")
    size = n * m
    c_off, c_diag, v_off, v_diag = _LAYOUT[kind]
    shape = (nsamples, 4, size, size) if kind is DriverKind.SP else (nsamples, size, size)
    dtype = complex if kind is DriverKind.U else float
    out = np.zeros(shape, dtype=dtype)
    if dt == 0:
        return out

    iu, ju = np.triu_indices(size, 1)
    npairs = len(iu)
    z = rng.normals(rng.stream_key(seed, kind.value, n, m), step, sample_start, nsamples,
                    n_entries(kind, n, m))
    off = z[:, : npairs * c_off].reshape(nsamples, npairs, c_off) * np.sqrt(dt / (v_off * m))
    diag = None
    if c_diag:
        diag = z[:, npairs * c_off :].reshape(nsamples, size, c_diag) * np.sqrt(dt / (v_diag * m))
    d = np.arange(size)

    if kind is DriverKind.SO:
        out[:, iu, ju] = off[..., 0]
        out[:, ju, iu] = -off[..., 0]
    elif kind is DriverKind.U:
        upper = off[..., 0] + 1j * off[..., 1]
        out[:, iu, ju] = upper
        out[:, ju, iu] = np.conj(upper)
        out[:, d, d] = diag[..., 0]
    else:
        for c in range(4):
            out[:, c, iu, ju] = off[..., c]
            # H_ji = -conj(H_ij): real part flips sign, imaginary parts do not
            out[:, c, ju, iu] = -off[..., c] if c == 0 else off[..., c]
        for c in range(1, 4):
            out[:, c, d, d] = diag[..., c - 1]
    return out


def sample_increment(kind, n: int, m: int, dt: float, seed: int, sample: int = 0,
                     step: int = 0) -> BlockMatrix:
    kind = DriverKind.parse(kind)
    data = sample_increments(kind, n, m, dt, seed, sample_start=sample, nsamples=1, step=step)[0]
    return BlockMatrix(kind.field, n, m, data)


def lie_algebra_residual(kind, data: np.ndarray) -> float:
    """Largest entry of ``X + X^t``, ``X - X^*`` or ``H + H^*`` (zero when exact)."""
    kind = DriverKind.parse(kind)
    if kind is DriverKind.SO:
        r = data + np.swapaxes(data, -1, -2)
    elif kind is DriverKind.U:
        r = data - np.conj(np.swapaxes(data, -1, -2))
    else:
        r = data + qadjoint(data)
    return float(np.max(np.abs(r), initial=0.0))


def covariation_rate(kind, a: int, b: int, c: int, d: int, n: int, m: int) -> Fraction:
    """Coefficient of ``dt`` in ``d[K_ab, K_cd]`` (1-based scalar indices).

    ``K`` is the sampled driver: antisymmetric ``X`` for SO, hermitian ``X``
    for U, anti-self-adjoint ``H`` for SP. For SP the bracket is the
    expectation of the quaternion product ``dH_ab dH_cd``, which is always
    real.
    """
    kind = DriverKind.parse(kind)
    size = n * m
    for idx in (a, b, c, d):
        if not 1 <= idx <= size:
            raise IndexError(f"scalar index {idx} outside 1..{size}")
    same = (a, b) == (c, d)
    swapped = (a, b) == (d, c)
    if kind is DriverKind.SO:
        if a == b:
            return Fraction(0)
        return Fraction(1, m) if same else Fraction(-1, m) if swapped else Fraction(0)
    if kind is DriverKind.U:
        return Fraction(1, m) if swapped else Fraction(0)
    if a == b:
        return Fraction(-1, m) if same else Fraction(0)
    if same:
        return Fraction(-1, 2 * m)
    return Fraction(-1, m) if swapped else Fraction(0)


def drift_rate(kind, n: int, m: int) -> Fraction:
    """``p`` with ``E[dK dK^*] = p I dt``, summed from :func:`covariation_rate`.

    ``K`` here includes the factor ``i`` of the unitary driver, so for U the
    bracket changes sign: ``dK dK^* = X X``; for SO and SP ``dK^* = -dK``.
    """
    kind = DriverKind.parse(kind)
    size = n * m
    row = sum((covariation_rate(kind, 1, l, l, 1, n, m) for l in range(1, size + 1)), Fraction(0))
    return row if kind is DriverKind.U else -row


def index_patterns(size: int) -> list:
    """One ``(a, b, c, d)`` per equality pattern of four indices (15 when size >= 4)."""
    def partitions(k):
        if k == 0:
            yield ()
            return
        for p in partitions(k - 1):
            for label in range(max(p, default=-1) + 2):
                yield p + (label,)

    # spread the representatives over the index range so that several blocks are hit
    values = [1, size, 2, size - 1] if size >= 4 else list(range(1, size + 1))
    return [tuple(values[l] for l in p) for p in partitions(4) if max(p) < len(values)]


@dataclass(frozen=True)
class CovariationCheck:
    kind: DriverKind
    indices: tuple
    rate: Fraction
    estimate: float  # real part (scalar part for quaternions)
    stderr: float
    residual: float  # largest |imaginary component| in units of its standard error
    passed: bool


def _product_components(kind, x, y):
    """Components of ``x * y`` per sample: (real part, imaginary parts...)."""
    if kind is DriverKind.SO:
        return [x * y]
    if kind is DriverKind.U:
        p = x * y
        return [p.real, p.imag]
    a0, a1, a2, a3 = x
    b0, b1, b2, b3 = y
    return [a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3, a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1, a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0]


def covariation_check(kind, n: int, m: int, nsamples: int = 100_000, dt: float = 0.01, seed: int = 0,
                      rel_tol: float = 0.05, nsigma: float = 3.0, chunk: int = 20_000) -> list:
    """Empirical ``E[K_ab K_cd] / dt`` against :func:`covariation_rate` for every index pattern.

    Nonzero rates must match to ``rel_tol`` relative error, zero rates and all
    imaginary components must lie within ``nsigma`` standard errors of zero.
    """
    kind = DriverKind.parse(kind)
    patterns = index_patterns(n * m)
    sums = None
    for start in range(0, nsamples, chunk):
        count = min(chunk, nsamples - start)
        inc = sample_increments(kind, n, m, dt, seed, start, count)
        per = []
        for a, b, c, d in patterns:
            if kind is DriverKind.SP:
                x, y = inc[:, :, a - 1, b - 1].T, inc[:, :, c - 1, d - 1].T
            else:
                x, y = inc[:, a - 1, b - 1], inc[:, c - 1, d - 1]
            comps = np.array(_product_components(kind, x, y)) / dt
            per.append(np.stack([comps.sum(axis=1), (comps**2).sum(axis=1)]))
        per = np.array(per)
        sums = per if sums is None else sums + per
    out = []
    for (a, b, c, d), s in zip(patterns, sums):
        mean = s[0] / nsamples
        var = np.maximum(s[1] / nsamples - mean**2, 0.0) * nsamples / max(1, nsamples - 1)
        se = np.sqrt(var / nsamples)
        rate = covariation_rate(kind, a, b, c, d, n, m)
        z = np.abs(mean[1:]) / np.where(se[1:] > 0, se[1:], np.inf)
        residual = float(z.max(initial=0.0))
        if rate:
            ok = abs(mean[0] - float(rate)) <= rel_tol * abs(float(rate))
        else:
            ok = abs(mean[0]) <= nsigma * se[0] if se[0] > 0 else mean[0] == 0
        ok = bool(ok and residual <= nsigma)
        out.append(CovariationCheck(kind, (a, b, c, d), rate, float(mean[0]), float(se[0]), residual, ok))
    return out
