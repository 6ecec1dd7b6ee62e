"""Scalars and block matrices over the reals, the complex numbers and the quaternions.

Quaternion matrices are stored component-first: an array of shape
``(..., 4, p, q)`` holding the real, i, j and k parts. Products are computed
natively from the component matrices; the complex embedding :func:`eta_embed`
is kept separate so that it can be checked against the native product.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Field(str, enum.Enum):
    REAL = "real"
    COMPLEX = "complex"
    QUATERNION = "quaternion"


@dataclass(frozen=True)
class Quaternion:
    re: float = 0.0
    im_i: float = 0.0
    im_j: float = 0.0
    im_k: float = 0.0

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return quat_mul(self, other)
        return Quaternion(self.re * other, self.im_i * other, self.im_j * other, self.im_k * other)

    __rmul__ = __mul__

    def __add__(self, other: Quaternion) -> Quaternion:
        return Quaternion(*(a + b for a, b in zip(self.components(), other.components())))

    def __sub__(self, other: Quaternion) -> Quaternion:
        return Quaternion(*(a - b for a, b in zip(self.components(), other.components())))

    def __neg__(self) -> Quaternion:
        return Quaternion(-self.re, -self.im_i, -self.im_j, -self.im_k)

    def conj(self) -> Quaternion:
        return Quaternion(self.re, -self.im_i, -self.im_j, -self.im_k)

    def norm2(self) -> float:
        return self.re**2 + self.im_i**2 + self.im_j**2 + self.im_k**2

    def components(self) -> tuple[float, float, float, float]:
        return (self.re, self.im_i, self.im_j, self.im_k)

    def isclose(self, other: Quaternion, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.components(), other.components(), rtol=0.0, atol=atol))


QUAT_ONE = Quaternion(1.0)
QUAT_I = Quaternion(0.0, 1.0)
QUAT_J = Quaternion(0.0, 0.0, 1.0)
QUAT_K = Quaternion(0.0, 0.0, 0.0, 1.0)


def quat_mul(q1: Quaternion, q2: Quaternion) -> Quaternion:
    a0, a1, a2, a3 = q1.components()
    b0, b1, b2, b3 = q2.components()
    return Quaternion(
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    )


# -- quaternion matrices, component-first layout (..., 4, p, q) ---------------


def qmatmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of quaternion matrices (batched over leading axes)."""
    a0, a1, a2, a3 = (a[..., c, :, :] for c in range(4))
    b0, b1, b2, b3 = (b[..., c, :, :] for c in range(4))
    return np.stack(
        [
            a0 @ b0 - a1 @ b1 - a2 @ b2 - a3 @ b3,
            a0 @ b1 + a1 @ b0 + a2 @ b3 - a3 @ b2,
            a0 @ b2 - a1 @ b3 + a2 @ b0 + a3 @ b1,
            a0 @ b3 + a1 @ b2 - a2 @ b1 + a3 @ b0,
        ],
        axis=-3,
    )


_QCONJ_SIGNS = np.array([1.0, -1.0, -1.0, -1.0])[:, None, None]


def qconj(a: np.ndarray) -> np.ndarray:
    """Entrywise quaternion conjugate."""
    return a * _QCONJ_SIGNS


def qadjoint(a: np.ndarray) -> np.ndarray:
    """Quaternionic conjugate transpose."""
    return np.swapaxes(qconj(a), -1, -2)


def qeye(p: int) -> np.ndarray:
    out = np.zeros((4, p, p))
    out[0] = np.eye(p)
    return out


def quaternion_matrix(entries) -> np.ndarray:
    """Build a ``(4, p, q)`` array from a nested list of :class:`Quaternion`."""
    rows = [[q.components() for q in row] for row in entries]
    return np.moveaxis(np.asarray(rows, dtype=float), -1, 0)


def eta_embed(a: np.ndarray) -> np.ndarray:
    """Complex embedding ``Z + jW -> [[Z, -conj(W)], [W, conj(Z)]]``.

    A quaternion ``a + bi + cj + dk`` is written ``(a + bi) + j(c - di)``, so
    ``Z = a + ib`` and ``W = c - id``.
    """
    z = a[..., 0, :, :] + 1j * a[..., 1, :, :]
    w = a[..., 2, :, :] - 1j * a[..., 3, :, :]
    top = np.concatenate([z, -np.conj(w)], axis=-1)
    bottom = np.concatenate([w, np.conj(z)], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def eta_pullback(c: np.ndarray) -> np.ndarray:
    """Inverse of :func:`eta_embed` on its image; reads the left column of blocks."""
    p = c.shape[-1] // 2
    z = c[..., :p, :p]
    w = c[..., p:, :p]
    return np.stack([z.real, z.imag, w.real, -w.imag], axis=-3)


def symplectic_form(p: int) -> np.ndarray:
    j = np.zeros((2 * p, 2 * p))
    j[:p, p:] = np.eye(p)
    j[p:, :p] = -np.eye(p)
    return j


# -- block matrices -----------------------------------------------------------


def _entry_axes(field: Field) -> int:
    return 3 if field is Field.QUATERNION else 2


@dataclass(frozen=True)
class BlockMatrix:
    """An ``nm x nm`` matrix viewed as an ``n x n`` grid of ``m x m`` blocks.

    ``data`` has shape ``(nm, nm)`` for real and complex matrices and
    ``(4, nm, nm)`` for quaternion matrices.
    """

    field: Field
    n: int
    m: int
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "field", Field(self.field))
        if self.n < 1 or self.m < 1:
            raise ValueError(f"block dimensions must be positive, got n={self.n}, m={self.m}")
        size = self.n * self.m
        expected = (4, size, size) if self.field is Field.QUATERNION else (size, size)
        if self.data.shape != expected:
            raise ValueError(f"expected data of shape {expected}, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("block matrix has non-finite entries")

    @classmethod
    def identity(cls, field: Field | str, n: int, m: int) -> BlockMatrix:
        field = Field(field)
        size = n * m
        if field is Field.QUATERNION:
            return cls(field, n, m, qeye(size))
        dtype = complex if field is Field.COMPLEX else float
        return cls(field, n, m, np.eye(size, dtype=dtype))

    @property
    def size(self) -> int:
        return self.n * self.m

    def _check_block(self, i: int, j: int):
        if not (1 <= i <= self.n and 1 <= j <= self.n):
            raise IndexError(f"block index ({i}, {j}) outside 1..{self.n}")

    def block(self, i: int, j: int) -> np.ndarray:
        """The ``(i, j)`` block, 1-based."""
        self._check_block(i, j)
        return block_of(self.data, i, j, self.m)

    def block_adjoint(self, i: int, j: int) -> np.ndarray:
        self._check_block(i, j)
        return adjoint(block_of(self.data, i, j, self.m), self.field)

    def matmul(self, other: BlockMatrix) -> BlockMatrix:
        if (self.field, self.n, self.m) != (other.field, other.n, other.m):
            raise ValueError("block matrices must share field and block structure")
        return BlockMatrix(self.field, self.n, self.m, matmul(self.data, other.data, self.field))

    def adjoint(self) -> BlockMatrix:
        return BlockMatrix(self.field, self.n, self.m, adjoint(self.data, self.field))


def block_of(data: np.ndarray, i: int, j: int, m: int) -> np.ndarray:
    """Slice block ``(i, j)`` (1-based) out of a possibly batched array."""
    return data[..., (i - 1) * m : i * m, (j - 1) * m : j * m]


def block_adjoint(g: BlockMatrix, i: int, j: int) -> np.ndarray:
    return g.block_adjoint(i, j)


def adjoint(a: np.ndarray, field: Field) -> np.ndarray:
    if field is Field.QUATERNION:
        return qadjoint(a)
    if field is Field.COMPLEX:
        return np.conj(np.swapaxes(a, -1, -2))
    return np.swapaxes(a, -1, -2)


def matmul(a: np.ndarray, b: np.ndarray, field: Field) -> np.ndarray:
    if field is Field.QUATERNION:
        return qmatmul(a, b)
    return a @ b


def identity_like(size: int, field: Field) -> np.ndarray:
    if field is Field.QUATERNION:
        return qeye(size)
    return np.eye(size, dtype=complex if field is Field.COMPLEX else float)


def normalized_trace(a: np.ndarray, field: Field | str | None = None):
    """``(1/m) Tr(a)`` for an ``m x m`` matrix, batched over leading axes.

    For quaternion input this is the real part of the normalized trace, which
    equals ``Tr(eta(a)) / (2m)``. The field is inferred from the array when not
    given: a trailing ``(4, m, m)`` real array is only treated as quaternionic
    when ``field`` says so.
    """
    field = Field(field) if field is not None else (Field.COMPLEX if np.iscomplexobj(a) else Field.REAL)
    if field is Field.QUATERNION:
        a = a[..., 0, :, :]
    if a.shape[-1] != a.shape[-2]:
        raise ValueError(f"trace of a non-square matrix of shape {a.shape[-2:]}")
    return np.trace(a, axis1=-2, axis2=-1) / a.shape[-1]


def unitarity_defect(data: np.ndarray, field: Field) -> np.ndarray:
    """Frobenius norm of ``G G^* - I`` (batched)."""
    size = data.shape[-1]
    residual = matmul(data, adjoint(data, field), field) - identity_like(size, field)
    axes = (-3, -2, -1) if field is Field.QUATERNION else (-2, -1)
    return np.sqrt(np.sum(np.abs(residual) ** 2, axis=axes))


def symplectic_defect(data: np.ndarray) -> np.ndarray:
    """Frobenius norm of ``eta(G)^t J eta(G) - J`` for quaternion ``G`` (batched)."""
    c = eta_embed(data)
    j = symplectic_form(data.shape[-1])
    residual = np.swapaxes(c, -1, -2) @ j @ c - j
    return np.sqrt(np.sum(np.abs(residual) ** 2, axis=(-2, -1)))
