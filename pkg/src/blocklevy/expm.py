"""Matrix exponential by scaling and squaring with diagonal Padé approximants.

Works on stacks of matrices. Degree and scaling exponent are chosen per
matrix from its 1-norm (Higham 2005 thresholds), so the result for one matrix
never depends on the other matrices in the batch. Diagonal Padé approximants
map skew-hermitian matrices to unitary ones exactly, up to rounding.

Quaternion matrices (component-first, see :mod:`blocklevy.hyperlinalg`) are
handled by :func:`expm_quaternion`: powers are formed natively, and the one
linear solve goes through the complex embedding.
"""

from __future__ import annotations

import numpy as np

from .hyperlinalg import eta_embed, eta_pullback, qeye, qmatmul

_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0,
        110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
         129060195264000.0, 10559470521600.0, 670442572800.0, 33522128640.0, 1323241920.0,
         40840800.0, 960960.0, 16380.0, 182.0, 1.0),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_parts(a, ident, degree, mul):
    """Odd and even parts ``(U, V)`` of the degree-``degree`` Padé numerator."""
    b = _COEFFS[degree]
    a2 = mul(a, a)
    if degree == 13:
        a4 = mul(a2, a2)
        a6 = mul(a4, a2)
        u = mul(a, mul(a6, b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4
                + b[3] * a2 + b[1] * ident)
        v = mul(a6, b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
        return u, v
    powers = [ident, a2]
    while len(powers) <= degree // 2:
        powers.append(mul(powers[-1], a2))
    u = mul(a, sum(b[2 * k + 1] * powers[k] for k in range(degree // 2 + 1)))
    v = sum(b[2 * k] * powers[k] for k in range(degree // 2 + 1))
    return u, v


def _select(norms: np.ndarray):
    if not np.all(np.isfinite(norms)):
        raise FloatingPointError("expm of a matrix with non-finite entries")
    degree = np.full(len(norms), 13)
    for d in (9, 7, 5, 3):
        degree[norms <= _THETA[d]] = d
    with np.errstate(divide="ignore"):
        s = np.maximum(0, np.ceil(np.log2(norms / _THETA[13]))).astype(int)
    s[degree < 13] = 0
    return degree, s


def _scaled(stack, s, idx, extra_axes):
    return stack[idx] * np.ldexp(1.0, -s[idx]).reshape((-1,) + (1,) * extra_axes)


def expm(a: np.ndarray) -> np.ndarray:
    """Exponential of a real or complex square matrix, or of a stack of them."""
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expm needs square matrices, got shape {a.shape}")
    if not np.issubdtype(a.dtype, np.inexact):
        a = a.astype(float)
    single = a.ndim == 2
    stack = a.reshape((-1,) + a.shape[-2:])
    degree, s = _select(np.abs(stack).sum(axis=-2).max(axis=-1))
    ident = np.eye(a.shape[-1], dtype=a.dtype)

    out = np.empty_like(stack)
    for d in np.unique(degree):
        idx = np.nonzero(degree == d)[0]
        u, v = _pade_parts(_scaled(stack, s, idx, 2), ident, int(d), np.matmul)
        out[idx] = np.linalg.solve(v - u, v + u)
    for k in range(int(s.max(initial=0))):
        idx = np.nonzero(s > k)[0]
        out[idx] = out[idx] @ out[idx]
    return out[0] if single else out.reshape(a.shape)


def expm_quaternion(a: np.ndarray) -> np.ndarray:
    """Exponential of quaternion matrices of shape ``(..., 4, p, p)``."""
    a = np.asarray(a, dtype=float)
    if a.ndim < 3 or a.shape[-3] != 4 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected quaternion matrices of shape (..., 4, p, p), got {a.shape}")
    single = a.ndim == 3
    stack = a.reshape((-1,) + a.shape[-3:])
    # 1-norm of the complex embedding: both column blocks carry |Z| + |W|
    z_abs = np.hypot(stack[:, 0], stack[:, 1])
    w_abs = np.hypot(stack[:, 2], stack[:, 3])
    degree, s = _select((z_abs + w_abs).sum(axis=-2).max(axis=-1))
    ident = qeye(a.shape[-1])

    out = np.empty_like(stack)
    for d in np.unique(degree):
        idx = np.nonzero(degree == d)[0]
        u, v = _pade_parts(_scaled(stack, s, idx, 3), ident, int(d), qmatmul)
        out[idx] = eta_pullback(np.linalg.solve(eta_embed(v - u), eta_embed(v + u)))
    for k in range(int(s.max(initial=0))):
        idx = np.nonzero(s > k)[0]
        out[idx] = qmatmul(out[idx], out[idx])
    return out[0] if single else out.reshape(a.shape)
