"""Brownian motion on SO(nm), U(nm) and Sp(nm) started at the identity.

Two schemes are available:

* ``GeometricExp``: ``G <- G exp(dK)``. The Padé exponential of an element of
  the Lie algebra is itself on the group, so the path never leaves it.
* ``EulerIto``: ``G <- G + G dK - (p/2) G dt`` with ``p = drift_rate``. This is
  the Itô form used to derive the moment equations; it drifts off the group at
  rate ``O(dt)`` in mean.

``dK`` is the sampled increment, multiplied by ``i`` for the unitary driver.
Symplectic increments are exponentiated with :func:`expm_quaternion`, whose
linear solve goes through the complex embedding.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .drivers import DriverKind, drift_rate, sample_increments
from .expm import expm, expm_quaternion
from .hyperlinalg import BlockMatrix, identity_like, matmul


class Scheme(str, enum.Enum):
    GEOMETRIC_EXP = "geometric"
    EULER_ITO = "euler"

    @classmethod
    def parse(cls, value) -> Scheme:
        if isinstance(value, cls):
            return value
        aliases = {"geometricexp": "geometric", "geometric_exp": "geometric", "eulerito": "euler",
                   "euler_ito": "euler"}
        text = str(value).strip().lower()
        try:
            return cls(aliases.get(text, text))
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}; expected 'geometric' or 'euler'") from None


class PathBlowUp(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"non-finite group element after step {step}")
        self.step = step


def default_steps(t_end: float) -> int:
    return max(1, math.ceil(100 * t_end - 1e-9))


def snapshot_step(t: float, t_end: float, steps: int) -> int:
    """Grid index of the last grid point not after ``t``."""
    if t_end == 0:
        return 0
    return min(steps, int(math.floor(t * steps / t_end + 1e-9)))


@dataclass
class PathBatch:
    """Final states of a batch of paths, plus snapshots keyed by grid index."""

    kind: DriverKind
    n: int
    m: int
    final: np.ndarray
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)


def integrate_paths(kind, n: int, m: int, t_end: float, steps: int, scheme=Scheme.GEOMETRIC_EXP,
                    seed: int = 0, sample_start: int = 0, nsamples: int = 1,
                    snapshot_steps=(), drift_sign: int = -1) -> PathBatch:
    """Integrate ``nsamples`` independent paths, vectorized over samples.

    ``drift_sign`` only affects ``EulerIto``; ``+1`` reproduces the drift
    with the opposite sign, which does not keep the path on the group.
    """
    kind = DriverKind.parse(kind)
    scheme = Scheme.parse(scheme)
    if t_end < 0:
        raise ValueError(f"final time must be non-negative, got {t_end}")
    if steps < 1:
        raise ValueError(f"need at least one step, got {steps}")
    fld = kind.field
    size = n * m
    g = np.broadcast_to(identity_like(size, fld), (nsamples,) + identity_like(size, fld).shape).copy()
    wanted = set(int(s) for s in snapshot_steps)
    snaps = {0: g.copy()} if 0 in wanted else {}
    if t_end == 0:
        for s in wanted:
            snaps[s] = g.copy()
        return PathBatch(kind, n, m, g, snaps)

    dt = t_end / steps
    half_p = float(drift_rate(kind, n, m)) / 2
    for step in range(steps):
        dk = sample_increments(kind, n, m, dt, seed, sample_start, nsamples, step)
        if kind is DriverKind.U:
            dk = 1j * dk
        if scheme is Scheme.GEOMETRIC_EXP:
            e = expm_quaternion(dk) if kind is DriverKind.SP else expm(dk)
            g = matmul(g, e, fld)
        else:
            g = g + matmul(g, dk, fld) + (drift_sign * half_p * dt) * g
        if not np.all(np.isfinite(g)):
            raise PathBlowUp(step)
        if step + 1 in wanted:
            snaps[step + 1] = g.copy()
    return PathBatch(kind, n, m, g, snaps)


def integrate_path(kind, n: int, m: int, t_end: float, steps: int | None = None,
                   scheme=Scheme.GEOMETRIC_EXP, seed: int = 0, sample: int = 0,
                   snapshot_times=()):
    """Single path; returns the final :class:`BlockMatrix`.

    With ``snapshot_times`` the return value is ``(final, snapshots)`` where
    ``snapshots`` lists the element at the last grid point not after each
    requested time.
    """
    kind = DriverKind.parse(kind)
    steps = default_steps(t_end) if steps is None else steps
    idx = [snapshot_step(t, t_end, steps) for t in snapshot_times]
    batch = integrate_paths(kind, n, m, t_end, steps, scheme, seed, sample, 1, idx)
    final = BlockMatrix(kind.field, n, m, batch.final[0])
    if not snapshot_times:
        return final
    return final, [BlockMatrix(kind.field, n, m, batch.snapshots[i][0]) for i in idx]
