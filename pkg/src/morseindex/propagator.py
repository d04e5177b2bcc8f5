"""Fundamental solution of the complexified Hamiltonian system.

For ``z = t + i s`` the first-order system

    Psi'(x) = sigma H_z(x) Psi(x),   Psi(0) = I,
    sigma = [[0, -I], [I, 0]],       H_z = diag(-S_z(x), -J),

reduces to ``top' = J bottom`` and ``bottom' = -S_z top`` for the row blocks of
``Psi``. The upper-right ``n x n`` block of ``Psi_z(x)`` is the shooting matrix
``b_z(x)``: its columns solve ``J u'' + S_z u = 0`` with ``u(0) = 0`` and
``u'(0) = J e_i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numpy.typing import ArrayLike

from .core import MorseSturmSystem, clamp_t, family_S_real
from .errors import PropagationDivergedError

DEFAULT_STEPS = 2000
MIN_STEPS = 16
# Cap on floats held by one precomputed S-node table (~64 MB).
_NODE_BUDGET = 8_000_000


def sigma(n: int) -> np.ndarray:
    """The ``2n x 2n`` symplectic matrix ``[[0, -I], [I, 0]]``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


@dataclass(frozen=True)
class PropagatorResult:
    Psi_end: np.ndarray
    b_end: np.ndarray
    symplectic_defect: float
    steps: int


def symplectic_defect(Psi: np.ndarray) -> float:
    """``max |Psi^T sigma Psi - sigma|`` with the plain (not conjugate) transpose."""
    Psi = np.asarray(Psi)
    if Psi.ndim != 2 or Psi.shape[0] != Psi.shape[1] or Psi.shape[0] % 2:
        raise ValueError(f"expected a square matrix of even dimension, got shape {Psi.shape}")
    sg = sigma(Psi.shape[0] // 2)
    return float(np.abs(Psi.T @ sg @ Psi - sg).max())


@numba.njit(cache=True)
def _rk4_kernel(jdiag, snodes, sidx, shift, h, top0, bot0, dense):
    # snodes[sidx[b], m] holds the real part of S_z at x = m h / 2; shift[b] = delta + i s.
    # top0/bot0 are the initial row blocks (n x c); their dtype selects real or
    # complex arithmetic. dense=True records the top block of the last n columns.
    nb = sidx.shape[0]
    n = jdiag.shape[0]
    c = top0.shape[1]
    steps = (snodes.shape[1] - 1) // 2
    top = np.empty((nb, n, c), dtype=top0.dtype)
    bot = np.empty((nb, n, c), dtype=top0.dtype)
    nd = steps + 1 if dense else 1
    path = np.zeros((nb, nd, n, n), dtype=top0.dtype)
    kt = np.empty((4, n, c), dtype=top0.dtype)
    kb = np.empty((4, n, c), dtype=top0.dtype)
    yt = np.empty((n, c), dtype=top0.dtype)
    yb = np.empty((n, c), dtype=top0.dtype)
    bad_step = -1
    for b in range(nb):
        z = shift[b]
        Sb = snodes[sidx[b]]
        T = top[b]
        B = bot[b]
        T[:, :] = top0
        B[:, :] = bot0
        for k in range(steps):
            for stage in range(4):
                if stage == 0:
                    S = Sb[2 * k]
                    for i in range(n):
                        for j in range(c):
                            yt[i, j] = T[i, j]
                            yb[i, j] = B[i, j]
                else:
                    S = Sb[2 * k + (1 if stage < 3 else 2)]
                    f = 0.5 * h if stage < 3 else h
                    for i in range(n):
                        for j in range(c):
                            yt[i, j] = T[i, j] + f * kt[stage - 1, i, j]
                            yb[i, j] = B[i, j] + f * kb[stage - 1, i, j]
                for i in range(n):
                    for j in range(c):
                        kt[stage, i, j] = jdiag[i] * yb[i, j]
                        acc = -z * yt[i, j]
                        for l in range(n):
                            acc -= S[i, l] * yt[l, j]
                        kb[stage, i, j] = acc
            finite = True
            for i in range(n):
                for j in range(c):
                    T[i, j] += h / 6.0 * (kt[0, i, j] + 2.0 * kt[1, i, j] + 2.0 * kt[2, i, j] + kt[3, i, j])
                    B[i, j] += h / 6.0 * (kb[0, i, j] + 2.0 * kb[1, i, j] + 2.0 * kb[2, i, j] + kb[3, i, j])
                    if not (np.isfinite(T[i, j]) and np.isfinite(B[i, j])):
                        finite = False
            if not finite:
                if bad_step < 0 or k + 1 < bad_step:
                    bad_step = k + 1
                break
            if dense:
                for i in range(n):
                    for j in range(n):
                        path[b, k + 1, i, j] = T[i, c - n + j]
    return top, bot, path, bad_step


def _node_table(system: MorseSturmSystem, t: np.ndarray, steps: int):
    """S-node tables for the distinct clamped ``t`` and the index of each ``t`` into them.

    Contour points on the vertical edges all clamp to ``t = 0`` or ``t = 1`` and the
    horizontal edges share their real parts, so most tables are duplicates.
    """
    uniq, inv = np.unique(clamp_t(t), return_inverse=True)
    x = np.linspace(0.0, 1.0, 2 * steps + 1)
    return family_S_real(system, uniq[:, None], x[None, :]), inv.astype(np.int64)


def _run(system, t, shift, steps, dense, full=True):
    """Integrate all ``2n`` columns (``full``) or only the ``n`` starting at ``(0, I)``."""
    if steps < MIN_STEPS:
        raise ValueError(f"steps must be >= {MIN_STEPS}, got {steps}")
    jdiag = system.signature.diagonal
    n = system.n
    real = not np.any(shift.imag)
    dtype = np.float64 if real else np.complex128
    shift = shift.real.copy() if real else shift
    eye, zero = np.eye(n, dtype=dtype), np.zeros((n, n), dtype=dtype)
    if full:
        top0, bot0 = np.hstack([eye, zero]), np.hstack([zero, eye])
    else:
        top0, bot0 = zero, eye
    chunk = max(1, _NODE_BUDGET // ((2 * steps + 1) * n * n))
    tops, bots, paths = [], [], []
    for lo in range(0, t.size, chunk):
        sl = slice(lo, lo + chunk)
        nodes, sidx = _node_table(system, t[sl], steps)
        top, bot, path, bad = _rk4_kernel(jdiag, nodes, sidx, shift[sl], 1.0 / steps, top0, bot0, dense)
        if bad >= 0:
            raise PropagationDivergedError(bad)
        tops.append(top)
        bots.append(bot)
        paths.append(path)
    Psi = np.concatenate([np.concatenate(tops), np.concatenate(bots)], axis=1)
    return Psi.astype(complex), np.concatenate(paths).astype(complex)


def _split(z: ArrayLike, delta: float):
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    return z.real.copy(), (delta + 1j * z.imag).astype(np.complex128)


def propagate_many(system: MorseSturmSystem, z: ArrayLike, steps: int = DEFAULT_STEPS,
                   delta: float = 0.0) -> np.ndarray:
    """``Psi_z(1)`` for every ``z`` in a 1-d array; shape ``(len(z), 2n, 2n)``.

    ``delta`` adds ``delta * I`` to ``S_z`` (the shifted family ``A + delta``).
    """
    t, shift = _split(z, delta)
    Psi, _ = _run(system, t, shift, steps, dense=False)
    return Psi


def shooting_many(system: MorseSturmSystem, z: ArrayLike, steps: int = DEFAULT_STEPS,
                  delta: float = 0.0) -> np.ndarray:
    """``b_z = b_z(1)`` for every ``z``; shape ``(len(z), n, n)``.

    Only the ``n`` columns with initial data ``(0, e_i)`` are integrated.
    """
    t, shift = _split(z, delta)
    cols, _ = _run(system, t, shift, steps, dense=False, full=False)
    return cols[:, :system.n, :]


def det_b(system: MorseSturmSystem, z: ArrayLike, steps: int = DEFAULT_STEPS,
          delta: float = 0.0) -> np.ndarray:
    """``det b_z`` for an array of ``z`` (LU with partial pivoting via LAPACK)."""
    return np.linalg.det(shooting_many(system, z, steps, delta))


def shooting_path(system: MorseSturmSystem, z, steps: int = DEFAULT_STEPS,
                  delta: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Grid ``x_k = k / steps`` and ``b_z(x_k)`` on it, shape ``(steps + 1, n, n)``."""
    t, shift = _split(z, delta)
    _, path = _run(system, t[:1], shift[:1], steps, dense=True, full=False)
    return np.linspace(0.0, 1.0, steps + 1), path[0]


def propagate(system: MorseSturmSystem, z, steps: int = DEFAULT_STEPS,
              delta: float = 0.0) -> PropagatorResult:
    """RK4 with ``steps`` uniform steps on ``[0, 1]`` at a single ``z``."""
    from .core import ComplexParameter

    z = ComplexParameter.coerce(z).z
    Psi = propagate_many(system, [z], steps, delta)[0]
    n = system.n
    return PropagatorResult(Psi, Psi[:n, n:].copy(), symplectic_defect(Psi), steps)


def clutching_matrix(Psi: np.ndarray) -> np.ndarray:
    """Matrix of ``(a, b) -> sigma (Psi^{-1} (0, b) - (0, a))`` for ``Psi = Psi_z(1)``.

    Uses ``Psi^{-1} = -sigma Psi^T sigma``, valid for symplectic ``Psi``; the result
    is block upper triangular ``[[I, *], [0, -b_z^T]]``. Accepts a stack of matrices.
    """
    Psi = np.asarray(Psi)
    n = Psi.shape[-1] // 2
    sg = sigma(n)
    inv = -sg @ np.swapaxes(Psi, -1, -2) @ sg
    out = np.empty(Psi.shape, dtype=complex)
    out[..., :, :n] = -sg[:, n:]  # -sigma (0, I)
    out[..., :, n:] = sg @ inv[..., :, n:]
    return out
