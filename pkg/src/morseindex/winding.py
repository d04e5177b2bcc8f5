"""Winding numbers along rectangles enclosing ``[0, 1]`` in the complex plane.

The argument of ``f`` is tracked continuously: a contour segment is bisected
until the argument increment between its endpoints is below ``pi / 2``, so the
lifted argument is unambiguous. Evaluators are vectorized, ``f(z_array) -> array``,
and refinement runs in rounds so each round is a single batched call.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContourDegenerateError, NonResolvableWindingError

Evaluator = Callable[[np.ndarray], np.ndarray]

DEFAULT_HEIGHT = 0.25
MAX_DEPTH = 24
_RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class Contour:
    """Counterclockwise rectangle ``[left - h, right + h] x [-h, h]``.

    ``anchors`` are extra real parts sampled on both horizontal edges; callers
    that know where the argument turns quickly (near real zeros of a function
    depending on ``z`` through ``t + i s``) place them there, since a full turn
    between two samples is invisible to the increment test.
    """

    h: float = DEFAULT_HEIGHT
    initial_samples: int = 64
    left: float = 0.0
    right: float = 1.0
    anchors: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"contour height must be positive, got {self.h}")
        if self.initial_samples < 8:
            raise ValueError("initial_samples must be >= 8")
        if not self.right > self.left:
            raise ValueError("contour must enclose a nonempty interval")

    def corners(self) -> np.ndarray:
        a, b, h = self.left - self.h, self.right + self.h, self.h
        return np.array([complex(a, -h), complex(b, -h), complex(b, h), complex(a, h)])

    def samples(self) -> np.ndarray:
        """Initial closed sample list (first point not repeated), corners included."""
        c = self.corners()
        ends = np.roll(c, -1)
        lengths = np.abs(ends - c)
        counts = np.maximum(2, np.round(self.initial_samples * lengths / lengths.sum())).astype(int)
        pts = [c[i] + (ends[i] - c[i]) * np.arange(counts[i]) / counts[i] for i in range(4)]
        if self.anchors:
            a, b, h = c[0].real, c[1].real, self.h
            extra = np.asarray(self.anchors, dtype=float)
            extra = extra[(extra > a) & (extra < b)]
            bottom = np.unique(np.concatenate([pts[0].real, extra]))
            top = np.unique(np.concatenate([pts[2].real, extra]))[::-1]
            pts[0] = bottom - 1j * h
            pts[2] = top + 1j * h
        return np.concatenate(pts)


@dataclass
class WindingTrace:
    points: np.ndarray  # closed list of z, last == first
    values: np.ndarray  # f at points
    cum_arg: np.ndarray  # accumulated argument, cum_arg[0] == 0
    total_arg: float
    winding: int

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["re_z", "im_z", "re_f", "im_f", "cum_arg"])
            for z, f, a in zip(self.points, self.values, self.cum_arg):
                w.writerow([repr(float(v)) for v in (z.real, z.imag, f.real, f.imag, a)])


def winding_number(f: Evaluator, contour: Contour | None = None,
                   min_modulus: float | None = None) -> WindingTrace:
    """Winding number of ``f`` around 0 along ``contour``.

    ``min_modulus`` defaults to ``1e-10`` times the median ``|f|`` over the
    initial samples.
    """
    contour = contour or Contour()
    z = contour.samples()
    fz = np.asarray(f(z), dtype=complex)
    if min_modulus is None:
        min_modulus = 1e-10 * float(np.median(np.abs(fz)))
        if min_modulus == 0.0:
            raise ContourDegenerateError("f vanishes on most of the contour")
    _check_modulus(z, fz, min_modulus)

    # Segment k joins z[k] -> z[k+1] (cyclically); depth counts bisections.
    depth = np.zeros(z.size, dtype=int)
    while True:
        nxt = np.roll(fz, -1)
        bad = ~_small_increment(fz, nxt)
        if not bad.any():
            break
        idx = np.flatnonzero(bad)
        if depth[idx].max() >= MAX_DEPTH:
            k = idx[np.argmax(depth[idx])]
            raise NonResolvableWindingError(
                f"argument not resolved near z = {z[k]:.6g} after {MAX_DEPTH} bisections"
            )
        znext = np.roll(z, -1)
        mid = 0.5 * (z[idx] + znext[idx])
        fmid = np.asarray(f(mid), dtype=complex)
        _check_modulus(mid, fmid, min_modulus)
        z = np.insert(z, idx + 1, mid)
        fz = np.insert(fz, idx + 1, fmid)
        newdepth = depth[idx] + 1
        depth[idx] = newdepth
        depth = np.insert(depth, idx + 1, newdepth)

    zc = np.append(z, z[0])
    fc = np.append(fz, fz[0])
    incr = np.angle(fc[1:] / fc[:-1])
    cum = np.concatenate([[0.0], np.cumsum(incr)])
    total = float(cum[-1])
    wind = int(round(total / (2 * np.pi)))
    if abs(total / (2 * np.pi) - wind) >= _RESIDUAL_TOL:
        raise NonResolvableWindingError(f"accumulated argument {total} is not a multiple of 2 pi")
    return WindingTrace(zc, fc, cum, total, wind)


def _small_increment(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # |arg(b / a)| < pi / 2  <=>  Re(b conj(a)) > 0
    return (b * np.conj(a)).real > 0


def _check_modulus(z, fz, floor):
    mod = np.abs(fz)
    bad = ~(mod >= floor)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise ContourDegenerateError(
            f"|f| = {mod[k]:.3g} below {floor:.3g} at z = {z[k]:.6g}; try another contour height"
        )


def chern_of_clutching(a: Callable[[np.ndarray], np.ndarray], contour: Contour | None = None,
                       min_modulus: float | None = None) -> int:
    """First Chern number of clutching data ``a``: the winding of ``det a(z)``.

    ``a`` maps an array of ``z`` to a stack of square matrices.
    """
    return winding_number(lambda z: np.linalg.det(a(z)), contour, min_modulus).winding


def arctan_normalization(z: np.ndarray, conjugate: bool = False) -> np.ndarray:
    sign = -1.0 if conjugate else 1.0
    return np.arctan(z.real - 0.5) + sign * 1j * z.imag


def arctan_normalization_check(contour: Contour | None = None, conjugate: bool = False) -> int:
    """Winding of ``arctan(t - 1/2) + i s``; equals 1 on any contour around ``t = 1/2``."""
    contour = contour or Contour(0.5)
    return winding_number(lambda z: arctan_normalization(z, conjugate), contour).winding
