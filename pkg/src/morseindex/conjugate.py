"""Conjugate instants on the real axis and the conjugate index.

An instant ``t in (0, 1]`` is conjugate when ``b_t`` is singular; its
multiplicity is ``dim ker b_t`` and every kernel vector ``v`` gives the Jacobi
field ``u(x) = b_t(x) v`` vanishing at both ends. The conjugate index is the
winding number of ``z -> det b_z`` around a contour enclosing ``[0, 1]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import MorseSturmSystem, family_S_dt
from .errors import ContourDegenerateError, EndpointConjugateError
from .propagator import DEFAULT_STEPS, det_b, shooting_many
from .winding import DEFAULT_HEIGHT, Contour, WindingTrace, winding_number

log = logging.getLogger(__name__)

ENDPOINT_TOL = 1e-8
RANK_THRESHOLD = 1e-6
DEFAULT_GRID = 256
CLUSTER_TOL = 1e-6
_ROOT_XTOL = 1e-12
_DUPLICATE_TOL = 1e-9
_SPLIT_PROBE = 1e-7
_ANCHORS_PER_INSTANT = 41
_ANCHOR_HALFWIDTH = 6.0


@dataclass
class ConjugateInstant:
    t: float
    multiplicity: int
    kernel_basis: np.ndarray  # shape (multiplicity, n), orthonormal rows
    det_residual: float

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "multiplicity": self.multiplicity,
            "kernel_basis": self.kernel_basis.tolist(),
            "det_residual": self.det_residual,
        }


@dataclass
class RealAxisScan:
    t: np.ndarray
    det: np.ndarray
    smallest_sv: np.ndarray
    largest_sv: np.ndarray


# scans and endpoint margins are pure functions of (system, grid, steps, delta);
# the index computations for one system request them several times
_scan_cache: dict[tuple, object] = {}
_SCAN_CACHE_SIZE = 32


def _remember(key, value):
    if len(_scan_cache) >= _SCAN_CACHE_SIZE:
        _scan_cache.pop(next(iter(_scan_cache)))
    _scan_cache[key] = value


@dataclass
class ConjugateReport:
    instants: list[ConjugateInstant]
    mu_con: int
    classical_sum: int
    endpoint_ok: bool
    contour_height: float
    ode_steps: int
    warnings: list[str] = field(default_factory=list)
    trace: WindingTrace | None = None
    scan: RealAxisScan | None = None

    def to_json(self) -> dict:
        return {
            "mu_con": self.mu_con,
            "classical_sum": self.classical_sum,
            "endpoint_ok": self.endpoint_ok,
            "instants": [c.to_json() for c in self.instants],
            "contour_height": self.contour_height,
            "ode_steps": self.ode_steps,
            "contour_samples": None if self.trace is None else int(self.trace.points.size - 1),
            "warnings": list(self.warnings),
        }


def _real_b(system, t, steps, delta):
    return shooting_many(system, np.asarray(t, dtype=float), steps, delta).real


def endpoint_margin(system: MorseSturmSystem, steps: int = DEFAULT_STEPS, delta: float = 0.0,
                    coarse: int = 33) -> float:
    """``|det b_1|`` relative to the median ``|det b_t|`` over a coarse grid in ``(0, 1]``."""
    key = ("margin", system.digest(), coarse, steps, delta)
    if key in _scan_cache:
        return _scan_cache[key]
    ts = np.linspace(0.0, 1.0, coarse)[1:]
    d = np.abs(np.linalg.det(_real_b(system, ts, steps, delta)))
    scale = float(np.median(d))
    margin = float(d[-1] / scale) if scale > 0.0 else 0.0
    _remember(key, margin)
    return margin


def endpoint_check(system: MorseSturmSystem, steps: int = DEFAULT_STEPS, delta: float = 0.0) -> bool:
    """True iff ``t = 1`` is not a conjugate instant (to relative tolerance ``1e-8``)."""
    return endpoint_margin(system, steps, delta) > ENDPOINT_TOL


def scan_real_axis(system: MorseSturmSystem, grid_size: int = DEFAULT_GRID,
                   steps: int = DEFAULT_STEPS, delta: float = 0.0) -> RealAxisScan:
    """``det b_t`` and the extreme singular values of ``b_t`` on ``t = k / grid_size``."""
    key = (system.digest(), grid_size, steps, delta)
    if key in _scan_cache:
        return _scan_cache[key]
    ts = np.linspace(0.0, 1.0, grid_size + 1)[1:]
    b = _real_b(system, ts, steps, delta)
    sv = np.linalg.svd(b, compute_uv=False)
    scan = RealAxisScan(ts, np.linalg.det(b), sv[:, -1], sv[:, 0])
    _remember(key, scan)
    return scan


def _instant_at(system, t, steps, delta, rank_threshold, scale) -> ConjugateInstant | None:
    b = _real_b(system, [t], steps, delta)[0]
    _, sv, vt = np.linalg.svd(b)
    m = int(np.sum(sv < rank_threshold * scale))
    if m == 0:
        return None
    return ConjugateInstant(float(t), m, vt[-m:].copy(), float(abs(np.linalg.det(b))))


def find_conjugate_instants(system: MorseSturmSystem, grid_size: int = DEFAULT_GRID,
                            rank_threshold: float = RANK_THRESHOLD,
                            steps: int = DEFAULT_STEPS, delta: float = 0.0,
                            warnings: list[str] | None = None,
                            scan: RealAxisScan | None = None) -> list[ConjugateInstant]:
    """Locate the singular instants of ``b_t`` in ``(0, 1]``.

    Odd-multiplicity roots show up as sign changes of ``det b_t`` and are
    refined by Brent's method; even-multiplicity roots leave the sign intact and
    are found as local minima of the smallest singular value, which vanishes
    linearly at any root. Singular values count as zero below
    ``rank_threshold`` times the median of ``||b_t||_2`` over the scan (at a
    root of a 1 x 1 system ``||b_t||`` itself vanishes, so it cannot be the scale).
    """
    if grid_size < 64:
        raise ValueError("grid_size must be >= 64")
    if not endpoint_check(system, steps, delta):
        raise EndpointConjugateError("t = 1 is a conjugate instant")
    scan = scan or scan_real_axis(system, grid_size, steps, delta)
    ts, d, smin = scan.t, scan.det, scan.smallest_sv

    def det_fn(t):
        return np.linalg.det(_real_b(system, [t], steps, delta)[0])

    def smin_fn(t):
        return np.linalg.svd(_real_b(system, [t], steps, delta)[0], compute_uv=False)[-1]

    roots = []
    in_bracket = np.zeros(ts.size, dtype=bool)
    for i in range(ts.size - 1):
        if d[i] == 0.0:
            roots.append(ts[i])
            in_bracket[i] = True
        elif d[i] * d[i + 1] < 0:
            roots.append(brentq(det_fn, ts[i], ts[i + 1], xtol=_ROOT_XTOL, rtol=4 * np.finfo(float).eps))
            in_bracket[i] = in_bracket[i + 1] = True
    for i in range(1, ts.size - 1):
        if in_bracket[i] or not (smin[i] < smin[i - 1] and smin[i] <= smin[i + 1]):
            continue
        # a root makes the minimum V-shaped; a smooth dip stays close to its neighbours
        if smin[i] > 0.5 * max(smin[i - 1], smin[i + 1]):
            continue
        a, b = ts[i - 1], ts[i + 1]
        r = float(minimize_scalar(smin_fn, bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-11}).x)
        # det keeps its sign over [a, b]; a simple root at r then has a partner
        # elsewhere in the cell (two close simple roots look like one double root)
        pts = [a, max(a, r - _SPLIT_PROBE), min(b, r + _SPLIT_PROBE), b]
        vals = [det_fn(p) for p in pts]
        found = []
        for (p, fp), (q, fq) in zip(zip(pts, vals), zip(pts[1:], vals[1:])):
            if q > p and fp * fq < 0:
                found.append(brentq(det_fn, p, q, xtol=_ROOT_XTOL, rtol=4 * np.finfo(float).eps))
        roots.extend(found)
        if not any(abs(x - r) < 2 * _SPLIT_PROBE for x in found):
            roots.append(r)

    scale = float(np.median(scan.largest_sv))
    instants = []
    for t in sorted(roots):
        if instants and t - instants[-1].t < _DUPLICATE_TOL:
            continue
        inst = _instant_at(system, t, steps, delta, rank_threshold, scale)
        if inst is not None:
            instants.append(inst)
    for a, b in zip(instants, instants[1:]):
        if b.t - a.t < CLUSTER_TOL:
            msg = f"unresolved cluster of conjugate instants near t = {a.t:.9f}"
            log.warning(msg)
            if warnings is not None:
                warnings.append(msg)
    return instants


def rate_bound(system: MorseSturmSystem, grid: int = 33) -> float:
    """``n * max ||d/dt S_t(x)||_2`` over a grid; bounds how fast ``arg det b_{t+is}`` turns."""
    t = np.linspace(0.0, 1.0, grid)
    x = np.linspace(0.0, 1.0, grid)
    dS = family_S_dt(system, t[:, None], x[None, :])
    return system.n * float(np.linalg.norm(dS, ord=2, axis=(-2, -1)).max())


def contour_for(system: MorseSturmSystem, h: float, instants: list[ConjugateInstant],
                initial_samples: int = 256) -> Contour:
    """Rectangle of height ``h`` with dense anchors around the real conjugate instants.

    Off the axis the argument of ``det b_{t+is}`` turns by about ``pi`` per
    crossing eigenvalue within ``|t - t_j| ~ h / rate_bound``; with multiplicity
    two that is a full turn, so the neighbourhood is sampled explicitly.
    """
    width = _ANCHOR_HALFWIDTH * h / max(rate_bound(system), 1.0)
    offsets = np.linspace(-width, width, _ANCHORS_PER_INSTANT)
    anchors = tuple(float(a) for inst in instants for a in inst.t + offsets)
    return Contour(h, initial_samples=initial_samples, anchors=anchors)


def conjugate_index(system: MorseSturmSystem, contour_height: float = DEFAULT_HEIGHT,
                    ode_steps: int = DEFAULT_STEPS, grid_size: int = DEFAULT_GRID,
                    delta: float = 0.0) -> ConjugateReport:
    """Winding number of ``det b_z`` plus the located real instants."""
    if not endpoint_check(system, ode_steps, delta):
        raise EndpointConjugateError("t = 1 is a conjugate instant; the conjugate index is undefined")
    warnings: list[str] = []
    scan = scan_real_axis(system, grid_size, ode_steps, delta)
    instants = find_conjugate_instants(system, grid_size, steps=ode_steps, delta=delta,
                                       warnings=warnings, scan=scan)
    h, steps = contour_height, ode_steps
    try:
        trace = winding_number(lambda z: det_b(system, z, steps, delta),
                               contour_for(system, h, instants))
    except ContourDegenerateError as exc:
        h, steps = contour_height / 2, ode_steps * 2
        msg = f"contour degenerate ({exc}); retried with h = {h:g}, ode_steps = {steps}"
        log.warning(msg)
        warnings.append(msg)
        trace = winding_number(lambda z: det_b(system, z, steps, delta),
                               contour_for(system, h, instants))
    return ConjugateReport(
        instants=instants,
        mu_con=trace.winding,
        classical_sum=sum(c.multiplicity for c in instants),
        endpoint_ok=True,
        contour_height=h,
        ode_steps=steps,
        warnings=warnings,
        trace=trace,
        scan=scan,
    )


def offaxis_nonvanishing_check(system: MorseSturmSystem, sample_count: int = 200, seed: int = 0,
                               steps: int = DEFAULT_STEPS, rel_tol: float = 1e-10) -> dict:
    """``det b_z`` must not vanish off the real axis; sample and report the margin.

    Points have ``t`` uniform in ``[-0.5, 1.5]`` and ``|s|`` uniform in ``[0.05, 1]``.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(-0.5, 1.5, sample_count)
    s = rng.uniform(0.05, 1.0, sample_count) * rng.choice([-1.0, 1.0], sample_count)
    mod = np.abs(det_b(system, t + 1j * s, steps))
    scale = float(np.median(mod)) if sample_count else 0.0
    rel = mod / scale if scale > 0 else np.zeros_like(mod)
    bad = np.flatnonzero(rel < rel_tol)
    return {
        "samples": int(sample_count),
        "seed": int(seed),
        "min_modulus": float(mod.min()) if sample_count else None,
        "min_relative": float(rel.min()) if sample_count else None,
        "violations": int(bad.size),
        "violation_points": [[float(t[k]), float(s[k])] for k in bad],
        "ok": bool(bad.size == 0),
    }
