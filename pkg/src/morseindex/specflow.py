"""Spectral index by Galerkin inertia counting and by crossing forms.

The strong operators ``A_t u = J u'' + S_t u`` (Dirichlet conditions) are
discretized in the ``L^2``-orthonormal sine basis ``sqrt(2) sin(k pi x) e_i``,
which diagonalizes ``J d^2/dx^2`` exactly. For a path with invertible ends the
spectral flow of the truncation is ``n_minus(A_0) - n_minus(A_1)``; both counts
grow with the truncation size in the indefinite case but their difference
settles, and is recomputed under doubling until it does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import block_diag, eigvalsh, ldl

from .conjugate import DEFAULT_GRID, endpoint_check, find_conjugate_instants
from .core import MorseSturmSystem, family_S_dt, family_S_real
from .errors import (
    CrossingIrregularError,
    EndpointConjugateError,
    EndpointDegenerateError,
    StabilizationError,
)
from .propagator import DEFAULT_STEPS, shooting_path
from .winding import Contour, winding_number

MAX_DOUBLINGS = 6
ZERO_PIVOT_TOL = 1e-10
REGULARITY_TOL = 1e-8
DELTA_ESCALATION = 1e-3
DELTA_FACTORS = (1.0, 0.37, 0.61)


@dataclass(frozen=True)
class GalerkinConfig:
    N: int = 64
    quad_points: int | None = None  # Simpson panels; default 16 N
    stabilization_window: int = 2

    def __post_init__(self):
        if self.N < 8:
            raise ValueError("Galerkin N must be >= 8")
        if self.quad_points is not None and self.quad_points < 4 * self.N:
            raise ValueError("quad_points must be >= 4 N")
        if self.stabilization_window < 1:
            raise ValueError("stabilization_window must be >= 1")

    def panels(self, N: int | None = None) -> int:
        N = N or self.N
        q = self.quad_points if (self.quad_points and N == self.N) else 16 * N
        return q + (q % 2)


def simpson_weights(panels: int) -> np.ndarray:
    """Composite Simpson weights on ``panels + 1`` uniform nodes of ``[0, 1]``."""
    if panels < 2 or panels % 2:
        raise ValueError("Simpson's rule needs an even number of panels")
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * panels)


def _sine_modes(N: int, panels: int):
    x = np.linspace(0.0, 1.0, panels + 1)
    k = np.arange(1, N + 1)
    phi = math.sqrt(2.0) * np.sin(np.pi * np.outer(x, k))
    return x, simpson_weights(panels), phi, k * np.pi


def _potential_matrix(system: MorseSturmSystem, t: float, N: int, panels: int) -> np.ndarray:
    """``G[(k,i),(l,j)] = int (S_t)_ij 2 sin(k pi x) sin(l pi x) dx`` (mode-major index)."""
    x, w, phi, _ = _sine_modes(N, panels)
    S = family_S_real(system, t, x)
    n = system.n
    G = np.empty((N, n, N, n))
    for i in range(n):
        for j in range(i, n):
            blk = (phi * (w * S[:, i, j])[:, None]).T @ phi
            G[:, i, :, j] = blk
            G[:, j, :, i] = blk.T
    G = G.reshape(N * n, N * n)
    return 0.5 * (G + G.T)


def galerkin_strong(system: MorseSturmSystem, t: float, config: GalerkinConfig = GalerkinConfig(),
                    delta: float = 0.0, N: int | None = None) -> np.ndarray:
    """Matrix of ``A_t + delta`` in the sine basis, size ``nN x nN``."""
    N = N or config.N
    _, _, _, kpi = _sine_modes(N, 2)
    jd = system.signature.diagonal
    diag = -np.outer(kpi**2, jd).ravel() + delta
    return _potential_matrix(system, t, N, config.panels(N)) + np.diag(diag)


def galerkin_riesz(system: MorseSturmSystem, t: float, config: GalerkinConfig = GalerkinConfig(),
                   delta: float = 0.0, N: int | None = None) -> np.ndarray:
    """Matrix of the form ``int <J u', u'> - int <S_t u, u> - delta ||u||^2`` in the
    ``H^1_0``-orthonormal basis ``sqrt(2) sin(k pi x) e_i / (k pi)``."""
    N = N or config.N
    _, _, _, kpi = _sine_modes(N, 2)
    jd = system.signature.diagonal
    scale = np.repeat(1.0 / kpi, system.n)
    G = _potential_matrix(system, t, N, config.panels(N))
    diag = np.tile(jd, N) - delta * scale**2
    return np.diag(diag) - scale[:, None] * G * scale[None, :]


def inertia(M: np.ndarray) -> tuple[int, int, int]:
    """``(n_minus, n_zero, n_plus)`` of a real symmetric matrix.

    Counts the signs of the block-diagonal factor of a Bunch-Kaufman
    ``L D L^T`` factorization (Sylvester's law of inertia). Pivots below
    ``1e-10`` times the largest are counted as zero.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.size == 0:
        return (0, 0, 0)
    scale = np.abs(M).max()
    if np.abs(M - M.T).max() > 1e-10 * max(scale, 1e-300):
        raise ValueError("matrix is not symmetric")
    if scale == 0.0:
        return (0, M.shape[0], 0)
    _, D, _ = ldl(M, lower=True)
    pivots = []
    k, m = 0, D.shape[0]
    while k < m:
        if k + 1 < m and D[k + 1, k] != 0.0:
            pivots.extend(np.linalg.eigvalsh(D[k:k + 2, k:k + 2]))
            k += 2
        else:
            pivots.append(D[k, k])
            k += 1
    p = np.asarray(pivots)
    tol = ZERO_PIVOT_TOL * np.abs(p).max()
    return int(np.sum(p < -tol)), int(np.sum(np.abs(p) <= tol)), int(np.sum(p > tol))


@dataclass
class InertiaRow:
    N: int
    n_minus_0: int
    n_minus_1: int

    @property
    def diff(self) -> int:
        return self.n_minus_0 - self.n_minus_1


@dataclass
class InertiaFlow:
    value: int
    rows: list[InertiaRow]


def _stabilized(assemble: Callable[[float, int], np.ndarray], config: GalerkinConfig) -> InertiaFlow:
    rows: list[InertiaRow] = []
    for j in range(MAX_DOUBLINGS + 1):
        N = config.N * 2**j
        counts = []
        for t in (0.0, 1.0):
            nm, nz, _ = inertia(assemble(t, N))
            if nz:
                raise EndpointDegenerateError(f"Galerkin matrix at t = {t:g} (N = {N}) has {nz} zero pivots")
            counts.append(nm)
        rows.append(InertiaRow(N, *counts))
        w = config.stabilization_window
        if len(rows) >= w and len({r.diff for r in rows[-w:]}) == 1:
            return InertiaFlow(rows[-1].diff, rows)
    raise StabilizationError(
        f"inertia difference did not stabilize: {[r.diff for r in rows]} for N = {[r.N for r in rows]}"
    )


def spectral_flow_inertia(system: MorseSturmSystem, config: GalerkinConfig = GalerkinConfig(),
                          delta: float = 0.0) -> InertiaFlow:
    return _stabilized(lambda t, N: galerkin_strong(system, t, config, delta, N), config)


def spectral_index_inertia(system: MorseSturmSystem, config: GalerkinConfig = GalerkinConfig(),
                           delta: float = 0.0) -> int:
    """``sfl(A) = n_minus(A_0) - n_minus(A_1)``, stabilized over doubling ``N``."""
    return spectral_flow_inertia(system, config, delta).value


def riesz_form_flow(system: MorseSturmSystem, config: GalerkinConfig = GalerkinConfig(),
                    delta: float = 0.0) -> int:
    """Spectral flow of the Riesz-representation path ``L``; equals ``-sfl(A)``."""
    return _stabilized(lambda t, N: galerkin_riesz(system, t, config, delta, N), config).value


@dataclass
class CrossingDatum:
    t: float
    form_matrix: np.ndarray
    signature: int
    regular: bool

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "form_matrix": self.form_matrix.tolist(),
            "signature": self.signature,
            "regular": self.regular,
        }


def crossing_form(system: MorseSturmSystem, t: float, kernel: np.ndarray,
                  steps: int = DEFAULT_STEPS, delta: float = 0.0) -> CrossingDatum:
    """``Q_ij = int <dS_t/dt u_i, u_j>`` over the Jacobi fields ``u_i = b_t(x) v_i``.

    ``kernel`` holds the vectors ``v_i`` as rows. The shift ``delta`` changes
    the kernel but not the form (``d(delta I)/dt = 0``).
    """
    steps += steps % 2
    x, path = shooting_path(system, t, steps, delta)
    U = path.real @ np.asarray(kernel, dtype=float).T  # (steps + 1, n, m)
    dS = family_S_dt(system, t, x)
    w = simpson_weights(steps)
    Q = np.einsum("x,xim,xij,xjl->ml", w, U, dS, U)
    Q = 0.5 * (Q + Q.T)
    gram = np.einsum("x,xim,xil->ml", w, U, U)
    eig = np.linalg.eigvalsh(Q)
    scale = float(np.linalg.norm(dS, ord=2, axis=(1, 2)).max()) * float(np.linalg.eigvalsh(gram).max())
    regular = bool(np.abs(eig).min() > REGULARITY_TOL * scale) if scale > 0 else False
    return CrossingDatum(float(t), Q, int(np.sum(eig > 0) - np.sum(eig < 0)), regular)


@dataclass
class CrossingResult:
    value: int
    crossings: list[CrossingDatum]
    delta_used: float
    attempts: list[float] = field(default_factory=list)


def spectral_index_crossing(system: MorseSturmSystem, delta: float = 0.0,
                            steps: int = DEFAULT_STEPS, grid_size: int = DEFAULT_GRID) -> CrossingResult:
    """``sfl(A + delta) = sum over crossings of sgn Q``, escalating ``delta`` on irregular crossings.

    With ``delta = 0`` the attempts are ``0`` and then ``1e-3 x (1, 0.37, 0.61)``;
    otherwise ``delta x (1, 0.37, 0.61)``.
    """
    if delta == 0.0:
        deltas = [0.0] + [DELTA_ESCALATION * f for f in DELTA_FACTORS]
    else:
        deltas = [delta * f for f in DELTA_FACTORS]
    tried = []
    for d in deltas:
        tried.append(d)
        if not endpoint_check(system, steps, d):
            if d == delta:
                raise EndpointConjugateError(f"t = 1 is a conjugate instant of the system shifted by {d:g}")
            continue
        instants = find_conjugate_instants(system, grid_size, steps=steps, delta=d)
        data = [crossing_form(system, c.t, c.kernel_basis, steps, d) for c in instants]
        if all(c.regular for c in data):
            return CrossingResult(sum(c.signature for c in data), data, d, tried)
    raise CrossingIrregularError(f"irregular crossings for every shift tried: {tried}")


def integration_by_parts_check(system: MorseSturmSystem, t: float, u, v, delta: float = 0.0,
                               panels: int = 4000) -> dict:
    """Compare ``<L_t u, v>_{H^1_0}`` with ``-<A_t u, v>_{L^2}`` by quadrature.

    A field is either ``(k, i)``, standing for ``sin(k pi x) e_i``, or an array
    ``c`` of shape ``(K, n)`` standing for ``sum_k sin((k + 1) pi x) c[k]``.
    """
    x = np.linspace(0.0, 1.0, panels + 1)
    w = simpson_weights(panels)
    n = system.n
    jd = system.signature.diagonal

    def field_(spec):
        if isinstance(spec, tuple):
            c = np.zeros((spec[0], n))
            c[spec[0] - 1, spec[1]] = 1.0
        else:
            c = np.asarray(spec, dtype=float).reshape(-1, n)
        a = np.pi * np.arange(1, c.shape[0] + 1)
        sx, cx = np.sin(np.outer(x, a)), np.cos(np.outer(x, a))
        return sx @ c, (cx * a) @ c, -(sx * a**2) @ c

    u0, u1, u2 = field_(u)
    v0, v1, _ = field_(v)
    S = family_S_real(system, t, x) + delta * np.eye(n)
    Su = np.einsum("xij,xj->xi", S, u0)
    riesz = w @ np.sum(jd * u1 * v1, axis=1) - w @ np.sum(Su * v0, axis=1)
    strong = -(w @ np.sum((jd * u2 + Su) * v0, axis=1))
    return {"t": t, "riesz": float(riesz), "neg_strong": float(strong),
            "abs_diff": float(abs(riesz - strong))}


# ---------------------------------------------------------------------------
# Finite-dimensional paths and the uniqueness axioms of spectral flow.

MatrixPath = Callable[[float], np.ndarray]


def sfl_endpoints(path: MatrixPath) -> int:
    a, b = path(0.0), path(1.0)
    ia, ib = inertia(a), inertia(b)
    if ia[1] or ib[1]:
        raise EndpointDegenerateError("path endpoints must be invertible")
    return ia[0] - ib[0]


def sfl_clutching(path: MatrixPath, h: float = 0.5, samples: int = 256) -> int:
    """Winding of ``det(A_t + i s)`` (ends extended constantly) around ``[0, 1]``."""

    def f(z):
        out = np.empty(z.size, dtype=complex)
        for k, zk in enumerate(z):
            A = path(min(max(zk.real, 0.0), 1.0))
            out[k] = np.linalg.det(A + 1j * zk.imag * np.eye(A.shape[0]))
        return out

    return winding_number(f, Contour(h, initial_samples=samples)).winding


def _random_symmetric(rng, m, scale=1.0):
    a = rng.normal(size=(m, m)) * scale
    return 0.5 * (a + a.T)


def random_path(rng, m: int, margin: float = 0.05) -> MatrixPath:
    """Smooth random symmetric path with invertible, well-separated ends."""
    while True:
        A0, A1, C = (_random_symmetric(rng, m) for _ in range(3))
        if min(np.abs(eigvalsh(A0)).min(), np.abs(eigvalsh(A1)).min()) > margin:
            break
    return lambda t: (1 - t) * A0 + t * A1 + math.sin(math.pi * t) * C


def concatenate(p: MatrixPath, q: MatrixPath) -> MatrixPath:
    return lambda t: p(2 * t) if t <= 0.5 else q(2 * t - 1)


def direct_sum(p: MatrixPath, q: MatrixPath) -> MatrixPath:
    return lambda t: block_diag(p(t), q(t))


def axiom_suite(count: int = 20, seed: int = 0, max_dim: int = 4) -> dict:
    """Check the uniqueness axioms on finite-dimensional paths.

    Every flow is computed twice: by endpoint inertia and by the winding of
    ``det(A_t + i s)``. Returns ``{axiom: {"pass": bool, ...}}``.
    """
    rng = np.random.default_rng(seed)
    both = lambda p: (sfl_endpoints(p), sfl_clutching(p))
    out = {}

    const = lambda t: np.diag([1.0, -1.0])
    vals = both(const)
    out["constant"] = {"pass": vals == (0, 0), "flows": list(vals)}

    arctan = lambda t: np.array([[math.atan(t - 0.5)]])
    vals = both(arctan)
    out["normalization"] = {"pass": vals == (1, 1), "flows": list(vals)}

    vals = both(direct_sum(arctan, lambda t: np.array([[-3.0]])))
    ok_example = vals == (1, 1)
    failures = []
    for k in range(count):
        p = random_path(rng, int(rng.integers(1, max_dim + 1)))
        q = random_path(rng, int(rng.integers(1, max_dim + 1)))
        a, b, s = both(p), both(q), both(direct_sum(p, q))
        if not (a[0] == a[1] and b[0] == b[1] and s == (a[0] + b[0],) * 2):
            failures.append({"case": k, "parts": [list(a), list(b)], "sum": list(s)})
    out["direct_sum"] = {"pass": ok_example and not failures, "example": list(vals),
                         "cases": count, "failures": failures}

    failures = []
    for k in range(count):
        m = int(rng.integers(1, max_dim + 1))
        p = random_path(rng, m)
        q0 = random_path(rng, m)
        # re-anchor q so that it starts where p ends; q(1) = q0(1) stays invertible
        q = lambda t, q0=q0, shift=p(1.0) - q0(0.0): q0(t) + (1 - t) * shift
        a, b, c = both(p), both(q), both(concatenate(p, q))
        if not (c == (a[0] + b[0],) * 2 and a[0] == a[1] and b[0] == b[1]):
            failures.append({"case": k, "halves": [list(a), list(b)], "concatenation": list(c)})
    out["concatenation"] = {"pass": not failures, "cases": count, "failures": failures}

    failures = []
    for k in range(count):
        m = int(rng.integers(1, max_dim + 1))
        p = random_path(rng, m)
        D = _random_symmetric(rng, m, 3.0)
        q = lambda t, p=p, D=D: p(t) + math.sin(math.pi * t) * D
        flows = []
        for lam in (0.0, 0.25, 0.5, 0.75, 1.0):
            hmt = lambda t, lam=lam, p=p, q=q: (1 - lam) * p(t) + lam * q(t)
            flows.append(sfl_clutching(hmt))
        ref = sfl_endpoints(p)
        if len(set(flows)) != 1 or flows[0] != ref:
            failures.append({"case": k, "flows_along_homotopy": flows, "endpoint_flow": ref})
    out["homotopy"] = {"pass": not failures, "cases": count, "failures": failures}
    return out
