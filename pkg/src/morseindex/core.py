"""Problem model: signature matrix, curvature profiles and the family ``S_z(x)``.

A Morse-Sturm system is the pair ``(J, S)`` defining the boundary value family

    J u'' + S_t(x) u = 0,   u(0) = u(1) = 0,   S_t(x) = t^2 S(t x),

with the complexification ``S_z = S_t + i s I`` for ``z = t + i s``. Outside
``t in [0, 1]`` the family is held constant (``S_t = S_0`` for ``t < 0`` and
``S_t = S_1`` for ``t > 1``).
"""

from __future__ import annotations

import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import CubicSpline

from .errors import DerivativeUnavailableError, RejectedInputError

#: Relative asymmetry accepted on input before hard symmetrization.
SYMMETRY_TOL = 1e-6
#: Asymmetry below this is not worth reporting.
_SYMMETRY_REPORT_FLOOR = 1e-12


@dataclass(frozen=True)
class SignatureMatrix:
    """``J = diag(+1 x (n - nu), -1 x nu)``."""

    n: int
    nu: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise RejectedInputError(f"n must be a positive integer, got {self.n!r}")
        if int(self.nu) != self.nu or not 0 <= self.nu <= self.n:
            raise RejectedInputError(f"nu must lie in [0, {self.n}], got {self.nu!r}")

    @property
    def diagonal(self) -> np.ndarray:
        d = np.ones(self.n)
        d[self.n - self.nu:] = -1.0
        return d

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal)


@dataclass(frozen=True)
class ComplexParameter:
    t: float
    s: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.t) and np.isfinite(self.s)):
            raise RejectedInputError("complex parameter must be finite")

    @classmethod
    def coerce(cls, z: "ComplexParameter | complex | float") -> "ComplexParameter":
        if isinstance(z, ComplexParameter):
            return z
        z = complex(z)
        return cls(z.real, z.imag)

    @property
    def z(self) -> complex:
        return complex(self.t, self.s)


def _as_symmetric_stack(mats: ArrayLike, n: int | None = None, what: str = "matrix") -> np.ndarray:
    arr = np.asarray(mats, dtype=float)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise RejectedInputError(f"{what}: expected a list of square matrices, got shape {arr.shape}")
    if n is not None and arr.shape[1] != n:
        raise RejectedInputError(f"{what}: expected {n}x{n} matrices, got {arr.shape[1]}x{arr.shape[2]}")
    if not np.all(np.isfinite(arr)):
        raise RejectedInputError(f"{what}: entries must be finite reals")
    return arr


class CurvatureProfile(ABC):
    """A symmetric matrix-valued function ``S(x)`` on ``[0, 1]``.

    ``evaluate`` and ``derivative`` broadcast over an array of ``x`` values and
    return arrays of shape ``x.shape + (n, n)``.
    """

    kind: str = ""

    @property
    @abstractmethod
    def n(self) -> int: ...

    @abstractmethod
    def evaluate(self, x: ArrayLike) -> np.ndarray: ...

    @abstractmethod
    def derivative(self, x: ArrayLike) -> np.ndarray: ...

    @abstractmethod
    def raw_matrices(self) -> np.ndarray:
        """All stored matrices, stacked; used for symmetry validation."""

    @abstractmethod
    def symmetrized(self) -> "CurvatureProfile": ...

    @abstractmethod
    def shifted(self, eps: float) -> "CurvatureProfile":
        """The profile ``S(x) + eps * I``."""

    @abstractmethod
    def to_json(self) -> dict[str, Any]: ...


class ConstDiagProfile(CurvatureProfile):
    kind = "const_diag"

    def __init__(self, values: Sequence[float]):
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise RejectedInputError("const_diag: need at least one finite value")
        self.values = v
        self._mat = np.diag(v)

    @property
    def n(self) -> int:
        return self.values.size

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self._mat, x.shape + self._mat.shape).copy()

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + self._mat.shape)

    def raw_matrices(self):
        return self._mat[None]

    def symmetrized(self):
        return self

    def shifted(self, eps):
        return ConstDiagProfile(self.values + eps)

    def to_json(self):
        return {"type": self.kind, "values": self.values.tolist()}


class TrigProfile(CurvatureProfile):
    """Finite trigonometric polynomial with symmetric matrix coefficients.

    ``S(x) = sum_k cos[k] cos(k pi x) + sum_k sin[k] sin((k + 1) pi x)``;
    the cosine table starts at the constant term, the sine table at ``sin(pi x)``.
    """

    kind = "trig"

    def __init__(self, cos: ArrayLike = (), sin: ArrayLike = (), n: int | None = None):
        cos = np.asarray(cos, dtype=float)
        sin = np.asarray(sin, dtype=float)
        if n is None:
            for tab in (cos, sin):
                if tab.ndim == 3 and tab.shape[0]:
                    n = tab.shape[1]
                    break
        if n is None:
            raise RejectedInputError("trig: cannot infer dimension from empty coefficient tables")
        self.cos = _as_symmetric_stack(cos, n, "trig.cos") if cos.size else np.zeros((0, n, n))
        self.sin = _as_symmetric_stack(sin, n, "trig.sin") if sin.size else np.zeros((0, n, n))
        self._n = n
        self._kc = np.arange(self.cos.shape[0]) * np.pi
        self._ks = (np.arange(self.sin.shape[0]) + 1) * np.pi

    @property
    def n(self):
        return self._n

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        xa = x[..., None]
        out = np.tensordot(np.cos(xa * self._kc), self.cos, axes=(-1, 0))
        out += np.tensordot(np.sin(xa * self._ks), self.sin, axes=(-1, 0))
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        xa = x[..., None]
        out = np.tensordot(-self._kc * np.sin(xa * self._kc), self.cos, axes=(-1, 0))
        out += np.tensordot(self._ks * np.cos(xa * self._ks), self.sin, axes=(-1, 0))
        return out

    def raw_matrices(self):
        return np.concatenate([self.cos, self.sin])

    def symmetrized(self):
        sym = lambda a: 0.5 * (a + np.swapaxes(a, -1, -2))
        return TrigProfile(sym(self.cos), sym(self.sin), n=self._n)

    def shifted(self, eps):
        cos = self.cos.copy() if self.cos.shape[0] else np.zeros((1, self._n, self._n))
        cos[0] += eps * np.eye(self._n)
        return TrigProfile(cos, self.sin, n=self._n)

    def to_json(self):
        return {"type": self.kind, "cos": self.cos.tolist(), "sin": self.sin.tolist()}


class SampledProfile(CurvatureProfile):
    """Samples on a grid ``0 = x_0 < ... < x_m = 1``, natural cubic spline in between."""

    kind = "samples"

    def __init__(self, xs: ArrayLike, matrices: ArrayLike):
        xs = np.asarray(xs, dtype=float).ravel()
        mats = _as_symmetric_stack(matrices, what="samples.matrices")
        if xs.size != mats.shape[0]:
            raise RejectedInputError(f"samples: {xs.size} grid points but {mats.shape[0]} matrices")
        if xs.size < 2:
            raise RejectedInputError("samples: need at least two grid points")
        if not np.all(np.isfinite(xs)) or np.any(np.diff(xs) <= 0):
            raise RejectedInputError("samples: grid must be strictly increasing")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise RejectedInputError("samples: grid must start at 0 and end at 1")
        self.xs = xs
        self.matrices = mats
        self._spline = CubicSpline(xs, mats, axis=0, bc_type="natural")

    @property
    def n(self):
        return self.matrices.shape[1]

    def evaluate(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return self._spline(x)

    def derivative(self, x):
        if self.xs.size < 4:
            raise DerivativeUnavailableError("sampled profile needs at least 4 grid points for S'(x)")
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return self._spline(x, 1)

    def raw_matrices(self):
        return self.matrices

    def symmetrized(self):
        return SampledProfile(self.xs, 0.5 * (self.matrices + np.swapaxes(self.matrices, 1, 2)))

    def shifted(self, eps):
        return SampledProfile(self.xs, self.matrices + eps * np.eye(self.n))

    def to_json(self):
        return {"type": self.kind, "xs": self.xs.tolist(), "matrices": self.matrices.tolist()}


@dataclass(frozen=True)
class MorseSturmSystem:
    signature: SignatureMatrix
    profile: CurvatureProfile

    def __post_init__(self):
        if self.profile.n != self.signature.n:
            raise RejectedInputError(
                f"profile dimension {self.profile.n} does not match n = {self.signature.n}"
            )

    @property
    def n(self) -> int:
        return self.signature.n

    @property
    def nu(self) -> int:
        return self.signature.nu

    @property
    def J(self) -> np.ndarray:
        return self.signature.matrix

    def shifted(self, eps: float) -> "MorseSturmSystem":
        """Same signature with ``S`` replaced by ``S + eps I``."""
        return MorseSturmSystem(self.signature, self.profile.shifted(eps))

    def to_json(self) -> dict[str, Any]:
        return {"n": self.n, "nu": self.nu, "S": self.profile.to_json()}

    def digest(self) -> str:
        payload = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def clamp_t(t: ArrayLike) -> np.ndarray:
    return np.clip(np.asarray(t, dtype=float), 0.0, 1.0)


def family_S_real(system: MorseSturmSystem, t: ArrayLike, x: ArrayLike) -> np.ndarray:
    """Real part ``t^2 S(t x)`` of the family with ``t`` clamped to ``[0, 1]``.

    ``t`` and ``x`` broadcast against each other.
    """
    tc = clamp_t(t)
    x = np.asarray(x, dtype=float)
    tc, x = np.broadcast_arrays(tc, x)
    return (tc**2)[..., None, None] * system.profile.evaluate(tc * x)


def family_S(system: MorseSturmSystem, z, x: float) -> np.ndarray:
    """``S_z(x) = clamp(t)^2 S(clamp(t) x) + i s I`` as a complex symmetric matrix."""
    z = ComplexParameter.coerce(z)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    out = family_S_real(system, z.t, x).astype(complex)
    out += 1j * z.s * np.eye(system.n)
    return out


def family_S_dt(system: MorseSturmSystem, t: ArrayLike, x: ArrayLike) -> np.ndarray:
    """``d/dt [t^2 S(t x)] = 2 t S(t x) + t^2 x S'(t x)``, broadcasting over ``t``, ``x``."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ValueError("t must lie in [0, 1]")
    x = np.asarray(x, dtype=float)
    t, x = np.broadcast_arrays(t, x)
    tx = t * x
    out = (2 * t)[..., None, None] * system.profile.evaluate(tx)
    out += (t**2 * x)[..., None, None] * system.profile.derivative(tx)
    return out


@dataclass
class Validation:
    system: MorseSturmSystem
    defects: list[str] = field(default_factory=list)


def validate(system: MorseSturmSystem) -> Validation:
    """Check symmetry of the profile and return a symmetrized copy.

    Grid monotonicity and the range of ``nu`` are enforced when the profile and
    signature are constructed; anything reaching this point has passed them.
    """
    mats = system.profile.raw_matrices()
    defects = []
    if mats.size:
        asym = np.abs(mats - np.swapaxes(mats, 1, 2)).max(axis=(1, 2))
        scale = np.maximum(np.abs(mats).max(axis=(1, 2)), 1e-300)
        rel = asym / scale
        worst = int(np.argmax(rel))
        if rel[worst] > SYMMETRY_TOL:
            raise RejectedInputError(
                f"matrix {worst} is asymmetric: relative defect {rel[worst]:.3g} exceeds {SYMMETRY_TOL:g}"
            )
        for k in np.flatnonzero(asym > _SYMMETRY_REPORT_FLOOR * np.maximum(scale, 1.0)):
            defects.append(f"matrix {k}: asymmetry {asym[k]:.3g} symmetrized")
    return Validation(MorseSturmSystem(system.signature, system.profile.symmetrized()), defects)


def profile_from_json(spec: dict[str, Any], n: int) -> CurvatureProfile:
    if not isinstance(spec, dict) or "type" not in spec:
        raise RejectedInputError("S must be an object with a 'type' field")
    kind = spec["type"]
    try:
        if kind == "const_diag":
            values = spec["values"]
            if len(values) != n:
                raise RejectedInputError(f"const_diag: expected {n} values, got {len(values)}")
            return ConstDiagProfile(values)
        if kind == "trig":
            return TrigProfile(spec.get("cos", []), spec.get("sin", []), n=n)
        if kind == "samples":
            prof = SampledProfile(spec["xs"], spec["matrices"])
            if prof.n != n:
                raise RejectedInputError(f"samples: expected {n}x{n} matrices")
            return prof
    except KeyError as exc:
        raise RejectedInputError(f"{kind}: missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, RejectedInputError):
            raise
        raise RejectedInputError(f"{kind}: {exc}") from None
    raise RejectedInputError(f"unknown profile type {kind!r}")


def system_from_json(data: dict[str, Any]) -> MorseSturmSystem:
    """Parse the system JSON object and return the validated, symmetrized system."""
    if not isinstance(data, dict):
        raise RejectedInputError("system must be a JSON object")
    for key in ("n", "nu", "S"):
        if key not in data:
            raise RejectedInputError(f"missing field {key!r}")
    if not isinstance(data["n"], int) or not isinstance(data["nu"], int):
        raise RejectedInputError("n and nu must be integers")
    sig = SignatureMatrix(data["n"], data["nu"])
    system = MorseSturmSystem(sig, profile_from_json(data["S"], sig.n))
    return validate(system).system


def load_system(path) -> MorseSturmSystem:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise RejectedInputError(f"{path}: invalid JSON ({exc})") from None
    return system_from_json(data)
