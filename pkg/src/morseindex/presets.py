"""Built-in systems with closed-form indices.

Each name accepts optional comma-separated parameters after a colon, e.g.
``riemannian-const:61.68,2`` or ``flat:3,1``.
"""

from __future__ import annotations

import math

from .core import ConstDiagProfile, MorseSturmSystem, SignatureMatrix
from .errors import RejectedInputError

KAPPA = (2.5 * math.pi) ** 2


def flat(n: int = 2, nu: int = 1) -> MorseSturmSystem:
    return MorseSturmSystem(SignatureMatrix(n, nu), ConstDiagProfile([0.0] * n))


def riemannian_const(kappa: float = KAPPA, n: int = 1) -> MorseSturmSystem:
    return MorseSturmSystem(SignatureMatrix(n, 0), ConstDiagProfile([kappa] * n))


def lorentz_split(kappa: float = KAPPA) -> MorseSturmSystem:
    """``J = diag(1, -1)``, ``S = diag(kappa, -kappa)``: indices cancel, instants survive."""
    return MorseSturmSystem(SignatureMatrix(2, 1), ConstDiagProfile([kappa, -kappa]))


def multiplicity_2(kappa: float = KAPPA) -> MorseSturmSystem:
    return riemannian_const(kappa, 2)


PRESETS = {
    "flat": (flat, (int, int)),
    "riemannian-const": (riemannian_const, (float, int)),
    "lorentz-split": (lorentz_split, (float,)),
    "multiplicity-2": (multiplicity_2, (float,)),
}


def preset(spec: str) -> MorseSturmSystem:
    """Build a preset from ``name[:p1,p2,...]``."""
    name, _, params = spec.partition(":")
    if name not in PRESETS:
        raise RejectedInputError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    factory, types = PRESETS[name]
    args = [p for p in params.split(",") if p.strip()] if params else []
    if len(args) > len(types):
        raise RejectedInputError(f"preset {name} takes at most {len(types)} parameters")
    try:
        parsed = [typ(a) for typ, a in zip(types, args)]
    except ValueError as exc:
        raise RejectedInputError(f"preset {name}: {exc}") from None
    return factory(*parsed)
