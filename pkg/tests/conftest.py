import math

import numpy as np
import pytest

from morseindex import presets
from morseindex.verify import RunConfig, verify

KAPPA = (2.5 * math.pi) ** 2
PRESET_NAMES = ("flat", "riemannian-const", "multiplicity-2", "lorentz-split")
# closed-form index of each preset
PRESET_INDEX = {"flat": 0, "riemannian-const": 2, "multiplicity-2": 4, "lorentz-split": 0}


def scalar_b(z, kappa=KAPPA, x=1.0):
    """``sin(w x) / w`` with ``w^2 = t^2 kappa + i s``, ``t`` clamped to ``[0, 1]``."""
    z = np.asarray(z, dtype=complex)
    t = np.clip(z.real, 0.0, 1.0)
    w = np.sqrt(t * t * kappa + 1j * z.imag + 0j)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.sin(w * x) / w
    return np.where(w == 0, x, out)


@pytest.fixture(scope="session")
def preset_reports():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = verify(presets.preset(name), RunConfig(axioms=False))
        return cache[name]
    return get


# one pass/fail line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, title: str, detail: str = "") -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {title}" + (
        f" ({detail})" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
