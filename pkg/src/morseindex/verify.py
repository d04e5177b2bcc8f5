"""End-to-end verification: both indices, their equality, and the supporting identities."""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Any

import numpy as np

from . import conjugate as conj
from . import propagator as prop
from . import specflow as sf
from .core import MorseSturmSystem, SignatureMatrix, TrigProfile
from .errors import CrossingIrregularError, EndpointConjugateError, MorseIndexError, NumericalFailure
from .winding import winding_number

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_ENDPOINT, EXIT_NUMERICAL = 0, 1, 2, 3
SYMPLECTIC_TOL = 1e-8
IBP_TOL = 1e-8


@dataclass(frozen=True)
class RunConfig:
    contour_height: float = 0.25
    ode_steps: int = prop.DEFAULT_STEPS
    galerkin_N: int = 64
    delta: float = 0.0
    method: str = "both"  # inertia | crossing | both
    seed: int = 0
    grid_size: int = conj.DEFAULT_GRID
    offaxis_samples: int = 200
    symplectic_samples: int = 20
    clutching_check: bool = True
    axioms: bool = False
    axiom_count: int = 20

    def __post_init__(self):
        if self.method not in ("inertia", "crossing", "both"):
            raise ValueError(f"method must be inertia, crossing or both, got {self.method!r}")
        if not self.contour_height > 0:
            raise ValueError("contour height must be positive")
        if self.ode_steps < prop.MIN_STEPS:
            raise ValueError(f"ode steps must be >= {prop.MIN_STEPS}")
        if self.galerkin_N < 8:
            raise ValueError("Galerkin N must be >= 8")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")

    @property
    def galerkin(self) -> sf.GalerkinConfig:
        return sf.GalerkinConfig(self.galerkin_N)


@dataclass
class SpectralReport:
    mu_spec_inertia: int | None
    mu_spec_crossing: int | None
    sfl_L: int | None
    delta_used: float | None
    N_used: int | None
    crossings: list[sf.CrossingDatum] = field(default_factory=list)
    inertia_rows: list[sf.InertiaRow] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "mu_spec_inertia": self.mu_spec_inertia,
            "mu_spec_crossing": self.mu_spec_crossing,
            "sfl_L": self.sfl_L,
            "delta_used": self.delta_used,
            "N_used": self.N_used,
            "crossings": [c.to_json() for c in self.crossings],
            "inertia_table": [
                {"N": r.N, "n_minus_0": r.n_minus_0, "n_minus_1": r.n_minus_1, "diff": r.diff}
                for r in self.inertia_rows
            ],
            "notes": list(self.notes),
        }


@dataclass
class IndexReport:
    system_digest: str
    status: str  # verified | theorem_failed | checks_failed | endpoint_conjugate | numerical_failure
    mu_spec: int | None = None
    mu_con: int | None = None
    theorem_holds: bool = False
    conjugate: conj.ConjugateReport | None = None
    spectral: SpectralReport | None = None
    checks: dict[str, Any] = field(default_factory=dict)
    config_echo: dict[str, Any] = field(default_factory=dict)
    error: str | None = None

    @property
    def exit_code(self) -> int:
        return {
            "verified": EXIT_OK,
            "endpoint_conjugate": EXIT_ENDPOINT,
            "numerical_failure": EXIT_NUMERICAL,
        }.get(self.status, EXIT_NUMERICAL)

    def to_json(self) -> dict:
        return {
            "system_digest": self.system_digest,
            "status": self.status,
            "exit_code": self.exit_code,
            "mu_spec": self.mu_spec,
            "mu_con": self.mu_con,
            "theorem_holds": self.theorem_holds,
            "conjugate": None if self.conjugate is None else self.conjugate.to_json(),
            "spectral": None if self.spectral is None else self.spectral.to_json(),
            "checks": self.checks,
            "config_echo": self.config_echo,
            "error": self.error,
        }

    def dumps(self) -> str:
        return dumps(self.to_json())


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def spectral_report(system: MorseSturmSystem, config: RunConfig = RunConfig()) -> SpectralReport:
    rep = SpectralReport(None, None, None, None, None)
    if config.method in ("inertia", "both"):
        flow = sf.spectral_flow_inertia(system, config.galerkin, config.delta)
        rep.mu_spec_inertia = flow.value
        rep.inertia_rows = flow.rows
        rep.N_used = flow.rows[-1].N
        rep.sfl_L = sf.riesz_form_flow(system, config.galerkin, config.delta)
    if config.method in ("crossing", "both"):
        try:
            cr = sf.spectral_index_crossing(system, config.delta, config.ode_steps, config.grid_size)
        except CrossingIrregularError as exc:
            if config.method == "crossing":
                raise
            rep.notes.append(f"crossing method unavailable: {exc}")
        else:
            rep.mu_spec_crossing = cr.value
            rep.crossings = cr.crossings
            rep.delta_used = cr.delta_used
    if rep.delta_used is None:
        rep.delta_used = config.delta
    return rep


def symplectic_check(system: MorseSturmSystem, samples: int = 20, seed: int = 0,
                     steps: int = prop.DEFAULT_STEPS) -> dict:
    """Defect of ``Psi_z(1)^T sigma Psi_z(1) = sigma`` and ``det Psi_z(1) = 1`` at random ``z``.

    The relative defect divides by ``max(1, max|Psi|^2)``; systems with strong
    exponential growth have large ``Psi`` and a proportionally large absolute defect.
    """
    rng = np.random.default_rng(seed)
    z = rng.uniform(-0.25, 1.25, samples) + 1j * rng.uniform(-1.0, 1.0, samples)
    Psi = prop.propagate_many(system, z, steps)
    defects = np.array([prop.symplectic_defect(P) for P in Psi])
    size = np.maximum(1.0, np.abs(Psi).max(axis=(1, 2)) ** 2)
    det_err = np.abs(np.linalg.det(Psi) - 1.0)
    rel = defects / size
    return {
        "samples": samples,
        "max_defect": float(defects.max()),
        "max_relative_defect": float(rel.max()),
        "max_det_error": float(det_err.max()),
        "ok": bool(rel.max() < SYMPLECTIC_TOL and (det_err / size).max() < SYMPLECTIC_TOL),
    }


def clutching_check(system: MorseSturmSystem, report: conj.ConjugateReport) -> dict:
    """Windings of ``det`` of the reduced clutching matrix and of ``det b_z^T`` versus ``mu_con``."""
    steps = report.ode_steps
    contour = conj.contour_for(system, report.contour_height, report.instants)
    w_tilde = winding_number(
        lambda z: np.linalg.det(prop.clutching_matrix(prop.propagate_many(system, z, steps))), contour
    ).winding
    w_transpose = winding_number(
        lambda z: np.linalg.det(np.swapaxes(prop.shooting_many(system, z, steps), 1, 2)), contour
    ).winding
    return {
        "winding_reduced_clutching": w_tilde,
        "winding_transpose": w_transpose,
        "ok": w_tilde == report.mu_con and w_transpose == report.mu_con,
    }


def integration_by_parts_checks(system: MorseSturmSystem, seed: int = 0, count: int = 5) -> dict:
    """``<L_t u, v> = -<A_t u, v>`` on ``count`` random ``(u, v, t)``.

    ``u`` and ``v`` are sums of the first four sine modes with standard normal
    vector coefficients.
    """
    rng = np.random.default_rng(seed)
    n = system.n
    rows = []
    for _ in range(count):
        t = float(rng.uniform(0.0, 1.0))
        u, v = rng.standard_normal((2, 4, n))
        rows.append(sf.integration_by_parts_check(system, t, u, v))
    worst = max(r["abs_diff"] for r in rows) if rows else 0.0
    return {"cases": rows, "max_abs_diff": worst, "ok": worst < IBP_TOL}


def verify(system: MorseSturmSystem, config: RunConfig = RunConfig()) -> IndexReport:
    """Compute both indices and every diagnostic; never raises on numerical trouble.

    Failures are recorded in ``status`` and ``error`` so that partial results
    survive into the report.
    """
    report = IndexReport(system.digest(), "numerical_failure", config_echo=asdict(config))
    checks = report.checks
    try:
        margin = conj.endpoint_margin(system, config.ode_steps)
        checks["endpoint"] = {"relative_margin": margin, "ok": margin > conj.ENDPOINT_TOL}
        if margin <= conj.ENDPOINT_TOL:
            raise EndpointConjugateError(
                f"t = 1 is a conjugate instant (|det b_1| relative margin {margin:.3g}); "
                "both indices are undefined"
            )
        report.conjugate = conj.conjugate_index(system, config.contour_height, config.ode_steps,
                                                config.grid_size)
        report.mu_con = report.conjugate.mu_con
        report.spectral = spectral_report(system, config)
        sp = report.spectral
        report.mu_spec = sp.mu_spec_crossing if config.method == "crossing" else sp.mu_spec_inertia
        report.theorem_holds = report.mu_spec == report.mu_con

        if sp.mu_spec_inertia is not None and sp.mu_spec_crossing is not None:
            checks["method_agreement"] = {
                "inertia": sp.mu_spec_inertia,
                "crossing": sp.mu_spec_crossing,
                "ok": sp.mu_spec_inertia == sp.mu_spec_crossing,
            }
        if sp.sfl_L is not None:
            checks["riesz_sign_relation"] = {
                "sfl_L": sp.sfl_L,
                "sfl_A": sp.mu_spec_inertia,
                "ok": sp.sfl_L == -sp.mu_spec_inertia,
            }
        checks["integration_by_parts"] = integration_by_parts_checks(system, config.seed)
        if system.nu == 0:
            checks["classical_sum"] = {
                "sum_multiplicities": report.conjugate.classical_sum,
                "mu_con": report.mu_con,
                "ok": report.conjugate.classical_sum == report.mu_con,
            }
        checks["offaxis_nonvanishing"] = conj.offaxis_nonvanishing_check(
            system, config.offaxis_samples, config.seed, config.ode_steps)
        checks["symplectic"] = symplectic_check(system, config.symplectic_samples, config.seed,
                                                config.ode_steps)
        if config.clutching_check:
            checks["clutching_reduction"] = clutching_check(system, report.conjugate)
        if config.axioms:
            axioms = sf.axiom_suite(config.axiom_count, config.seed)
            checks["axiom_suite"] = {"ok": all(a["pass"] for a in axioms.values()), "axioms": axioms}
    except EndpointConjugateError as exc:
        report.status = "endpoint_conjugate"
        report.error = str(exc)
        return report
    except (NumericalFailure, MorseIndexError) as exc:
        report.status = "numerical_failure"
        report.error = f"{type(exc).__name__}: {exc}"
        return report

    if not report.theorem_holds:
        report.status = "theorem_failed"
    elif not all(c.get("ok", True) for c in checks.values()):
        report.status = "checks_failed"
    else:
        report.status = "verified"
    return report


# ---------------------------------------------------------------------------
# Randomized verification

def random_system(rng: np.random.Generator, max_n: int = 4, degree: int = 3,
                  bound: float = 40.0) -> MorseSturmSystem:
    """Trig-polynomial system: random ``n <= max_n``, ``nu``, degree ``<= degree``,
    coefficient entries uniform in ``[-bound, bound]`` (then symmetrized)."""
    n = int(rng.integers(1, max_n + 1))
    nu = int(rng.integers(0, n + 1))
    d = int(rng.integers(0, degree + 1))
    sym = lambda a: 0.5 * (a + np.swapaxes(a, -1, -2))
    cos = sym(rng.uniform(-bound, bound, (d + 1, n, n)))
    sin = sym(rng.uniform(-bound, bound, (d, n, n)))
    return MorseSturmSystem(SignatureMatrix(n, nu), TrigProfile(cos, sin, n=n))


def _suite_case(system: MorseSturmSystem, config: RunConfig, perturb: float | None):
    rep = verify(system, config)
    case = {
        "n": system.n,
        "nu": system.nu,
        "digest": rep.system_digest,
        "status": rep.status,
        "mu_spec": rep.mu_spec,
        "mu_con": rep.mu_con,
        "theorem_holds": rep.theorem_holds,
        "error": rep.error,
    }
    if rep.spectral is not None:
        case["mu_spec_crossing"] = rep.spectral.mu_spec_crossing
        case["sfl_L"] = rep.spectral.sfl_L
        case["crossings_regular"] = (rep.spectral.mu_spec_crossing is not None
                                     and all(c.regular for c in rep.spectral.crossings))
    if rep.conjugate is not None:
        case["classical_sum"] = rep.conjugate.classical_sum
    for name in ("offaxis_nonvanishing", "symplectic", "integration_by_parts"):
        if name in rep.checks:
            c = rep.checks[name]
            case[name] = {k: c[k] for k in c if k in
                          ("ok", "min_relative", "max_relative_defect", "max_abs_diff")}
    if perturb is not None:
        prep = verify(system.shifted(perturb), config)
        case["perturbed"] = {"mu_spec": prep.mu_spec, "mu_con": prep.mu_con, "status": prep.status}
        case["perturbation_invariant"] = prep.mu_spec == rep.mu_spec and prep.mu_con == rep.mu_con
    return case, rep


def random_suite(count: int = 50, max_n: int = 4, seed: int = 0, config: RunConfig | None = None,
                 perturb: float | None = None, min_margin: float = 1e-2, keep_reports: bool = False,
                 workers: int = 1) -> dict:
    """Verify ``count`` accepted random systems.

    Candidates whose endpoint margin is below ``min_margin`` are discarded and
    replaced (at most ``20 * count`` draws). With ``perturb = eps`` each system
    is also verified after ``S -> S + eps I`` and the indices compared pairwise.
    ``workers > 1`` verifies the accepted systems in a process pool.
    """
    if max_n > 4 or count > 200:
        raise ValueError("desk scale: max_n <= 4 and count <= 200")
    config = config or RunConfig(clutching_check=False, offaxis_samples=50, symplectic_samples=5)
    rng = np.random.default_rng(seed)
    systems, margins = [], []
    drawn = discarded = 0
    while len(systems) < count and drawn < 20 * max(count, 1):
        system = random_system(rng, max_n)
        drawn += 1
        margin = conj.endpoint_margin(system, config.ode_steps)
        if margin < min_margin:
            discarded += 1
            continue
        systems.append(system)
        margins.append(margin)

    # candidates are drawn sequentially so the accepted set depends on the seed only
    job = partial(_suite_case, config=config, perturb=perturb)
    if workers > 1 and len(systems) > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(job, systems))
    else:
        results = [job(s) for s in systems]
    cases, reports = [], []
    for k, ((case, rep), margin) in enumerate(zip(results, margins)):
        cases.append({"index": k, "endpoint_margin": margin, **case})
        if keep_reports:
            reports.append(rep)

    def worst(key, sub):
        vals = [c[key][sub] for c in cases if key in c and c[key].get(sub) is not None]
        return None if not vals else (min(vals) if sub == "min_relative" else max(vals))

    summary = {
        "seed": seed,
        "requested": count,
        "accepted": len(cases),
        "drawn": drawn,
        "discarded": discarded,
        "discard_rate": discarded / drawn if drawn else 0.0,
        "theorem_pass": sum(1 for c in cases if c["theorem_holds"]),
        "theorem_fail": sum(1 for c in cases if not c["theorem_holds"]),
        "status_counts": {s: sum(1 for c in cases if c["status"] == s)
                          for s in sorted({c["status"] for c in cases})},
        "worst": {
            "offaxis_min_relative": worst("offaxis_nonvanishing", "min_relative"),
            "symplectic_max_relative_defect": worst("symplectic", "max_relative_defect"),
            "integration_by_parts_max_abs_diff": worst("integration_by_parts", "max_abs_diff"),
        },
        "config_echo": asdict(config),
        "cases": cases,
    }
    if perturb is not None:
        summary["perturbation"] = {
            "eps": perturb,
            "invariant": sum(1 for c in cases if c.get("perturbation_invariant")),
            "changed": sum(1 for c in cases if not c.get("perturbation_invariant")),
        }
    if keep_reports:
        summary["_reports"] = reports
    return summary


# ---------------------------------------------------------------------------
# Trace files

def emit_trace(report: IndexReport, trace_dir) -> dict[str, str]:
    """Write contour trace, real-axis scan, inertia table and the report into ``trace_dir``."""
    out = Path(trace_dir)
    os.makedirs(out, exist_ok=True)
    written = {}
    if report.conjugate is not None and report.conjugate.trace is not None:
        p = out / "contour_trace.csv"
        report.conjugate.trace.write_csv(p)
        written["contour"] = str(p)
    if report.conjugate is not None and report.conjugate.scan is not None:
        p = out / "real_axis_scan.csv"
        scan = report.conjugate.scan
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "det_b_t", "smallest_singular_value"])
            for row in zip(scan.t, scan.det, scan.smallest_sv):
                w.writerow([repr(float(v)) for v in row])
        written["scan"] = str(p)
    if report.spectral is not None and report.spectral.inertia_rows:
        p = out / "inertia_table.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "n_minus_0", "n_minus_1", "diff"])
            for r in report.spectral.inertia_rows:
                w.writerow([r.N, r.n_minus_0, r.n_minus_1, r.diff])
        written["inertia"] = str(p)
    p = out / "report.json"
    p.write_text(report.dumps())
    written["report"] = str(p)
    return written
