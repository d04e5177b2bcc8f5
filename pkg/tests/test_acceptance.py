"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed in the
"acceptance criteria" section at the end of the pytest run.
"""

import math

import numpy as np
import pytest

from morseindex import presets
from morseindex import specflow as sf
from morseindex.conjugate import conjugate_index
from morseindex.propagator import propagate
from morseindex.verify import random_suite
from morseindex.winding import arctan_normalization_check

from conftest import PRESET_INDEX, PRESET_NAMES, record_criterion, scalar_b

SUITE_SEED = 2024
SUITE_SIZE = 50


@pytest.fixture(scope="module")
def suite():
    return random_suite(SUITE_SIZE, max_n=4, seed=SUITE_SEED)


def test_criterion_1_presets(preset_reports):
    got = {name: (preset_reports(name).mu_spec, preset_reports(name).mu_con) for name in PRESET_NAMES}
    ok = all(got[n] == (PRESET_INDEX[n], PRESET_INDEX[n]) for n in PRESET_NAMES)
    detail = ", ".join(f"{n}: spec={s} con={c}" for n, (s, c) in got.items())
    record_criterion(1, ok, "mu_spec = mu_con on presets", detail)
    assert ok


def test_criterion_2_randomized(suite):
    cases = suite["cases"]
    agree = sum(c["mu_spec"] is not None and c["mu_spec"] == c["mu_con"] for c in cases)
    regular = [c for c in cases if c.get("crossings_regular")]
    cross_agree = sum(c["mu_spec_crossing"] == c["mu_spec"] for c in regular)
    ok = (suite["accepted"] == SUITE_SIZE and agree == SUITE_SIZE
          and cross_agree == len(regular))
    record_criterion(2, ok, "randomized inertia vs winding, inertia vs crossing forms",
                     f"{agree}/{suite['accepted']} winding agreement, {cross_agree}/{len(regular)} "
                     f"regular-crossing agreement, discard rate {suite['discard_rate']:.3f}, seed {SUITE_SEED}")
    assert suite["accepted"] == SUITE_SIZE
    assert agree == SUITE_SIZE
    assert cross_agree == len(regular)


def test_criterion_3_classical_sum(preset_reports, suite):
    riem = [(n, preset_reports(n)) for n in PRESET_NAMES if presets.preset(n).nu == 0]
    sums_ok = all(r.conjugate.classical_sum == r.mu_con for _, r in riem)
    rnd = [c for c in suite["cases"] if c["nu"] == 0]
    rnd_ok = all(c["classical_sum"] == c["mu_con"] for c in rnd)
    ts = [c.t for c in preset_reports("riemannian-const").conjugate.instants]
    loc_err = max(abs(ts[0] - 0.4), abs(ts[1] - 0.8)) if len(ts) == 2 else math.inf
    ok = sums_ok and rnd_ok and len(ts) == 2 and loc_err < 1e-8
    record_criterion(3, ok, "Riemannian mu_con = sum of multiplicities; scalar instants",
                     f"{len(riem)} presets + {len(rnd)} random nu=0 cases, instant error {loc_err:.2e}")
    assert ok


def test_criterion_4_riesz_sign(preset_reports, suite):
    pre = all(preset_reports(n).spectral.sfl_L == -preset_reports(n).spectral.mu_spec_inertia
              for n in PRESET_NAMES)
    rnd = all(c["sfl_L"] == -c["mu_spec"] for c in suite["cases"])
    worst = 0.0
    rng = np.random.default_rng(0)
    systems = [presets.preset(n) for n in PRESET_NAMES]
    for k in range(5):
        system = systems[k % len(systems)]
        t = float(rng.uniform())
        u, v = rng.standard_normal((2, 4, system.n))
        worst = max(worst, sf.integration_by_parts_check(system, t, u, v)["abs_diff"])
    ok = pre and rnd and worst < 1e-8
    record_criterion(4, ok, "sfl(L) = -sfl(A); pointwise integral identity",
                     f"presets {pre}, random suite {rnd}, max |diff| {worst:.2e}")
    assert ok


def test_criterion_5_offaxis_nonvanishing(preset_reports):
    checks = {n: preset_reports(n).checks["offaxis_nonvanishing"] for n in PRESET_NAMES}
    ok = all(c["samples"] == 200 and c["violations"] == 0 for c in checks.values())
    worst = min(c["min_relative"] for c in checks.values())
    record_criterion(5, ok, "no off-axis zeros of det b_z (200 samples per preset, 1e-10)",
                     f"smallest relative modulus {worst:.3e}")
    assert ok


def test_criterion_6_symplectic_and_rk4(preset_reports):
    sym = {n: preset_reports(n).checks["symplectic"] for n in PRESET_NAMES}
    worst = max(c["max_defect"] for c in sym.values())
    sym_ok = all(c["samples"] == 20 for c in sym.values()) and worst < 1e-8
    system = presets.preset("riemannian-const")
    z = 0.5 + 0.5j
    e1 = abs(propagate(system, z, steps=100).b_end[0, 0] - scalar_b(z))
    e2 = abs(propagate(system, z, steps=200).b_end[0, 0] - scalar_b(z))
    factor = e1 / e2
    ok = sym_ok and 14.0 <= factor <= 18.0
    record_criterion(6, ok, "symplectic defect < 1e-8 (2000 steps); RK4 factor in [14, 18]",
                     f"max defect {worst:.2e}, convergence factor {factor:.2f}")
    assert ok


def test_criterion_7_clutching_reductions(preset_reports):
    rows = {n: preset_reports(n).checks["clutching_reduction"] for n in PRESET_NAMES}
    ok = all(r["winding_reduced_clutching"] == r["winding_transpose"] == preset_reports(n).mu_con
             for n, r in rows.items())
    detail = ", ".join(f"{n}: {r['winding_reduced_clutching']}/{r['winding_transpose']}" for n, r in rows.items())
    record_criterion(7, ok, "winding(det N~) = winding(det b^T) = winding(det b)", detail)
    assert ok


def test_criterion_8_axioms():
    res = sf.axiom_suite(count=20, seed=0)
    arctan = arctan_normalization_check()
    ok = all(v["pass"] for v in res.values()) and res["normalization"]["flows"] == [1, 1] and arctan == 1
    record_criterion(8, ok, "spectral-flow axioms on 20 random paths each",
                     ", ".join(f"{k}={'pass' if v['pass'] else 'FAIL'}" for k, v in res.items()))
    assert ok


def test_criterion_9_robustness():
    problems = []
    for name in PRESET_NAMES:
        system = presets.preset(name)
        mus = {h: conjugate_index(system, contour_height=h).mu_con for h in (0.1, 0.25, 0.5, 1.0)}
        if len(set(mus.values())) != 1:
            problems.append(f"{name} heights {mus}")
        diffs = {N: sf.spectral_flow_inertia(system, sf.GalerkinConfig(N)).rows[0].diff
                 for N in (64, 128, 256)}
        if len(set(diffs.values())) != 1:
            problems.append(f"{name} Galerkin {diffs}")
        spec = {d: (sf.spectral_index_inertia(system, delta=d),
                    sf.spectral_index_crossing(system, delta=d).value) for d in (0.0, 1e-4, 1e-3)}
        if len({v for pair in spec.values() for v in pair}) != 1:
            problems.append(f"{name} delta {spec}")
    ok = not problems
    record_criterion(9, ok, "contour height, Galerkin N and delta do not change the indices",
                     "; ".join(problems) or "4 presets x 4 heights x 3 N x 3 delta")
    assert ok
