import csv
import json
import math

import numpy as np
import pytest

from morseindex import presets
from morseindex.verify import (EXIT_ENDPOINT, EXIT_OK, RunConfig, emit_trace, random_suite,
                               random_system, verify)

from conftest import PRESET_INDEX, PRESET_NAMES


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_verify(preset_reports, name):
    rep = preset_reports(name)
    assert rep.status == "verified" and rep.exit_code == EXIT_OK
    assert rep.mu_spec == rep.mu_con == PRESET_INDEX[name]
    assert rep.theorem_holds
    assert all(c["ok"] for c in rep.checks.values())


def test_scalar_report_instants(preset_reports):
    rep = preset_reports("riemannian-const")
    ts = [c.t for c in rep.conjugate.instants]
    np.testing.assert_allclose(ts, [0.4, 0.8], atol=1e-8)


def test_lorentz_report_nonempty_instants(preset_reports):
    rep = preset_reports("lorentz-split")
    assert rep.mu_con == 0 and len(rep.conjugate.instants) == 2


def test_report_is_strict_json(preset_reports):
    text = preset_reports("multiplicity-2").dumps()
    data = json.loads(text)
    assert data["theorem_holds"] is True
    assert data["config_echo"]["seed"] == 0
    assert len(data["system_digest"]) == 64


def test_endpoint_conjugate_status():
    rep = verify(presets.preset(f"riemannian-const:{math.pi ** 2!r}"))
    assert rep.status == "endpoint_conjugate" and rep.exit_code == EXIT_ENDPOINT
    assert rep.mu_spec is None and "conjugate instant" in rep.error


def test_deterministic_report():
    cfg = RunConfig(offaxis_samples=20, symplectic_samples=4, seed=5)
    a = verify(presets.preset("lorentz-split"), cfg).dumps()
    b = verify(presets.preset("lorentz-split"), cfg).dumps()
    assert a == b


def test_run_config_validation():
    for kw in ({"method": "x"}, {"contour_height": 0}, {"ode_steps": 4}, {"galerkin_N": 2}, {"delta": -1}):
        with pytest.raises(ValueError):
            RunConfig(**kw)


def test_theorem_holds_iff_equal(preset_reports):
    for name in PRESET_NAMES:
        rep = preset_reports(name)
        assert rep.theorem_holds == (rep.mu_spec == rep.mu_con)


def test_emit_trace(tmp_path, preset_reports):
    flat = emit_trace(preset_reports("flat"), tmp_path / "flat")
    with open(flat["contour"]) as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["re_z", "im_z", "re_f", "im_f", "cum_arg"]
    assert abs(float(rows[-1]["cum_arg"])) < 1e-6

    out = emit_trace(preset_reports("riemannian-const"), tmp_path / "scalar")
    with open(out["contour"]) as fh:
        rows = list(csv.DictReader(fh))
    assert abs(float(rows[-1]["cum_arg"]) - 4 * math.pi) < 1e-6
    with open(out["scan"]) as fh:
        scan = list(csv.DictReader(fh))
    assert list(scan[0]) == ["t", "det_b_t", "smallest_singular_value"]
    with open(out["inertia"]) as fh:
        table = list(csv.DictReader(fh))
    assert list(table[0]) == ["N", "n_minus_0", "n_minus_1", "diff"]
    assert len({r["diff"] for r in table}) == 1
    assert json.loads(open(out["report"]).read())["mu_con"] == 2


def test_emit_trace_unwritable(tmp_path, preset_reports):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_trace(preset_reports("flat"), blocker / "sub")


def test_random_system_shape():
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = random_system(rng, 4)
        assert 1 <= s.n <= 4 and 0 <= s.nu <= s.n
        m = s.profile.raw_matrices()
        assert np.abs(m).max() <= 40 and m.shape[0] <= 7


def test_random_suite_empty():
    s = random_suite(0, 4, seed=1)
    assert s["accepted"] == 0 and s["cases"] == [] and s["theorem_fail"] == 0


def test_random_suite_limits():
    with pytest.raises(ValueError):
        random_suite(1, 5)
    with pytest.raises(ValueError):
        random_suite(201, 2)


@pytest.mark.slow
def test_random_suite_small_n():
    s = random_suite(50, 2, seed=3, config=RunConfig(method="inertia", clutching_check=False,
                                                     offaxis_samples=10, symplectic_samples=2))
    assert s["accepted"] == 50
    assert s["theorem_pass"] == 50


def test_random_suite_perturbation_small():
    s = random_suite(4, 3, seed=9, perturb=1e-4,
                     config=RunConfig(method="inertia", clutching_check=False, offaxis_samples=10,
                                      symplectic_samples=2))
    assert s["perturbation"]["changed"] == 0


def test_random_suite_deterministic():
    cfg = RunConfig(method="inertia", clutching_check=False, offaxis_samples=5, symplectic_samples=2)
    a = random_suite(3, 2, seed=4, config=cfg)
    b = random_suite(3, 2, seed=4, config=cfg)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


@pytest.mark.slow
def test_random_suite_perturbation_invariance():
    cfg = RunConfig(method="inertia", clutching_check=False, offaxis_samples=10, symplectic_samples=2)
    s = random_suite(50, 4, seed=17, perturb=1e-4, config=cfg, min_margin=1e-2)
    assert s["accepted"] == 50
    assert s["perturbation"]["changed"] == 0, [c for c in s["cases"] if not c["perturbation_invariant"]]
    assert all(c["endpoint_margin"] > 1e-2 for c in s["cases"])


def test_random_suite_workers_match_sequential():
    cfg = RunConfig(method="inertia", clutching_check=False, offaxis_samples=5, symplectic_samples=2)
    a = random_suite(2, 2, seed=6, config=cfg)
    b = random_suite(2, 2, seed=6, config=cfg, workers=2)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
