import math

import numpy as np
import pytest

from morseindex import presets
from morseindex.conjugate import (conjugate_index, endpoint_check, endpoint_margin,
                                  find_conjugate_instants, offaxis_nonvanishing_check, scan_real_axis)
from morseindex.core import MorseSturmSystem, SignatureMatrix, TrigProfile
from morseindex.errors import EndpointConjugateError
from morseindex.propagator import det_b, shooting_path

from conftest import KAPPA, scalar_b


def test_endpoint_check_examples():
    assert endpoint_check(presets.preset("flat"))
    assert not endpoint_check(presets.preset(f"riemannian-const:{math.pi ** 2!r}"))
    assert endpoint_check(presets.preset("riemannian-const"))
    assert endpoint_margin(presets.preset(f"riemannian-const:{math.pi ** 2!r}")) < 1e-8


@pytest.mark.parametrize("n,nu", [(1, 0), (2, 1), (3, 3)])
def test_flat_has_no_instants(n, nu):
    assert find_conjugate_instants(presets.preset(f"flat:{n},{nu}")) == []


def test_scalar_instants():
    inst = find_conjugate_instants(presets.preset("riemannian-const"))
    assert [c.multiplicity for c in inst] == [1, 1]
    assert abs(inst[0].t - 0.4) < 1e-8 and abs(inst[1].t - 0.8) < 1e-8


@pytest.mark.parametrize("name", ["multiplicity-2", "lorentz-split"])
def test_double_instants(name):
    inst = find_conjugate_instants(presets.preset(name))
    assert [c.multiplicity for c in inst] == [2, 2]
    assert abs(inst[0].t - 0.4) < 1e-8 and abs(inst[1].t - 0.8) < 1e-8
    for c in inst:
        np.testing.assert_allclose(c.kernel_basis @ c.kernel_basis.T, np.eye(2), atol=1e-12)


def test_kernel_vector_gives_jacobi_field():
    # a coupled system: the instant comes from the scan, the field from the kernel
    rng = np.random.default_rng(13)
    sym = lambda a: 0.5 * (a + np.swapaxes(a, -1, -2))
    system = MorseSturmSystem(SignatureMatrix(3, 1),
                              TrigProfile(sym(rng.uniform(-40, 40, (3, 3, 3))),
                                          sym(rng.uniform(-40, 40, (2, 3, 3)))))
    inst = find_conjugate_instants(system)
    assert inst
    for c in inst:
        _, path = shooting_path(system, c.t)
        u = path.real @ c.kernel_basis.T  # Jacobi fields, shape (x, n, m)
        assert np.abs(u[-1]).max() < 1e-6 * np.abs(u).max()


def test_scan_detects_sign_changes():
    scan = scan_real_axis(presets.preset("riemannian-const"))
    np.testing.assert_allclose(scan.det, scalar_b(scan.t).real, atol=1e-8)


def test_conjugate_index_presets():
    expect = {"flat": 0, "riemannian-const": 2, "multiplicity-2": 4, "lorentz-split": 0}
    for name, mu in expect.items():
        rep = conjugate_index(presets.preset(name))
        assert rep.mu_con == mu
        if presets.preset(name).nu == 0:
            assert rep.classical_sum == mu
    assert conjugate_index(presets.preset("lorentz-split")).classical_sum == 4


def test_conjugate_index_rejects_endpoint():
    with pytest.raises(EndpointConjugateError):
        conjugate_index(presets.preset(f"riemannian-const:{math.pi ** 2!r}"))


def test_offaxis_examples():
    flat = offaxis_nonvanishing_check(presets.preset("flat"), 100)
    assert flat["ok"] and flat["min_modulus"] > 0
    assert abs(det_b(presets.preset("riemannian-const"), [0.4 + 0.3j])[0]) > 1e-3
    assert abs(scalar_b(0.4 + 0.3j)) > 1e-3
    assert offaxis_nonvanishing_check(presets.preset("lorentz-split"), 200)["violations"] == 0


def test_report_json_fields():
    d = conjugate_index(presets.preset("riemannian-const")).to_json()
    assert d["mu_con"] == 2 and d["endpoint_ok"]
    assert {"t", "multiplicity", "kernel_basis", "det_residual"} <= set(d["instants"][0])


def test_split_instants_in_one_scan_cell():
    # with a shift the double instants split into simple pairs ~2e-5 apart
    delta = 1e-3
    inst = find_conjugate_instants(presets.preset("lorentz-split"), delta=delta)
    expect = sorted(math.sqrt(((k * math.pi) ** 2 + sgn * delta) / KAPPA)
                    for k in (1, 2) for sgn in (-1, 1))
    assert [c.multiplicity for c in inst] == [1, 1, 1, 1]
    np.testing.assert_allclose([c.t for c in inst], expect, atol=1e-8)
