import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morseindex import presets
from morseindex.errors import ContourDegenerateError
from morseindex.propagator import clutching_matrix, propagate_many, shooting_many
from morseindex.winding import (Contour, arctan_normalization_check, chern_of_clutching,
                                winding_number)

from conftest import scalar_b


def test_simple_zero():
    assert winding_number(lambda z: z - 0.5, Contour(0.5)).winding == 1


def test_constant():
    assert winding_number(lambda z: np.full(z.shape, 7.0 + 0j)).winding == 0


def test_multiple_zeros():
    f = lambda z: (z - 0.2) ** 2 * (z - 0.9)
    assert winding_number(f, Contour(0.25)).winding == 3


def test_pole_and_exterior_zero():
    assert winding_number(lambda z: 1 / (z - 0.5)).winding == -1
    assert winding_number(lambda z: z - 3.0).winding == 0
    assert winding_number(lambda z: np.exp(40j * z)).winding == 0


def test_trace_is_closed_and_consistent():
    tr = winding_number(lambda z: (z - 0.3) * (z - 0.6), Contour(0.5))
    assert tr.points[0] == tr.points[-1]
    assert tr.cum_arg[0] == 0.0
    assert abs(tr.cum_arg[-1] - 4 * np.pi) < 1e-6
    steps = np.angle(tr.values[1:] / tr.values[:-1])
    assert np.abs(steps).max() < np.pi / 2


def test_degenerate_contour():
    with pytest.raises(ContourDegenerateError):
        winding_number(lambda z: z - (1.25 + 0.25j), Contour(0.25))


def test_contour_validation():
    with pytest.raises(ValueError):
        Contour(0.0)
    with pytest.raises(ValueError):
        Contour(0.5, left=1.0, right=1.0)


def test_contour_samples_counterclockwise_with_anchors():
    c = Contour(0.25, initial_samples=32, anchors=(0.4, 0.41, 0.42))
    z = c.samples()
    # signed area of the polygon is positive for counterclockwise orientation
    area = 0.5 * np.sum((z.real * np.roll(z.imag, -1)) - (np.roll(z.real, -1) * z.imag))
    assert area == pytest.approx(1.5 * 0.5)
    for a in (0.4, 0.41, 0.42):
        assert np.any(np.isclose(z, a - 0.25j)) and np.any(np.isclose(z, a + 0.25j))
    assert len(np.unique(z)) == len(z)


@settings(max_examples=25, deadline=None)
@given(roots=st.lists(st.tuples(st.floats(-2, 3), st.floats(-1, 1)), min_size=0, max_size=5),
       poles=st.lists(st.tuples(st.floats(-2, 3), st.floats(-1, 1)), min_size=0, max_size=3))
def test_argument_principle(roots, poles):
    c = Contour(0.5)
    a, b, h = -0.5, 1.5, 0.5
    pts = [complex(*r) for r in roots + poles]
    # keep points well away from the contour itself
    if any(min(abs(p.real - a), abs(p.real - b)) < 0.05 and abs(p.imag) <= h + 0.05 for p in pts):
        return
    if any(min(abs(p.imag - h), abs(p.imag + h)) < 0.05 and a - 0.05 <= p.real <= b + 0.05 for p in pts):
        return
    inside = lambda p: a < p.real < b and -h < p.imag < h
    expect = sum(inside(complex(*r)) for r in roots) - sum(inside(complex(*p)) for p in poles)

    def f(z):
        out = np.ones(z.shape, dtype=complex)
        for r in roots:
            out *= z - complex(*r)
        for p in poles:
            out /= z - complex(*p)
        return out
    assert winding_number(f, c).winding == expect


def test_product_and_conjugate_properties():
    c = Contour(0.5)
    f = lambda z: (z - 0.3) * (z - 0.7 + 0.1j)
    g = lambda z: (z - 0.5) ** 3
    wf, wg = winding_number(f, c).winding, winding_number(g, c).winding
    assert winding_number(lambda z: f(z) * g(z), c).winding == wf + wg
    assert winding_number(lambda z: np.conj(f(z)), c).winding == -wf
    assert winding_number(lambda z: 1e-30 * f(z), c).winding == wf


def test_chern_of_clutching_examples():
    def diag(z):
        out = np.tile(np.eye(3, dtype=complex), (z.size, 1, 1))
        out[:, 0, 0] = z - 0.5
        return out
    assert chern_of_clutching(diag, Contour(0.5)) == 1
    M = np.array([[2.0, 1.0], [0.0, -1.0]])
    assert chern_of_clutching(lambda z: np.broadcast_to(M, (z.size, 2, 2)).astype(complex)) == 0


def test_reduced_clutching_scalar_example():
    system = presets.preset("riemannian-const")
    c = Contour(0.25, initial_samples=256)
    w_b = winding_number(lambda z: shooting_many(system, z)[:, 0, 0], c).winding
    w_n = chern_of_clutching(lambda z: clutching_matrix(propagate_many(system, z)), c)
    assert w_b == w_n == 2


def test_scalar_closed_form_winding():
    assert winding_number(scalar_b, Contour(0.25, initial_samples=256)).winding == 2


def test_arctan_normalization():
    assert arctan_normalization_check() == 1
    assert arctan_normalization_check(conjugate=True) == -1
    assert arctan_normalization_check(Contour(0.5, left=5.0, right=6.0)) == 0
