import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srflows import diffgeo as dg
from srflows import models
from srflows.phase import PhasePoint

from conftest import LN_GOLDEN, fd_gradient, fd_jacobian

coords = st.lists(st.floats(-2, 2), min_size=3, max_size=3).map(np.array)


def poly_field(a, b, c):
    return dg.VectorField.from_function(3, lambda v: [a * v[1] * v[2], b * v[0] ** 2, c * v[0] * v[1] + v[2] ** 3])


def heisenberg_frame():
    xi1 = dg.VectorField.from_function(3, lambda v: [1.0, v[2], 0.0])
    xi2 = dg.VectorField.constant([0.0, 0.0, 1.0])
    return xi1, xi2


# ---------------------------------------------------------------------------
# jets and scalar fields


@given(coords)
def test_jet_gradient_and_hessian_match_finite_differences(q):
    f = dg.ScalarField.from_function(3, lambda v: dg.sin(v[0] * v[1]) + dg.exp(0.3 * v[2]) * v[0] - v[1] ** 3 / (2.0 + v[0] ** 2))
    v, g, h = f.evaluate(q)
    assert np.allclose(g, fd_gradient(f, q), rtol=1e-5, atol=1e-6)
    assert np.allclose(h, fd_jacobian(lambda y: f.evaluate(y)[1], q), rtol=1e-5, atol=1e-5)
    assert np.allclose(h, h.T, rtol=1e-12, atol=1e-14)


def test_scalar_value_path_matches_jet_path():
    f = dg.ScalarField.from_function(2, lambda v: v[0] ** 2 * v[1] ** -1 + dg.log(v[1]))
    q = np.array([0.7, 1.9])
    assert f(q) == pytest.approx(f.evaluate(q)[0], rel=1e-15)


def test_scalar_value_path_survives_tiny_denominators():
    # the Hessian term carries m2^-3; values alone must not overflow
    f = dg.ScalarField.from_function(2, lambda v: v[0] ** 2 * v[1] ** -1)
    assert f(np.array([1e-103, 1e-205])) == pytest.approx(1e-1, rel=1e-12)


def test_jet_sqrt_and_cos():
    f = dg.ScalarField.from_function(1, lambda v: dg.sqrt(v[0]) * dg.cos(v[0]))
    x = 0.8
    v, g, h = f.evaluate([x])
    assert v == pytest.approx(np.sqrt(x) * np.cos(x))
    assert g[0] == pytest.approx(np.cos(x) / (2 * np.sqrt(x)) - np.sqrt(x) * np.sin(x))


def test_scalar_dimension_is_checked():
    f = dg.ScalarField.constant(3, 1.0)
    with pytest.raises(ValueError):
        f.evaluate([1.0, 2.0])


# ---------------------------------------------------------------------------
# commutators


def test_constant_fields_commute():
    X = dg.VectorField.constant([1.0, 0.0, 0.0])
    Y = dg.VectorField.constant([0.0, 1.0, 0.0])
    assert np.array_equal(dg.commutator(X, Y, np.zeros(3)), np.zeros(3))


@given(coords)
def test_heisenberg_commutator(q):
    xi1, xi2 = heisenberg_frame()
    assert np.allclose(dg.commutator(xi2, xi1, q), [0.0, 1.0, 0.0], atol=1e-15)


def test_hyperbolic_commutator_at_zero(hyperbolic):
    # coordinates (u1, u2, phi3) run along the eigendirections eta1, eta2
    xi1, xi2 = hyperbolic.frame.fields
    v = dg.commutator(xi2, xi1, np.array([0.3, 0.1, 0.0]))
    assert np.allclose(v, [-LN_GOLDEN, LN_GOLDEN, 0.0], atol=1e-14)


@given(coords, st.floats(-2, 2), st.floats(-2, 2))
def test_commutator_antisymmetry(q, a, b):
    X, Y = poly_field(a, 1.0, b), poly_field(1.0, b, a)
    assert np.allclose(dg.commutator(X, Y, q), -dg.commutator(Y, X, q), atol=1e-14)


@given(coords)
def test_jacobi_identity(q):
    X, Y, Z = poly_field(1.0, 2.0, -1.0), poly_field(-0.5, 1.0, 3.0), dg.VectorField.from_function(3, lambda v: [v[2], v[0] * v[1], 1.0])
    c = dg.commutator_field
    total = dg.commutator(X, c(Y, Z), q) + dg.commutator(Y, c(Z, X), q) + dg.commutator(Z, c(X, Y), q)
    assert np.max(np.abs(total)) < 1e-10 * max(1.0, float(np.max(np.abs(q))) ** 4)


def test_commutator_rejects_dimension_mismatch():
    X = dg.VectorField.constant([1.0, 0.0])
    Y = dg.VectorField.constant([1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        dg.commutator(X, Y, np.zeros(3))


# ---------------------------------------------------------------------------
# exterior derivative


def test_closed_form_gives_zero():
    alpha = dg.OneFormField.constant([1.0, 2.0, -1.0])
    X = dg.VectorField.constant([1.0, 0.5, 0.0])
    Y = dg.VectorField.constant([0.0, 1.0, 3.0])
    assert dg.exterior_two_form(alpha, X, Y, np.array([0.3, 0.2, 0.1])) == 0.0


def test_martinet_exterior_derivative():
    alpha = dg.OneFormField.from_function(3, lambda v: [-(v[2] ** 2), 1.0, 0.0])
    dz = dg.VectorField.constant([0.0, 0.0, 1.0])
    dx = dg.VectorField.constant([1.0, 0.0, 0.0])
    assert dg.exterior_two_form(alpha, dz, dx, np.array([0.0, 0.0, 1.0])) == pytest.approx(-2.0, abs=1e-14)


@given(coords, st.floats(-3, 3))
def test_exterior_two_form_antisymmetric_and_scaling(q, s):
    alpha = dg.OneFormField.from_function(3, lambda v: [v[1] * v[2], dg.sin(v[0]), v[0] ** 2])
    X, Y = poly_field(1.0, -1.0, 0.5), poly_field(0.3, 2.0, 1.0)
    a = dg.exterior_two_form(alpha, X, Y, q)
    assert dg.exterior_two_form(alpha, Y, X, q) == pytest.approx(-a, abs=1e-12)
    sX = X.scaled(dg.ScalarField.constant(3, s))
    assert dg.exterior_two_form(alpha, sX, Y, q) == pytest.approx(s * a, abs=1e-10 * (1 + abs(a)))


@pytest.mark.parametrize("A", [[[2, 1], [1, 1]], [[0, 1], [-1, 0]], [[1, 1], [0, 1]]])
def test_suspension_contact_form_against_frame(A):
    model = models.make_suspension_model(A)
    xi1, xi2 = model.frame.fields
    rng = np.random.default_rng(3)
    for _ in range(20):
        q = model.sample_q(rng)
        assert abs(abs(dg.exterior_two_form(model.contact_form, xi1, xi2, q)) - 1.0) < 1e-10


# ---------------------------------------------------------------------------
# momentum functions and bracket generation


def test_momentum_function_examples():
    d2 = dg.momentum_function(dg.VectorField.constant([0.0, 1.0, 0.0]))
    assert d2(PhasePoint(np.zeros(3), np.array([0.0, 1.0, 0.0]))) == 1.0
    xi1, _ = heisenberg_frame()
    P = dg.momentum_function(xi1)
    assert P(PhasePoint(np.array([0.0, 0.0, 2.0]), np.array([1.0, 1.0, 0.0]))) == pytest.approx(3.0)
    assert P(PhasePoint(np.array([0.4, 0.2, 2.0]), np.zeros(3))) == 0.0


@given(coords, coords)
def test_momentum_function_phase_gradient(q, p):
    P = dg.momentum_function(poly_field(1.0, -2.0, 0.5))
    x = np.concatenate([q, p])
    _, g, h = P.evaluate(PhasePoint.from_array(x))
    assert np.allclose(g, fd_gradient(lambda y: P(PhasePoint.from_array(y)), x), rtol=1e-5, atol=1e-5)
    assert np.allclose(h, h.T)


def test_bracket_generating_examples():
    xi1, xi2 = heisenberg_frame()
    assert dg.bracket_generating_check(dg.Frame([xi1, xi2]), np.array([0.5, -1.0, 2.0]), 4) == (True, 2)
    m = models.martinet()
    assert dg.bracket_generating_check(m.frame, np.array([0.3, 0.2, 0.0]), 4) == (True, 3)
    inv = dg.Frame([dg.VectorField.constant([1.0, 0.0, 0.0]), dg.VectorField.constant([0.0, 1.0, 0.0])])
    assert dg.bracket_generating_check(inv, np.zeros(3), 4) == (False, 4)


def test_frame_rejects_dependent_fields():
    X = dg.VectorField.constant([1.0, 0.0, 0.0])
    fr = dg.Frame([X, X.scaled(dg.ScalarField.constant(3, 2.0))])
    assert fr.min_singular_value(np.zeros(3)) < 1e-10
