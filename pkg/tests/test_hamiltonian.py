import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srflows import hamiltonian as ham
from srflows import models
from srflows.errors import DomainError
from srflows.phase import coordinate_function

from conftest import SUSPENSION_MATRICES, fd_gradient

finite = st.floats(-3.0, 3.0, allow_nan=False)
phase6 = st.lists(finite, min_size=6, max_size=6).map(np.array)


def test_heisenberg_hamiltonian_value():
    H = ham.sr_hamiltonian(models.heisenberg())
    x = np.array([1.0, 2.0, 0.5, 0.3, -0.5, 0.2])
    # 2H = (p1 + q3 p2)^2 + p3^2
    assert H(x) == pytest.approx(0.5 * ((0.3 - 0.25) ** 2 + 0.2**2))


@pytest.mark.parametrize("name", ["torus3", "heisenberg", "martinet"])
@given(x=phase6)
def test_gradient_matches_finite_differences(name, x):
    H = ham.sr_hamiltonian(models.catalog_get(name))
    assert np.allclose(H.gradient(x), fd_gradient(H, x), atol=1e-6)


@given(x=phase6)
def test_hamilton_rhs_is_symplectic_gradient(x):
    H = ham.sr_hamiltonian(models.torus3())
    dq, dp = ham.hamilton_rhs(H, x)
    g = fd_gradient(H, x)
    assert np.allclose(dq, g[3:], atol=1e-6)
    assert np.allclose(dp, -g[:3], atol=1e-6)


def test_coordinate_brackets_are_canonical():
    q1 = coordinate_function(3, 0)
    p1 = coordinate_function(3, 3)
    p2 = coordinate_function(3, 4)
    x = np.arange(6.0)
    assert ham.poisson_bracket(q1, p1, x) == 1.0
    assert ham.poisson_bracket(p1, q1, x) == -1.0
    assert ham.poisson_bracket(q1, p2, x) == 0.0


@given(x=phase6)
def test_bracket_antisymmetry_and_leibniz_free_identity(x):
    m = models.heisenberg()
    H = ham.sr_hamiltonian(m)
    Ig = ham.reeb_momentum(m)
    assert ham.poisson_bracket(H, Ig, x) == pytest.approx(-ham.poisson_bracket(Ig, H, x), abs=1e-12)
    assert ham.poisson_bracket(H, H, x) == 0.0


def test_bracket_dimension_mismatch():
    with pytest.raises(DomainError):
        ham.poisson_bracket(coordinate_function(3, 0), coordinate_function(2, 0), np.zeros(6))


@pytest.mark.parametrize("A", SUSPENSION_MATRICES)
def test_suspension_integrals_commute(A):
    m = models.make_suspension_model(A)
    H = ham.sr_hamiltonian(m)
    I2, I3 = m.known_integrals[:2]
    worst = 0.0
    for x in ham.energy_shell_points(m, 40, seed=1):
        for F, G in ((H, I2), (H, I3), (I2, I3)):
            worst = max(worst, abs(ham.poisson_bracket(F, G, x)))
    assert worst < 1e-10


def test_heisenberg_reeb_symmetry():
    assert ham.reeb_symmetry_check(models.heisenberg(), samples=50) < 1e-12


def test_torus3_reeb_momentum_is_not_conserved():
    # on the 3-torus the Reeb field does not preserve the metric
    assert ham.reeb_symmetry_check(models.torus3(), samples=50) > 0.1


def test_riemannian_extension_is_sum():
    m = models.heisenberg()
    H, Ig = ham.sr_hamiltonian(m), ham.reeb_momentum(m)
    rng = np.random.default_rng(3)
    for t in (0.0, 0.5, 1.0, 2.0):
        E = ham.riemannian_extension(m, t)
        for _ in range(5):
            x = rng.standard_normal(6)
            assert E(x) == pytest.approx(H(x) + t * Ig(x), rel=1e-13, abs=1e-14)
    with pytest.raises(DomainError):
        ham.riemannian_extension(m, -1.0)


def test_reeb_momentum_requires_reeb_field():
    with pytest.raises(DomainError):
        ham.reeb_momentum(models.martinet())


def test_energy_shell_level():
    m = models.torus3()
    H = ham.sr_hamiltonian(m)
    pts = ham.energy_shell_points(m, 20, seed=0)
    assert np.allclose([H(x) for x in pts], 0.5)


def test_suspension_action_combines_terms(hyperbolic):
    K = ham.suspension_action(hyperbolic, (1.0, 0.5, -0.25))
    H = ham.sr_hamiltonian(hyperbolic)
    I2, I3 = hyperbolic.known_integrals[:2]
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.standard_normal(6)
        assert K(x) == pytest.approx(H(x) + 0.5 * I2(x) - 0.25 * I3(x), rel=1e-12, abs=1e-12)
    with pytest.raises(DomainError):
        ham.suspension_action(models.torus3(), (1, 0, 0))


@pytest.mark.parametrize(
    "name,params",
    [("lie:so3", {"sigma": 0.7}), ("lie:sl2-a", {"sigma": 1.0}), ("lie:solvable-a", {"lambda1": 1.0, "lambda2": 2.0})],
)
def test_lie_poisson_energy_and_casimir_are_stationary(name, params):
    m = models.lie_poisson_model(name, params)
    rng = np.random.default_rng(0)
    for _ in range(10):
        mu = rng.uniform(0.2, 2.0, 3)
        v = ham.lie_poisson_rhs(m, mu)
        dE = fd_gradient(lambda y: ham.lie_poisson_energy(m, y), mu)
        dC = fd_gradient(m.casimir, mu)
        assert abs(dE @ v) < 1e-7
        assert abs(dC @ v) < 1e-7


def test_lie_poisson_rhs_rejects_bad_input():
    m = models.lie_poisson_model("lie:h3", {})
    with pytest.raises(DomainError):
        ham.lie_poisson_rhs(m, [1.0, np.nan, 0.0])
