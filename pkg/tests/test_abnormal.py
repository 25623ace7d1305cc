import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srflows import abnormal as ab
from srflows import models
from srflows.diffgeo import Frame, OneFormField, VectorField
from srflows.errors import DomainError

from conftest import fd_gradient


@pytest.fixture(scope="module")
def martinet():
    return ab.ConstraintManifold.from_model(models.martinet())


@pytest.fixture(scope="module")
def engel():
    return ab.ConstraintManifold.from_model(models.engel())


def martinet_point(x, y, z, py):
    return np.array([x, y, z, -z * z * py, py, 0.0])


def engel_point(q, py, pz):
    # p_x + z p_y + w p_z = 0 and p_w = 0
    x, y, z, w = q
    return np.array([x, y, z, w, -z * py - w * pz, py, pz, 0.0])


def test_pfaffian_small_cases():
    assert ab.pfaffian(np.array([[0.0, 2.0], [-2.0, 0.0]])) == 2.0
    W = np.array([[0, 1, 2, 3], [-1, 0, 4, 5], [-2, -4, 0, 6], [-3, -5, -6, 0]], dtype=float)
    assert ab.pfaffian(W) == pytest.approx(1 * 6 - 2 * 5 + 3 * 4)


@given(seed=st.integers(0, 10_000), n=st.sampled_from([2, 4, 6, 8]))
def test_pfaffian_squares_to_determinant(seed, n):
    M = np.random.default_rng(seed).standard_normal((n, n))
    W = M - M.T
    assert ab.pfaffian(W) ** 2 == pytest.approx(np.linalg.det(W), rel=1e-9, abs=1e-12)


def test_tangent_basis_dimensions(martinet, engel):
    B = martinet.tangent_basis(martinet_point(0.1, 0.2, 0.5, 1.0))
    assert B.shape == (6, 4)
    assert np.allclose(B.T @ B, np.eye(4))
    xe = engel_point((0.3, -0.2, 0.1, 0.4), 1.0, 0.5)
    assert engel.tangent_basis(xe).shape == (8, 6)
    heis = ab.ConstraintManifold.from_model(models.heisenberg())
    xh = heis.project_momentum(np.array([0.0, 0.0, 0.3, 0.2, 0.1, 1.0]))
    assert heis.tangent_basis(xh).shape == (6, 4)


def test_tangent_basis_spans_constraint_kernel(martinet):
    x = martinet_point(0.1, 0.2, 0.5, 1.0)
    B = martinet.tangent_basis(x)
    G = martinet.gradients(x)
    assert np.max(np.abs(G @ B)) < 1e-12
    J = np.column_stack([fd_gradient(lambda y, i=i: martinet.values(y)[i], x) for i in range(2)]).T
    assert np.allclose(G, J, atol=1e-8)


def test_off_constraint_point_is_rejected(martinet):
    with pytest.raises(DomainError):
        martinet.tangent_basis(np.array([0, 0, 0.5, 1.0, 1.0, 0.0]))


def test_martinet_ranks(martinet):
    assert martinet.restricted_form_rank(martinet_point(0.0, 0.0, 1.0, 1.0)) == 4
    assert martinet.restricted_form_rank(martinet_point(0.0, 0.0, 0.0, 1.0)) == 2


def test_engel_rank_drop(engel):
    generic = engel_point((0.3, -0.2, 0.1, 0.4), 1.0, 0.5)
    on_sigma = engel_point((0.3, -0.2, 0.1, 0.4), 1.0, 0.0)
    assert engel.restricted_form_rank(generic) - engel.restricted_form_rank(on_sigma) == 2


def test_ranks_are_even(engel):
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = engel.sample_point(rng)
        assert engel.restricted_form_rank(x) % 2 == 0


def test_pfaffian_gradient_matches_finite_differences(martinet):
    x = martinet_point(0.2, 0.1, 0.3, 0.8)
    g = martinet.pfaffian_gradient(x)
    # compare along tangent directions of S, where the Pfaffian is defined
    for b in martinet.tangent_basis(x).T:
        fd = (martinet.pfaffian_at(martinet.project_momentum(x + 1e-5 * b))
              - martinet.pfaffian_at(martinet.project_momentum(x - 1e-5 * b))) / 2e-5
        assert g @ b == pytest.approx(fd, abs=1e-5)


def test_locate_sigma_martinet(martinet):
    a = martinet_point(0.1, 0.2, 0.7, 1.0)
    b = martinet_point(0.1, 0.2, -0.6, 1.0)
    s = martinet.locate_sigma(a, b - a)
    assert abs(s[2]) < 1e-10
    assert np.max(np.abs(martinet.values(s))) < 1e-10


def test_locate_sigma_engel(engel):
    a = engel_point((0.3, -0.2, 0.1, 0.4), 1.0, 0.5)
    b = engel_point((0.3, -0.2, 0.1, 0.4), 1.0, -0.5)
    s = engel.locate_sigma(a, b - a)
    assert abs(s[6]) < 1e-10


@pytest.mark.parametrize("name", ["heisenberg", "torus3"])
def test_contact_models_have_no_sigma(name):
    S = ab.ConstraintManifold.from_model(models.catalog_get(name))
    for a, d in S.probe_segments(25, seed=1):
        with pytest.raises(ab.NoDegeneracyError):
            S.locate_sigma(a, d)


def test_martinet_kernel_on_sigma(martinet):
    k = martinet.kernel_direction(martinet_point(0.4, -0.3, 0.0, 1.0))
    assert ab.angle_to(k, np.eye(6)[0]) < 1e-6


def test_martinet_generic_point_has_no_kernel(martinet):
    with pytest.raises(ab.NoDegeneracyError):
        martinet.kernel_direction(martinet_point(0.0, 0.0, 1.0, 1.0))


def test_engel_kernel(engel):
    x = engel_point((0.3, -0.2, 0.1, 0.4), 1.0, 0.0)
    assert ab.angle_to(engel.kernel_direction(x), np.eye(8)[3]) < 1e-6


def test_martinet_trace(martinet, tmp_path):
    curve = martinet.trace_abnormal(martinet_point(0.0, 0.0, 0.0, 1.0), 10.0)
    q = curve.configuration
    assert np.max(np.abs(q[:, 1])) < 1e-8 and np.max(np.abs(q[:, 2])) < 1e-8
    assert q[-1, 0] - q[0, 0] > 1.0
    assert max(np.max(np.abs(martinet.values(x))) for x in curve.points) < 1e-8
    assert np.all(np.linalg.norm(curve.points[:, 3:], axis=1) > 1e-6)
    path = tmp_path / "c.csv"
    curve.to_csv(path)
    head = path.read_text().splitlines()[0].split(",")
    assert head[:8] == ["t", "q1", "q2", "q3", "p1", "p2", "p3", "pfaffian"]


def test_engel_trace_moves_only_w(engel):
    x0 = engel_point((0.3, -0.2, 0.1, 0.0), 1.0, 0.0)
    q = engel.trace_abnormal(x0, 2.0).configuration
    assert np.max(np.abs(q[:, :3] - q[0, :3])) < 1e-8
    assert np.ptp(q[:, 3]) > 0.5


def test_reverse_trace_is_time_reflection(martinet):
    x0 = martinet_point(0.0, 0.0, 0.0, 1.0)
    fwd = martinet.trace_abnormal(x0, 3.0)
    back = martinet.trace_abnormal(x0, 3.0, sign=-1.0)
    q_f, q_b = fwd.configuration, back.configuration
    # the backward curve is the forward one reflected through x0
    for t, q in zip(back.times, q_b):
        j = np.argmin(np.abs(fwd.times - t))
        if abs(fwd.times[j] - t) < 1e-12:
            assert np.allclose(q[0] - q_b[0], -(q_f[j, 0] - q_f[0, 0]), atol=1e-8)


def test_abnormal_curve_independent_of_metric():
    base = models.martinet()
    f1, f2 = base.frame.fields
    scaled = VectorField.from_function(3, lambda v: [1 + 0.5 * v[0] ** 2, (1 + 0.5 * v[0] ** 2) * v[2] ** 2, 0.0])
    rescaled = models.ModelSpec(name="martinet-rescaled", dim=3, frame=Frame([scaled, f2]),
                                known_integrals=[], annihilator=base.annihilator)
    a = ab.ConstraintManifold.from_model(base)
    b = ab.ConstraintManifold.from_model(rescaled)
    x0 = martinet_point(0.0, 0.0, 0.0, 1.0)
    qa = a.trace_abnormal(x0, 2.0).configuration
    qb = b.trace_abnormal(x0, 2.0).configuration
    # both trace the line {y = 0, z = 0}; compare the swept sets
    assert np.max(np.abs(qb[:, 1:])) < 1e-8
    assert np.max(np.abs(qa[:, 1:])) < 1e-8
    assert min(qa[-1, 0], qb[-1, 0]) > 1.0
