import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srflows import entropy as en
from srflows.errors import DomainError

from conftest import LN_GOLDEN

A = [[2, 1], [1, 1]]
B = [[1, 1], [0, 1]]
R = [[0, 1], [-1, 0]]
I = [[1, 0], [0, 1]]


def test_toral_entropy_examples():
    assert en.toral_entropy(A) == pytest.approx(LN_GOLDEN, abs=1e-15)
    assert en.toral_entropy(I) == 0.0
    assert en.toral_entropy(B) == 0.0
    assert en.toral_entropy(R) == 0.0


def test_toral_entropy_higher_dimension():
    # companion matrix of x^3 - x - 1, a Pisot unit
    C = [[0, 0, 1], [1, 0, 1], [0, 1, 0]]
    roots = np.roots([1, 0, -1, -1])
    expected = np.log(np.max(np.abs(roots)))
    assert en.toral_entropy(C) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("M", [[[2, 0], [0, 1]], [[1.5, 0], [0, 1]], [[1, 2, 3]], [[np.inf, 0], [0, 1]]])
def test_toral_entropy_rejects(M):
    with pytest.raises(DomainError):
        en.toral_entropy(M)




@st.composite
def sl2z(draw):
    # products of elementary generators stay in SL(2, Z)
    M = np.eye(2, dtype=np.int64)
    for k in draw(st.lists(st.tuples(st.booleans(), st.integers(-2, 2)), min_size=1, max_size=4)):
        E = np.array([[1, k[1]], [0, 1]]) if k[0] else np.array([[1, 0], [k[1], 1]])
        M = M @ E
    return M


@given(M=sl2z())
def test_entropy_of_inverse_and_powers(M):
    h = en.toral_entropy(M)
    Minv = np.round(np.linalg.inv(M)).astype(np.int64)
    assert en.toral_entropy(Minv) == pytest.approx(h, abs=1e-12)
    for k in range(-3, 4):
        Mk = np.linalg.matrix_power(M if k >= 0 else Minv, abs(k))
        assert en.toral_entropy(Mk) == pytest.approx(abs(k) * h, rel=1e-9, abs=1e-9)


def test_composition_table_rows():
    A2 = (np.array(A) @ np.array(A)).tolist()
    Bt = np.array(B).T.tolist()
    rows = en.composition_entropy_table([("A,A2", A, A2), ("B,Bt", B, Bt), ("I,A", I, A)])
    a, b, i = rows
    assert a.commuting and a.h_fg == pytest.approx(3 * LN_GOLDEN) == pytest.approx(a.h_f + a.h_g)
    assert not a.violation
    assert not b.commuting and b.h_f == 0.0 and b.h_g == 0.0
    assert b.h_fg == pytest.approx(LN_GOLDEN)
    assert b.counterexample
    assert i.h_fg == pytest.approx(i.h_g)
    assert set(rows[0].as_dict()) >= {"h_f", "h_g", "h_fg", "commuting", "violation", "counterexample"}


def test_composition_pair_sizes_must_match():
    with pytest.raises(DomainError):
        en.composition_entropy_table([(A, np.eye(3))])


def test_spanning_identity_is_zero():
    est = en.spanning_entropy(I, [0.05], range(4, 9))
    assert est.value == pytest.approx(0.0, abs=1e-12)


def test_spanning_rotation_is_small():
    est = en.spanning_entropy(R, [0.02], range(4, 12))
    assert est.value < 0.05


def test_spanning_cat_map():
    est = en.spanning_entropy(A, [0.01], range(4, 15))
    assert abs(est.value - LN_GOLDEN) / LN_GOLDEN < 0.15
    assert est.diagnostics["counting"] == "patch"


def test_spanning_counts_decrease_with_eps():
    est = en.spanning_entropy(A, [0.01, 0.02, 0.05], range(4, 9))
    logs = np.array([row["log_S"] for row in est.diagnostics["per_eps"]])
    assert np.all(np.diff(logs, axis=0) <= 1e-12)


def test_spanning_grid_on_callable_is_deterministic():
    Af = np.array(A, dtype=float)
    f = lambda P: P @ Af.T
    a = en.spanning_entropy(f, [0.1], range(2, 6), seed=3)
    b = en.spanning_entropy(f, [0.1], range(2, 6), seed=3)
    assert a.value == b.value
    assert a.diagnostics["counting"] == "grid"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"f": A, "eps_list": [0.1], "n_range": [1, 2, 3]},
        {"f": A, "eps_list": [0.0], "n_range": range(4)},
        {"f": A, "eps_list": [0.1], "n_range": range(1, 6), "method": "voronoi"},
        {"f": lambda P: P, "eps_list": [0.1], "n_range": range(1, 6), "method": "patch"},
        {"f": [[2, 0], [0, 1]], "eps_list": [0.1], "n_range": range(1, 6)},
    ],
)
def test_spanning_rejects(kwargs):
    with pytest.raises(DomainError):
        en.spanning_entropy(**kwargs)
