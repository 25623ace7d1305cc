"""Scalar fields, vector fields, 1-forms and frames with exact derivatives.

Fields live in one global chart.  Each field evaluates to its value together
with first and second coordinate derivatives.  Catalog fields come from the
closed-form kernels in :mod:`srflows.kernels`; arbitrary fields can be written
as ordinary Python expressions and differentiated with the second-order
hyper-dual :class:`Jet` arithmetic below.
"""
from __future__ import annotations

import logging
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .phase import CotangentScalar

_log = logging.getLogger(__name__)

SPAN_RTOL = 1e-10


# ---------------------------------------------------------------------------
# hyper-dual numbers


class Jet:
    """Value, gradient and Hessian of a scalar, propagated through arithmetic."""

    __slots__ = ("val", "grad", "hess")
    __array_priority__ = 100

    def __init__(self, val, grad, hess):
        self.val = float(val)
        self.grad = grad
        self.hess = hess

    @classmethod
    def variables(cls, q) -> list:
        q = np.asarray(q, dtype=float)
        m = q.size
        eye = np.eye(m)
        zero = np.zeros((m, m))
        return [cls(q[i], eye[i].copy(), zero.copy()) for i in range(m)]

    def _lift(self, c) -> "Jet":
        if isinstance(c, Jet):
            return c
        return Jet(c, np.zeros_like(self.grad), np.zeros_like(self.hess))

    def _chain(self, f0, f1, f2) -> "Jet":
        g = self.grad
        return Jet(f0, f1 * g, f1 * self.hess + f2 * np.outer(g, g))

    def __add__(self, o):
        o = self._lift(o)
        return Jet(self.val + o.val, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess)

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return self._lift(o) - self

    def __mul__(self, o):
        o = self._lift(o)
        return Jet(
            self.val * o.val,
            self.val * o.grad + o.val * self.grad,
            self.val * o.hess + o.val * self.hess + np.outer(self.grad, o.grad) + np.outer(o.grad, self.grad),
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        v = self.val
        return self._chain(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, o):
        return self * self._lift(o).reciprocal()

    def __rtruediv__(self, o):
        return self._lift(o) * self.reciprocal()

    def __pow__(self, k):
        if isinstance(k, Jet):
            return exp(k * log(self))
        v = self.val
        if k == 0:
            return self._lift(1.0)
        return self._chain(v**k, k * v ** (k - 1), k * (k - 1) * v ** (k - 2) if k != 1 else 0.0)

    def __repr__(self):
        return f"Jet({self.val!r})"


def sin(x):
    if isinstance(x, Jet):
        return x._chain(np.sin(x.val), np.cos(x.val), -np.sin(x.val))
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        return x._chain(np.cos(x.val), -np.sin(x.val), -np.cos(x.val))
    return np.cos(x)


def exp(x):
    if isinstance(x, Jet):
        e = np.exp(x.val)
        return x._chain(e, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, Jet):
        return x._chain(np.log(x.val), 1.0 / x.val, -1.0 / x.val**2)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Jet):
        s = np.sqrt(x.val)
        return x._chain(s, 0.5 / s, -0.25 / s**3)
    return np.sqrt(x)


def _jet_triple(value, m):
    if isinstance(value, Jet):
        return value.val, value.grad, value.hess
    return float(value), np.zeros(m), np.zeros((m, m))


# ---------------------------------------------------------------------------
# fields


class ScalarField:
    """f : R^m -> R evaluated together with gradient and Hessian."""

    def __init__(self, dim: int, fn: Callable, value_fn: Optional[Callable] = None):
        self.dim = int(dim)
        self._fn = fn
        self._value_fn = value_fn

    @classmethod
    def from_function(cls, dim: int, f: Callable) -> "ScalarField":
        """Differentiate ``f(q)`` through hyper-dual arithmetic.

        ``f`` receives a list of :class:`Jet` variables and must use the
        module-level ``sin``, ``cos``, ``exp``, ``log``, ``sqrt``.
        """

        def fn(q):
            return _jet_triple(f(Jet.variables(q)), dim)

        # values alone go through plain floats: no derivative terms to overflow
        return cls(dim, fn, value_fn=lambda q: float(f([float(v) for v in q])))

    @classmethod
    def constant(cls, dim: int, c: float) -> "ScalarField":
        return cls(dim, lambda q: (float(c), np.zeros(dim), np.zeros((dim, dim))))

    def evaluate(self, q):
        q = _check_point(q, self.dim)
        v, g, h = self._fn(q)
        return float(v), np.asarray(g, dtype=float), np.asarray(h, dtype=float)

    def __call__(self, q) -> float:
        if self._value_fn is not None:
            return self._value_fn(_check_point(q, self.dim))
        return self.evaluate(q)[0]


class _CoefficientField:
    """Shared machinery for vector fields and 1-forms: m coefficient functions.

    ``fn(q)`` returns ``(val (m,), jac (m, m), hess (m, m, m) or None)`` with
    ``jac[j, a] = d coef_j / d q_a``.  ``order`` is the highest derivative the
    field can supply (commutators lose one order).
    """

    def __init__(self, dim: int, fn: Callable, order: int = 2, name: str = ""):
        self.dim = int(dim)
        self._fn = fn
        self.order = order
        self.name = name

    @classmethod
    def from_components(cls, components: Sequence[ScalarField], name: str = ""):
        dims = {c.dim for c in components}
        if len(dims) != 1:
            raise ValueError(f"components disagree on dimension: {sorted(dims)}")
        m = dims.pop()
        if len(components) != m:
            raise ValueError(f"need {m} components, got {len(components)}")

        def fn(q):
            trip = [c.evaluate(q) for c in components]
            return (
                np.array([t[0] for t in trip]),
                np.array([t[1] for t in trip]),
                np.array([t[2] for t in trip]),
            )

        return cls(m, fn, name=name)

    @classmethod
    def from_function(cls, dim: int, f: Callable, name: str = ""):
        """Coefficients given as a Python function of jet variables."""

        def fn(q):
            out = f(Jet.variables(q))
            if len(out) != dim:
                raise ValueError(f"expected {dim} coefficients, got {len(out)}")
            trip = [_jet_triple(c, dim) for c in out]
            return (
                np.array([t[0] for t in trip]),
                np.array([t[1] for t in trip]),
                np.array([t[2] for t in trip]),
            )

        return cls(dim, fn, name=name)

    @classmethod
    def constant(cls, vec, name: str = ""):
        vec = np.asarray(vec, dtype=float)
        m = vec.size
        return cls(m, lambda q: (vec.copy(), np.zeros((m, m)), np.zeros((m, m, m))), name=name)

    @classmethod
    def from_kernel(cls, model_id: int, prm, row: int, dim: int, name: str = ""):
        prm = np.asarray(prm, dtype=float)

        def fn(q):
            X, DX, D2X = kernels.frame_kernel(model_id, q, prm)
            return X[row].copy(), DX[row].copy(), D2X[row].copy()

        return cls(dim, fn, name=name)

    def jet(self, q):
        q = _check_point(q, self.dim)
        return self._fn(q)

    def __call__(self, q) -> np.ndarray:
        return np.asarray(self.jet(q)[0], dtype=float)

    def scaled(self, factor: ScalarField, name: str = ""):
        """Pointwise product with a scalar field."""
        if factor.dim != self.dim:
            raise ValueError("dimension mismatch")

        def fn(q):
            v, J, Hh = self._fn(q)
            f, g, h = factor.evaluate(q)
            val = f * v
            jac = f * J + np.outer(v, g)
            hess = None
            if Hh is not None:
                hess = (
                    f * Hh
                    + np.einsum("ja,b->jab", J, g)
                    + np.einsum("jb,a->jab", J, g)
                    + np.einsum("j,ab->jab", v, h)
                )
            return val, jac, hess

        return type(self)(self.dim, fn, order=self.order, name=name or self.name)


class VectorField(_CoefficientField):
    """Vector field sum_j X^j(q) d/dq_j."""


class OneFormField(_CoefficientField):
    """1-form sum_j a_j(q) dq_j."""

    def pair(self, X: VectorField, q) -> float:
        _same_dim(self, X)
        return float(np.dot(self(q), X(q)))


def _check_point(q, dim):
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != dim:
        raise ValueError(f"point has dimension {q.size}, field has {dim}")
    return q


def _same_dim(*fields):
    dims = {f.dim for f in fields}
    if len(dims) != 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")


class Frame:
    """Ordered fields xi_1..xi_k spanning a distribution.

    ``kernel = (model_id, prm)`` points at a compiled evaluation of the same
    fields (rows 0..k-1 of :func:`kernels.frame_kernel`).
    """

    def __init__(self, fields: Sequence[VectorField], kernel=None):
        if not fields:
            raise ValueError("empty frame")
        _same_dim(*fields)
        if len(fields) > fields[0].dim:
            raise ValueError("more frame fields than dimensions")
        self.fields = list(fields)
        self.kernel = kernel

    @property
    def rank(self) -> int:
        return len(self.fields)

    @property
    def dim(self) -> int:
        return self.fields[0].dim

    def evaluate(self, q):
        """Stacked (X, DX, D2X) for the k frame fields."""
        q = _check_point(q, self.dim)
        if self.kernel is not None:
            mid, prm = self.kernel
            X, DX, D2X = kernels.frame_kernel(mid, q, prm)
            k = self.rank
            return X[:k], DX[:k], D2X[:k]
        jets = [f.jet(q) for f in self.fields]
        return (
            np.array([j[0] for j in jets]),
            np.array([j[1] for j in jets]),
            np.array([j[2] for j in jets]),
        )

    def min_singular_value(self, q) -> float:
        return float(np.linalg.svd(self.evaluate(q)[0], compute_uv=False)[-1])


# ---------------------------------------------------------------------------
# operations


def commutator(X: VectorField, Y: VectorField, q) -> np.ndarray:
    """Lie bracket [X, Y](q) = DY X - DX Y."""
    _same_dim(X, Y)
    xv, xj, _ = X.jet(q)
    yv, yj, _ = Y.jet(q)
    return yj @ xv - xj @ yv


def commutator_field(X: VectorField, Y: VectorField) -> VectorField:
    """[X, Y] as a field; exact value and Jacobian, no Hessian."""
    _same_dim(X, Y)
    order = min(X.order, Y.order) - 1
    if order < 0:
        raise ValueError("fields carry no derivatives; cannot form their bracket")

    def fn(q):
        xv, xj, xh = X.jet(q)
        yv, yj, yh = Y.jet(q)
        val = yj @ xv - xj @ yv
        if order == 0:
            return val, None, None
        jac = np.einsum("jab,b->ja", yh, xv) + yj @ xj - np.einsum("jab,b->ja", xh, yv) - xj @ yj
        return val, jac, None

    name = f"[{X.name},{Y.name}]" if X.name or Y.name else ""
    return VectorField(X.dim, fn, order=order, name=name)


def exterior_two_form(alpha: OneFormField, X: VectorField, Y: VectorField, q) -> float:
    """d(alpha)(X, Y) = X(alpha(Y)) - Y(alpha(X)) - alpha([X, Y])."""
    _same_dim(alpha, X, Y)
    q = _check_point(q, alpha.dim)
    av, aj, _ = alpha.jet(q)
    xv, xj, _ = X.jet(q)
    yv, yj, _ = Y.jet(q)
    # gradient of the pairing alpha(Y) is aj^T yv + yj^T av
    d_aY = aj.T @ yv + yj.T @ av
    d_aX = aj.T @ xv + xj.T @ av
    bracket = yj @ xv - xj @ yv
    return float(xv @ d_aY - yv @ d_aX - av @ bracket)


def momentum_function(X: VectorField, name: str = "") -> CotangentScalar:
    """The fiber-linear function (q, p) -> <p, X(q)>."""
    m = X.dim

    def fn(q, p):
        v, J, Hh = X.jet(q)
        if Hh is None:
            raise ValueError("momentum function needs second derivatives of the field")
        g = np.concatenate([J.T @ p, v])
        h = np.zeros((2 * m, 2 * m))
        h[:m, :m] = np.einsum("jab,j->ab", Hh, p)
        h[:m, m:] = J.T
        h[m:, :m] = J
        return float(v @ p), g, h

    return CotangentScalar(m, fn, name=name or f"<p,{X.name or 'X'}>")


def _span_rank(vectors, m) -> int:
    if not vectors:
        return 0
    s = np.linalg.svd(np.array(vectors), compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > SPAN_RTOL * s[0]))


def bracket_generating_check(frame: Frame, q, max_depth: int):
    """Does the frame with its iterated brackets span T_qM?

    Returns ``(spans, depth)``: the first depth at which the span is full, or
    ``(False, max_depth)``.  Depth d admits brackets of d frame fields.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    q = _check_point(q, frame.dim)
    m = frame.dim
    level = list(frame.fields)
    vectors = [f(q) for f in level]
    if _span_rank(vectors, m) == m:
        return True, 1
    for depth in range(2, max_depth + 1):
        if min(f.order for f in level) < 1:
            _log.warning(
                "bracket depth %d needs more derivatives than the fields carry; stopping at %d",
                depth,
                depth - 1,
            )
            break
        level = [commutator_field(a, b) for a in frame.fields for b in level]
        vectors.extend(f(q) for f in level)
        if _span_rank(vectors, m) == m:
            return True, depth
    return False, max_depth
