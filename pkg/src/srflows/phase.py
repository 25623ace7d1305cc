"""Cotangent-bundle state and phase-space scalar functions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class PhasePoint:
    """A point (q, p) of T*M in covering-space coordinates."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(-1)
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape:
            raise ValueError(f"q and p differ in length: {q.size} vs {p.size}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("phase point has non-finite entries")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.q.size

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_array(cls, x) -> "PhasePoint":
        x = np.asarray(x, dtype=float)
        m = x.size // 2
        return cls(x[:m], x[m:])


def as_phase(x) -> PhasePoint:
    if isinstance(x, PhasePoint):
        return x
    return PhasePoint.from_array(x)


class CotangentScalar:
    """A function on T*M with exact phase gradient and Hessian.

    ``fn(q, p)`` returns ``(value, grad, hess)`` with the gradient ordered as
    (d/dq, d/dp).  ``system`` optionally carries a compiled ODE description
    ``(ip, fp)`` for :mod:`srflows.kernels` so flows of this function can run
    in the jitted integrator.  ``direction_fn(q, p)`` optionally returns the
    gradient times some positive function, for integrals with a flat factor
    whose gradient underflows although its direction is well defined.
    """

    def __init__(self, dim: int, fn: Callable, name: str = "", system=None, direction_fn: Optional[Callable] = None):
        self.dim = int(dim)
        self._fn = fn
        self.name = name
        self.system = system
        self._direction_fn = direction_fn

    def evaluate(self, x):
        x = as_phase(x)
        if x.dim != self.dim:
            raise ValueError(f"{self.name or 'function'} expects dimension {self.dim}, got {x.dim}")
        v, g, h = self._fn(x.q, x.p)
        return float(v), np.asarray(g, dtype=float), np.asarray(h, dtype=float)

    def __call__(self, x) -> float:
        return self.evaluate(x)[0]

    def gradient(self, x) -> np.ndarray:
        return self.evaluate(x)[1]

    def gradient_direction(self, x) -> np.ndarray:
        """A positive multiple of the gradient (the gradient itself unless overridden)."""
        if self._direction_fn is None:
            return self.gradient(x)
        x = as_phase(x)
        return np.asarray(self._direction_fn(x.q, x.p), dtype=float)

    def values(self, states: np.ndarray) -> np.ndarray:
        """Evaluate along an (N, 2m) array of phase vectors."""
        return np.array([self.evaluate(PhasePoint.from_array(s))[0] for s in states])

    # linear combinations keep exact derivatives
    def __add__(self, other: "CotangentScalar") -> "CotangentScalar":
        return combine([(1.0, self), (1.0, other)])

    def __mul__(self, c: float) -> "CotangentScalar":
        return combine([(float(c), self)])

    __rmul__ = __mul__

    def __repr__(self):
        return f"CotangentScalar({self.name!r}, dim={self.dim})"


def combine(terms, name: Optional[str] = None, system=None) -> CotangentScalar:
    """Return sum_i c_i F_i for a list of (c_i, F_i)."""
    dim = terms[0][1].dim
    if any(f.dim != dim for _, f in terms):
        raise ValueError("cannot combine functions of different dimension")

    def fn(q, p):
        v = 0.0
        g = np.zeros(2 * dim)
        h = np.zeros((2 * dim, 2 * dim))
        for c, f in terms:
            if c == 0.0:
                continue
            fv, fg, fh = f._fn(q, p)
            v += c * fv
            g += c * np.asarray(fg)
            h += c * np.asarray(fh)
        return v, g, h

    if name is None:
        name = " + ".join(f"{c:g}*{f.name}" for c, f in terms)
    return CotangentScalar(dim, fn, name=name, system=system)


def coordinate_function(dim: int, index: int, name: Optional[str] = None) -> CotangentScalar:
    """The phase coordinate x[index] (q's first, then p's)."""
    if not 0 <= index < 2 * dim:
        raise ValueError(f"index {index} outside phase dimension {2 * dim}")
    g = np.zeros(2 * dim)
    g[index] = 1.0
    h = np.zeros((2 * dim, 2 * dim))

    def fn(q, p):
        return np.concatenate([q, p])[index], g, h

    label = name or (f"q{index + 1}" if index < dim else f"p{index - dim + 1}")
    return CotangentScalar(dim, fn, name=label)
