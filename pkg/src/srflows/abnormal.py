"""Abnormal curves from the annihilator of a distribution.

S is the zero set of the constraints c_i(q, p) = <p, xi_i(q)> in T*M.  The
canonical symplectic form restricted to S degenerates on a locus Sigma
(the zero set of a Pfaffian when dim S is even); kernel lines of the form on
Sigma project to abnormal curves.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .diffgeo import Frame
from .errors import DomainError, NumericalError

ZERO_SECTION = 1e-6
CONSTRAINT_TOL = 1e-10
RANK_RTOL = 1e-9
FD_STEP = 1e-6


class NoDegeneracyError(DomainError):
    """The restricted form does not degenerate where it was asked to."""


def pfaffian(W: np.ndarray) -> float:
    """Pfaffian of a skew matrix (closed forms up to 6x6, expansion beyond)."""
    n = W.shape[0]
    if n % 2:
        return 0.0
    if n == 0:
        return 1.0
    if n == 2:
        return float(W[0, 1])
    if n == 4:
        return float(W[0, 1] * W[2, 3] - W[0, 2] * W[1, 3] + W[0, 3] * W[1, 2])
    if n == 6:
        a = W
        return float(
            a[0, 1] * (a[2, 3] * a[4, 5] - a[2, 4] * a[3, 5] + a[2, 5] * a[3, 4])
            - a[0, 2] * (a[1, 3] * a[4, 5] - a[1, 4] * a[3, 5] + a[1, 5] * a[3, 4])
            + a[0, 3] * (a[1, 2] * a[4, 5] - a[1, 4] * a[2, 5] + a[1, 5] * a[2, 4])
            - a[0, 4] * (a[1, 2] * a[3, 5] - a[1, 3] * a[2, 5] + a[1, 5] * a[2, 3])
            + a[0, 5] * (a[1, 2] * a[3, 4] - a[1, 3] * a[2, 4] + a[1, 4] * a[2, 3])
        )
    total = 0.0
    for j in range(1, n):
        keep = [i for i in range(n) if i not in (0, j)]
        total += (-1) ** (j + 1) * W[0, j] * pfaffian(W[np.ix_(keep, keep)])
    return float(total)


def _symplectic(m: int) -> np.ndarray:
    J = np.zeros((2 * m, 2 * m))
    J[:m, m:] = np.eye(m)
    J[m:, :m] = -np.eye(m)
    return J


def _oriented_null(G: np.ndarray) -> np.ndarray:
    """Orthonormal basis B of ker G with det([G; B^T]) > 0."""
    _, s, Vt = np.linalg.svd(G)
    k = G.shape[0]
    if s[-1] <= 1e-10 * max(1.0, s[0]):
        raise DomainError("constraint gradients are rank deficient here")
    B = Vt[k:].T.copy()
    if np.linalg.det(np.vstack([G, B.T])) < 0:
        B[:, -1] *= -1
    return B


@dataclass
class AbnormalCurve:
    times: np.ndarray
    points: np.ndarray  # (N, 2m) on S
    pfaffian: np.ndarray
    kernels: np.ndarray  # unit kernel vectors (N, 2m)

    @property
    def configuration(self) -> np.ndarray:
        m = self.points.shape[1] // 2
        return self.points[:, :m]

    def to_csv(self, path):
        n = self.points.shape[1]
        m = n // 2
        header = ["t"] + [f"q{i + 1}" for i in range(m)] + [f"p{i + 1}" for i in range(m)]
        header += ["pfaffian"] + [f"k{i + 1}" for i in range(n)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, x, pf, k in zip(self.times, self.points, self.pfaffian, self.kernels):
                w.writerow(["%.17g" % v for v in (t, *x, pf, *k)])


class ConstraintManifold:
    """S = {<p, xi_i(q)> = 0} minus the zero section, for a frame xi_1..xi_k."""

    def __init__(self, frame: Frame, sample_q=None):
        self.frame = frame
        self._sample_q = sample_q
        self.m = frame.dim
        self.k = frame.rank
        self.J = _symplectic(self.m)

    @classmethod
    def from_model(cls, model) -> "ConstraintManifold":
        return cls(model.frame, sample_q=model.sample_q)

    @property
    def dim(self) -> int:
        return 2 * self.m - self.k

    # constraints -----------------------------------------------------------

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * self.m,):
            raise DomainError(f"phase point must have length {2 * self.m}")
        return x[: self.m], x[self.m :]

    def values(self, x) -> np.ndarray:
        q, p = self._split(x)
        X = self.frame.evaluate(q)[0]
        return X @ p

    def gradients(self, x) -> np.ndarray:
        q, p = self._split(x)
        X, DX, _ = self.frame.evaluate(q)
        # d<p, X_i>/dq_a = sum_j dX_ij/dq_a p_j
        return np.hstack([np.einsum("ija,j->ia", DX, p), X])

    def _check_point(self, x):
        q, p = self._split(x)
        if np.linalg.norm(p) <= ZERO_SECTION:
            raise DomainError("point lies on the zero section")
        scale = max(1.0, float(np.linalg.norm(p)))
        if np.max(np.abs(self.values(x))) > CONSTRAINT_TOL * scale:
            raise DomainError("point does not satisfy the constraints")

    def project_momentum(self, x) -> np.ndarray:
        """Orthogonal projection of p onto the annihilator at fixed q (exact, constraints are linear in p)."""
        q, p = self._split(x)
        X = self.frame.evaluate(q)[0]
        p = p - X.T @ np.linalg.solve(X @ X.T, X @ p)
        return np.concatenate([q, p])

    def project(self, x, extra=None, tol: float = 1e-13, maxit: int = 50) -> np.ndarray:
        """Minimal-norm Newton projection onto S (and onto extra = 0 if given)."""
        x = np.array(x, dtype=float)
        for _ in range(maxit):
            r = self.values(x)
            G = self.gradients(x)
            if extra is not None:
                v, g = extra(x)
                r = np.append(r, v)
                G = np.vstack([G, g])
            scale = max(1.0, float(np.linalg.norm(x[self.m :])))
            if np.max(np.abs(r)) < tol * scale:
                break
            x = x - np.linalg.lstsq(G, r, rcond=None)[0]
        else:
            raise NumericalError("projection onto the constraint set did not converge")
        if np.linalg.norm(x[self.m :]) <= ZERO_SECTION:
            raise NumericalError("projection fell onto the zero section")
        return x

    def sample_point(self, rng: np.random.Generator, box=None) -> np.ndarray:
        """Random point of S with a unit annihilating covector.

        q is uniform in ``box`` ((m, 2) bounds), else drawn by the model's
        sampler, else uniform in [-1, 1]^m.
        """
        if box is None and self._sample_q is not None:
            q = np.asarray(self._sample_q(rng), dtype=float)
        else:
            box = np.tile([-1.0, 1.0], (self.m, 1)) if box is None else np.asarray(box, dtype=float).reshape(self.m, 2)
            q = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random(self.m)
        X = self.frame.evaluate(q)[0]
        _, _, Vt = np.linalg.svd(X)
        ann = Vt[self.k :]
        p = rng.standard_normal(ann.shape[0]) @ ann
        return np.concatenate([q, p / np.linalg.norm(p)])

    def probe_segments(self, n: int, box=None, seed: int = 0, length: float = 1.0):
        """Fixed-seed (start, direction) pairs: random points of S moved in q by ``length``.

        The direction has no momentum part; projection onto S carries p
        along, which keeps the segment away from the zero section.
        """
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(n):
            a = self.sample_point(rng, box)
            dq = rng.standard_normal(self.m)
            out.append((a, np.concatenate([length * dq / np.linalg.norm(dq), np.zeros(self.m)])))
        return out

    # restricted form -------------------------------------------------------

    def tangent_basis(self, x) -> np.ndarray:
        """Oriented orthonormal basis of T_xS, shape (2m, 2m - k)."""
        self._check_point(x)
        return _oriented_null(self.gradients(x))

    tangent_basis_S = tangent_basis

    def restricted_form(self, x) -> np.ndarray:
        B = self.tangent_basis(x)
        return B.T @ self.J @ B

    def restricted_form_rank(self, x) -> int:
        W = self.restricted_form(x)
        s = np.linalg.svd(W, compute_uv=False)
        r = int(np.sum(s > RANK_RTOL * s[0])) if s[0] > 0 else 0
        # skew matrices have even rank; singular values come in pairs
        if r % 2:
            r -= 1 if s[r - 1] < 2 * RANK_RTOL * s[0] else -1
        assert r % 2 == 0
        return r

    def pfaffian_at(self, x) -> float:
        """Pf of the restricted form in an oriented orthonormal basis (0 if dim S is odd).

        Defined off S too (using the null space of the constraint gradients),
        so it can be differentiated in ambient coordinates.
        """
        if self.dim % 2:
            return 0.0
        B = _oriented_null(self.gradients(x))
        return pfaffian(B.T @ self.J @ B)

    def pfaffian_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.empty(x.size)
        for i in range(x.size):
            e = np.zeros(x.size)
            e[i] = FD_STEP
            g[i] = (self.pfaffian_at(x + e) - self.pfaffian_at(x - e)) / (2 * FD_STEP)
        return g

    # degeneracy locus and kernel lines ------------------------------------

    def locate_sigma(self, seed, direction, n_samples: int = 64, tol: float = 1e-10) -> np.ndarray:
        """First point of Sigma along the segment seed -> seed + direction, projected to S."""
        if self.dim % 2:
            raise DomainError("dim S is odd: the form degenerates everywhere, there is no hypersurface to locate")
        seed = np.asarray(seed, dtype=float)
        d = np.asarray(direction, dtype=float)

        def point(s):
            return self.project_momentum(seed + s * d)

        def pf(s):
            return self.pfaffian_at(point(s))

        ss = np.linspace(0.0, 1.0, n_samples + 1)
        vals = [pf(s) for s in ss]
        for a, b, fa, fb in zip(ss[:-1], ss[1:], vals[:-1], vals[1:]):
            if fa == 0.0:
                x = point(a)
                break
            if fa * fb < 0:
                s = brentq(pf, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
                x = point(s)
                break
        else:
            raise NoDegeneracyError("the restricted form keeps its sign along the segment: no degeneracy locus crossed")
        if np.linalg.norm(x[self.m :]) <= 1e3 * ZERO_SECTION:
            raise NoDegeneracyError("the only sign change is where the segment meets the zero section")
        x = self.project(x, extra=lambda y: (self.pfaffian_at(y), self.pfaffian_gradient(y)), tol=tol * 1e-3)
        if abs(self.pfaffian_at(x)) >= tol:
            raise NumericalError(f"Pfaffian root not resolved (|Pf| = {abs(self.pfaffian_at(x)):.2e})")
        return x

    def kernel_direction(self, x, previous: Optional[np.ndarray] = None) -> np.ndarray:
        """Unit vector spanning the kernel of the form on T Sigma (or on T S if dim S is odd)."""
        self._check_point(x)
        G = self.gradients(x)
        if self.dim % 2 == 0:
            W = self.restricted_form(x)
            s = np.linalg.svd(W, compute_uv=False)
            if s[-1] > RANK_RTOL * s[0]:
                raise NoDegeneracyError("the restricted form is nondegenerate here: no kernel line")
            G = np.vstack([G, self.pfaffian_gradient(x)])
        C = _oriented_null(G)
        W = C.T @ self.J @ C
        _, s, Vt = np.linalg.svd(W)
        if s.size > 1 and s[-2] <= RANK_RTOL * s[0]:
            raise DomainError(f"kernel has dimension > 1 here (singular values {s[-3:]})")
        v = C @ Vt[-1]
        v /= np.linalg.norm(v)
        if previous is not None:
            if v @ previous < 0:
                v = -v
        elif v[np.argmax(np.abs(v))] < 0:
            v = -v
        return v

    def _sigma_projection(self, x):
        if self.dim % 2:
            return self.project(x)
        return self.project(x, extra=lambda y: (self.pfaffian_at(y), self.pfaffian_gradient(y)))

    def trace_abnormal(self, x0, T: float, h: float = 0.05, sign: float = 1.0, tol: float = 1e-10) -> AbnormalCurve:
        """Follow the kernel line field from x0 for parameter length T.

        RK4 with step doubling; each accepted step is projected back onto
        Sigma.  ``sign`` picks the orientation of the line field at x0.
        """
        if not T > 0:
            raise DomainError("trace length must be positive")
        x = np.asarray(x0, dtype=float)
        v0 = sign * self.kernel_direction(x)
        prev = v0

        def field(y, ref):
            return self.kernel_direction(y, previous=ref)

        def rk4(y, step, ref):
            k1 = field(y, ref)
            k2 = field(y + 0.5 * step * k1, k1)
            k3 = field(y + 0.5 * step * k2, k2)
            k4 = field(y + step * k3, k3)
            return y + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), k4

        times, pts, pfs, ks = [0.0], [x.copy()], [self.pfaffian_at(x)], [v0]
        t = 0.0
        step = min(h, T)
        while t < T - 1e-14:
            step = min(step, T - t)
            full, _ = rk4(x, step, prev)
            half, kh = rk4(x, 0.5 * step, prev)
            half2, _ = rk4(half, 0.5 * step, kh)
            err = float(np.max(np.abs(full - half2)))
            if err > tol and step > 1e-8:
                step *= 0.5
                continue
            x = self._sigma_projection(half2)
            if np.linalg.norm(x[self.m :]) <= ZERO_SECTION:
                raise NumericalError("trace reached the zero section", time=t)
            t += step
            prev = field(x, prev)
            times.append(t)
            pts.append(x.copy())
            pfs.append(self.pfaffian_at(x))
            ks.append(prev)
            if err < tol / 32:
                step = min(2 * step, h)
        return AbnormalCurve(np.array(times), np.array(pts), np.array(pfs), np.array(ks))


def angle_to(v: np.ndarray, axis: np.ndarray) -> float:
    """Angle between the lines spanned by v and axis."""
    c = abs(float(v @ axis)) / (np.linalg.norm(v) * np.linalg.norm(axis))
    return math.acos(min(1.0, c))
