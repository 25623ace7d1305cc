"""Hamiltonians on T*M built from frames, Poisson brackets and Lie-Poisson flows.

Phase vectors are ordered ``x = (q, p)``.  Every Hamiltonian built from a
catalog model carries a ``system`` description so that the compiled
integrator in :mod:`srflows.kernels` can run it.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from . import kernels
from .errors import DomainError
from .models import LiePoissonModel, ModelSpec
from .phase import CotangentScalar, PhasePoint, as_phase, combine

__all__ = [
    "PhasePoint",
    "CotangentScalar",
    "sr_hamiltonian",
    "hamilton_rhs",
    "poisson_bracket",
    "lie_poisson_rhs",
    "lie_poisson_energy",
    "reeb_momentum",
    "riemannian_extension",
    "reeb_symmetry_check",
    "suspension_action",
    "energy_shell_points",
]


def _weighted_quadratic(model: ModelSpec, weights, name: str) -> CotangentScalar:
    """H = 1/2 sum_i w_i <p, X_i>^2 over the rows of the model's kernel."""
    w = np.asarray(weights, dtype=float)
    m = model.dim
    if model.kernel_id >= 0:
        mid, prm = model.kernel_id, np.asarray(model.kernel_prm, dtype=float)
        if w.size != model.kernel_rows:
            raise DomainError(f"{model.name}: expected {model.kernel_rows} weights, got {w.size}")

        def fn(q, p):
            X, DX, D2X = kernels.frame_kernel(mid, q, prm)
            return kernels.quadratic_momentum(X, DX, D2X, w, p)

        ip = np.array([kernels.SYS_QUADRATIC, mid, w.size], dtype=np.int64)
        fp = np.concatenate([w, prm])
        return CotangentScalar(m, fn, name=name, system=(ip, fp))

    fields = list(model.frame.fields)
    if model.reeb_field is not None:
        fields.append(model.reeb_field)
    fields = fields[: w.size]

    def fn(q, p):
        jets = [f.jet(q) for f in fields]
        X = np.array([j[0] for j in jets])
        DX = np.array([j[1] for j in jets])
        D2X = np.array([j[2] for j in jets])
        return kernels.quadratic_momentum(X, DX, D2X, w, p)

    return CotangentScalar(m, fn, name=name)


def _frame_weights(model: ModelSpec, reeb_weight: float) -> np.ndarray:
    rows = model.kernel_rows if model.kernel_id >= 0 else model.rank + (model.reeb_field is not None)
    w = np.zeros(rows)
    w[: model.rank] = 1.0
    if rows > model.rank:
        w[model.rank] = reeb_weight
    return w


def sr_hamiltonian(model: ModelSpec) -> CotangentScalar:
    """H = 1/2 sum_i <p, xi_i(q)>^2 over the orthonormal frame."""
    return _weighted_quadratic(model, _frame_weights(model, 0.0), "H")


def hamilton_rhs(H: CotangentScalar, x) -> tuple:
    """(dH/dp, -dH/dq) at x."""
    x = as_phase(x)
    g = H.gradient(x)
    m = x.dim
    return g[m:], -g[:m]


def poisson_bracket(F: CotangentScalar, G: CotangentScalar, x) -> float:
    """{F, G} = sum_j dF/dq_j dG/dp_j - dF/dp_j dG/dq_j, so that x' = {x, H}."""
    if F.dim != G.dim:
        raise DomainError(f"bracket of functions on different spaces ({F.dim} vs {G.dim})")
    x = as_phase(x)
    m = x.dim
    gf = F.gradient(x)
    gg = G.gradient(x)
    return float(gf[:m] @ gg[m:] - gf[m:] @ gg[:m])


def lie_poisson_rhs(model: LiePoissonModel, m) -> np.ndarray:
    """m_k' = <m, [e_k, dH]> for 2H = <m, xi_1>^2 + <m, xi_2>^2."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3,) or not np.all(np.isfinite(m)):
        raise DomainError("algebra point must be a finite 3-vector")
    ip, fp = model.system
    return kernels.system_rhs(m, ip, fp)


def lie_poisson_energy(model: LiePoissonModel, m) -> float:
    u = model.frame @ np.asarray(m, dtype=float)
    return 0.5 * float(u @ u)


def _require_reeb(model: ModelSpec):
    if model.reeb_field is None:
        raise DomainError(f"{model.name} has no Reeb field")


def reeb_momentum(model: ModelSpec) -> CotangentScalar:
    """I_g = 1/2 <p, nu(q)>^2; the factor 1/2 makes H_g + I_g the extended metric."""
    _require_reeb(model)
    nu = model.reeb_field

    def fn(q, p):
        v, J, Hh = nu.jet(q)
        return kernels.quadratic_momentum(v[None, :], J[None], Hh[None], np.ones(1), p)

    return CotangentScalar(model.dim, fn, name="I_g")


def riemannian_extension(model: ModelSpec, t: float = 1.0) -> CotangentScalar:
    """Hamiltonian of the metric with orthonormal frame (xi_1, .., xi_k, sqrt(t)^-1 nu).

    Equals H_g + t I_g; t = 1 gives the metric in which nu is a unit normal to
    the distribution.
    """
    _require_reeb(model)
    if not t >= 0.0:
        raise DomainError(f"family parameter must be non-negative, got {t}")
    return _weighted_quadratic(model, _frame_weights(model, float(t)), f"H_ext(t={t:g})")


def energy_shell_points(model: ModelSpec, n: int, seed: int = 0, level: float = 0.5) -> np.ndarray:
    """n phase points with H = level: q from the fundamental domain, p Gaussian then rescaled."""
    H = sr_hamiltonian(model)
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        q = model.sample_q(rng)
        p = rng.standard_normal(model.dim)
        h = H(np.concatenate([q, p]))
        if h < 1e-8:
            continue
        out.append(np.concatenate([q, p * np.sqrt(level / h)]))
    return np.array(out)


def reeb_symmetry_check(model: ModelSpec, samples: int = 100, seed: int = 0) -> float:
    """max |{I_g, H}| over points of the unit energy shell."""
    H = sr_hamiltonian(model)
    Ig = reeb_momentum(model)
    return max(abs(poisson_bracket(Ig, H, x)) for x in energy_shell_points(model, samples, seed))


def suspension_action(model: ModelSpec, v) -> CotangentScalar:
    """K = t1 H + t2 I2 + t3 I3 on a suspension, with a compiled system."""
    if not model.is_suspension or model.integral_family is None:
        raise DomainError(f"{model.name} is not a suspension model")
    t1, t2, t3 = (float(c) for c in v)
    H = sr_hamiltonian(model)
    I2, I3 = model.known_integrals[:2]
    K = combine([(t1, H), (t2, I2), (t3, I3)], name=f"K({t1:g},{t2:g},{t3:g})")
    fam, fam_prm = model.integral_family
    prm = np.asarray(model.kernel_prm, dtype=float)
    w = t1 * _frame_weights(model, 0.0)
    ip = np.array([kernels.SYS_SUSPENSION_ACTION, model.kernel_id, w.size, fam, prm.size], dtype=np.int64)
    fp = np.concatenate([w, [t2, t3], prm, np.asarray(fam_prm, dtype=float)])
    K.system = (ip, fp)
    return K
