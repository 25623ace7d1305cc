"""Integrability certificates, Lyapunov spectra, entropy profiles and Reeb checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import diffgeo as dg
from . import kernels
from .entropy import (
    CompositionRow,
    EntropyEstimate,
    composition_entropy_table,
    spanning_entropy,
    toral_entropy,
)
from .errors import DomainError
from .hamiltonian import (
    energy_shell_points,
    lie_poisson_energy,
    lie_poisson_rhs,
    poisson_bracket,
    sr_hamiltonian,
    suspension_action,
)
from .integrate import (
    IntegratorConfig,
    as_system,
    flow,
    flow_with_tangent,
    vector_field_system,
)
from .models import LiePoissonModel, ModelSpec
from .phase import PhasePoint

__all__ = [
    "IntegrabilityReport",
    "LyapunovSpectrum",
    "EntropyEstimate",
    "CompositionRow",
    "verify_first_integrals",
    "independence_rank",
    "lyapunov_spectrum",
    "toral_entropy",
    "spanning_entropy",
    "directional_entropy_profile",
    "composition_entropy_table",
    "reeb_verify",
    "circle_fit",
]

RANK_RTOL = 1e-8


@dataclass
class IntegrabilityReport:
    model: str
    seed: int
    drifts: dict
    bracket_residuals: dict
    rank_histogram: dict
    n_points: int
    n_trajectories: int
    T: float
    domain_exit_times: list = field(default_factory=list)

    @property
    def max_drift(self) -> float:
        return max(self.drifts.values(), default=0.0)

    @property
    def max_bracket(self) -> float:
        return max(self.bracket_residuals.values(), default=0.0)

    def rank_fraction(self, rank: int) -> float:
        total = sum(self.rank_histogram.values())
        return self.rank_histogram.get(rank, 0) / total if total else 0.0

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "seed": self.seed,
            "T": self.T,
            "n_points": self.n_points,
            "n_trajectories": self.n_trajectories,
            "drifts": self.drifts,
            "bracket_residuals": self.bracket_residuals,
            "rank_histogram": {str(k): v for k, v in sorted(self.rank_histogram.items())},
            "domain_exit_times": self.domain_exit_times,
        }


def _all_integrals(model: ModelSpec):
    return [sr_hamiltonian(model)] + list(model.known_integrals)


def independence_rank(model: ModelSpec, x, integrals: Optional[Sequence] = None) -> int:
    """Numerical rank of the stacked phase gradients of H and the known integrals.

    Rows are normalized first, so an integral that is tiny but non-degenerate
    (as near a flat factor) still counts; exactly vanishing rows do not.
    Integrals with a flat factor contribute a positive multiple of their
    gradient, which leaves the rank unchanged.
    """
    fns = list(integrals) if integrals is not None else _all_integrals(model)
    x = PhasePoint.from_array(x) if not isinstance(x, PhasePoint) else x
    G = np.array([F.gradient_direction(x) for F in fns])
    # scale by the largest entry first: flat factors give rows near 1e-250
    # whose squared norm would underflow
    big = np.max(np.abs(G), axis=1)
    keep = big > 0
    if not np.any(keep):
        return 0
    G = G[keep] / big[keep, None]
    G /= np.linalg.norm(G, axis=1)[:, None]
    s = np.linalg.svd(G, compute_uv=False)
    return int(np.sum(s > RANK_RTOL * s[0]))


def verify_first_integrals(
    model,
    n_trajectories: int = 4,
    T: float = 100.0,
    cfg: IntegratorConfig = IntegratorConfig(),
    seed: int = 0,
    n_points: int = 1000,
) -> IntegrabilityReport:
    """Drift of every known integral along fixed-seed flows, plus bracket and rank checks.

    Sample points lie on the energy shell H = 1/2.  For Lie-Poisson models the
    Casimir is checked instead, on its domain.
    """
    if isinstance(model, LiePoissonModel):
        return _verify_casimir(model, n_trajectories, T, cfg, seed, n_points)
    fns = _all_integrals(model)
    pts = energy_shell_points(model, n_points, seed)
    brackets = {}
    for i, F in enumerate(fns):
        for G in fns[i + 1 :]:
            brackets[f"{{{F.name},{G.name}}}"] = max(abs(poisson_bracket(F, G, x)) for x in pts)
    hist: dict = {}
    for x in pts:
        r = independence_rank(model, x, fns)
        hist[r] = hist.get(r, 0) + 1
    H = fns[0]
    drifts = {F.name: 0.0 for F in fns}
    for x in pts[:n_trajectories]:
        traj = flow(H, x, T, cfg, integrals=fns[1:])
        for F in fns:
            key = "H" if F is H else F.name
            drifts[F.name] = max(drifts[F.name], traj.drift(key))
    return IntegrabilityReport(model.name, seed, drifts, brackets, hist, n_points, n_trajectories, T)


def _verify_casimir(model: LiePoissonModel, n_traj, T, cfg, seed, n_points):
    rng = np.random.default_rng(seed)
    pts = model.sample(rng, n_points)
    resid = 0.0
    for m in pts:
        _, dF, _ = model.casimir.evaluate(m)
        resid = max(resid, abs(float(dF @ lie_poisson_rhs(model, m))))
    drifts = {"H": 0.0, "casimir": 0.0}
    exits = []
    for m in pts[:n_traj]:
        traj = flow(model, m, T, cfg)
        drifts["H"] = max(drifts["H"], traj.drift("H"))
        # the Casimir is only defined on the model's domain: stop at the first exit
        inside = np.array([model.domain(s) for s in traj.states]) if model.domain else np.ones(len(traj.times), bool)
        stop = int(np.argmin(inside)) if not inside.all() else len(inside)
        if stop < len(inside):
            exits.append(float(traj.times[stop]))
        c = traj.values["casimir"][:stop]
        drifts["casimir"] = max(drifts["casimir"], float(np.max(np.abs(c - c[0]))))
    return IntegrabilityReport(model.name, seed, drifts, {"dF . rhs": resid}, {}, n_points, n_traj, T, exits)


# ---------------------------------------------------------------------------
# Lyapunov spectra


@dataclass
class LyapunovSpectrum:
    exponents: np.ndarray  # ascending
    horizon: float
    convergence: float  # spread of the running estimates over the last quarter
    fixed_point: bool = False
    norm: str = "coordinate"

    @property
    def leading(self) -> float:
        return float(self.exponents[-1])

    @property
    def flagged(self) -> bool:
        """True when the estimate has not settled to within 10% of the leading exponent."""
        lead = abs(self.leading)
        return lead > 0 and self.convergence > 0.1 * lead

    @property
    def pairing_residual(self) -> float:
        e = self.exponents
        return float(np.max(np.abs(e + e[::-1])))

    def positive_sum(self, floor: float = 0.0) -> float:
        e = self.exponents
        return float(np.sum(e[e > floor]))

    def as_dict(self) -> dict:
        return {
            "exponents": [float(v) for v in self.exponents],
            "horizon": self.horizon,
            "convergence": self.convergence,
            "fixed_point": self.fixed_point,
            "norm": self.norm,
        }


def frame_norm(model: ModelSpec):
    """Phase-space norm in which (xi_1, .., xi_k, nu) is orthonormal.

    Position components are measured in frame coordinates, momentum
    components by their pairings with the frame.  This is a bounded distortion
    of any metric on the compact quotient, unlike the covering coordinates of
    a suspension.
    """
    if model.kernel_id < 0 or model.kernel_rows != model.dim:
        return None
    mid, prm, m = model.kernel_id, np.asarray(model.kernel_prm, dtype=float), model.dim

    def L(x):
        X, _, _ = kernels.frame_kernel(mid, x[:m], prm)
        out = np.zeros((2 * m, 2 * m))
        out[:m, :m] = np.linalg.inv(X.T)
        out[m:, m:] = X
        return out

    return L


def configuration_frame_norm(model: ModelSpec):
    """As :func:`frame_norm` but on M itself (for flows of vector fields)."""
    if model.kernel_id < 0 or model.kernel_rows != model.dim:
        return None
    mid, prm = model.kernel_id, np.asarray(model.kernel_prm, dtype=float)
    return lambda q: np.linalg.inv(kernels.frame_kernel(mid, q, prm)[0].T)


def _spectrum(system, x0, T, cfg, norm, basis, norm_name, reduce=None):
    _, growth = flow_with_tangent(system, x0, T, cfg, norm=norm, basis=basis, reduce=reduce)
    hist = growth.history
    if hist.shape[0] >= 4:
        tail = hist[-max(2, hist.shape[0] // 4) :]
        conv = float(np.max(tail.max(axis=0) - tail.min(axis=0)))
    else:
        conv = float("nan") if not growth.fixed_point else 0.0
    return LyapunovSpectrum(np.sort(growth.rates), T, conv, growth.fixed_point, norm_name)


def lyapunov_spectrum(
    model: ModelSpec,
    x0,
    T: float = 200.0,
    cfg: IntegratorConfig = IntegratorConfig(dt=0.01),
    hamiltonian=None,
    basis: Optional[np.ndarray] = None,
) -> LyapunovSpectrum:
    """Lyapunov exponents of the geodesic flow (or of ``hamiltonian``) from x0."""
    H = hamiltonian if hamiltonian is not None else sr_hamiltonian(model)
    L = frame_norm(model)
    return _spectrum(H, x0, T, cfg, L, basis, "frame" if L is not None else "coordinate", _reducer(model))


def _reducer(model: ModelSpec):
    return model.quotient.reduce_phase if model.is_suspension else None


def _suspension_V_seeds():
    return [np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]), np.array([0.0, 0.0, 0.0, 0.0, 0.0, -1.0])]


def directional_entropy_profile(
    model: ModelSpec,
    v,
    T: float = 200.0,
    cfg: IntegratorConfig = IntegratorConfig(dt=0.01),
) -> EntropyEstimate:
    """Entropy along t1 sgrad H + t2 sgrad I2 + t3 sgrad I3, via Lyapunov exponents.

    The flow is followed on the invariant set {p' = p'' = 0, p3 = +-1}, with
    tangent vectors along that set; the value is the larger of the two sums
    of positive exponents.  This is a proxy for the entropy carried by those
    invariant measures, not a full topological entropy computation.
    """
    if not isinstance(model, ModelSpec) or not model.is_suspension:
        raise DomainError("directional entropy profile needs a suspension model")
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise DomainError("direction must be three finite numbers")
    diag = {"direction": v.tolist(), "T": T, "dt": cfg.dt, "seeds": []}
    if not np.any(v):
        return EntropyEstimate(0.0, "lyapunov-proxy", 0.0, diag)
    K = suspension_action(model, v)
    L = frame_norm(model)
    basis = np.vstack([np.eye(3), np.zeros((3, 3))])
    best, unc = 0.0, 0.0
    for x0 in _suspension_V_seeds():
        spec = _spectrum(K, x0, T, cfg, L, basis, "frame", _reducer(model))
        s = spec.positive_sum()
        diag["seeds"].append({"x0": x0.tolist(), "exponents": spec.exponents.tolist(), "convergence": spec.convergence})
        if s >= best:
            best, unc = s, spec.convergence
    return EntropyEstimate(best, "lyapunov-proxy", unc if math.isfinite(unc) else 0.0, diag)


# ---------------------------------------------------------------------------
# Reeb field checks


def reeb_verify(
    model: ModelSpec,
    samples: int = 100,
    seed: int = 0,
    T_flow: float = 1e4,
    flow_dt: float = 10.0,
) -> dict:
    """Residuals of the Reeb identities and Lyapunov exponents of the Reeb flow."""
    alpha, nu = model.contact_form, model.reeb_field
    if alpha is None or nu is None:
        raise DomainError(f"{model.name} lacks a contact form or Reeb field")
    rng = np.random.default_rng(seed)
    xi = model.frame.fields
    tag = model.quotient.monodromy.case_tag if model.is_suspension else None
    out = {"alpha_nu": 0.0, "i_nu_dalpha": 0.0}
    if tag == "hyperbolic":
        out.update(nu_xi1=0.0, nu_xi2=0.0)
    if tag == "parabolic":
        out["nu_form"] = 0.0
    c = model.parameters.get("ln_lambda")
    for _ in range(samples):
        q = model.sample_q(rng)
        out["alpha_nu"] = max(out["alpha_nu"], abs(alpha.pair(nu, q) - 1.0))
        out["i_nu_dalpha"] = max(out["i_nu_dalpha"], *(abs(dg.exterior_two_form(alpha, nu, f, q)) for f in xi))
        if tag == "hyperbolic":
            out["nu_xi1"] = max(out["nu_xi1"], float(np.linalg.norm(dg.commutator(nu, xi[0], q))))
            r = dg.commutator(nu, xi[1], q) - c * c * xi[0](q)
            out["nu_xi2"] = max(out["nu_xi2"], float(np.linalg.norm(r)))
        if tag == "parabolic":
            w = nu(q) - dg.commutator(xi[0], xi[1], q)
            F = np.array([xi[0](q), xi[1](q), nu(q)])
            a = np.linalg.solve(F.T, w)
            out["nu_form"] = max(out["nu_form"], float(np.hypot(a[1], a[2])))
    if model.kernel_id >= 0 and model.kernel_rows == model.dim:
        sys = vector_field_system(model.kernel_id, model.kernel_prm, [0.0] * model.rank + [1.0], model.dim)
        cfg = IntegratorConfig(dt=flow_dt, renorm_interval=flow_dt)
        spec = _spectrum(sys, model.sample_q(rng), T_flow, cfg, configuration_frame_norm(model), None, "frame")
        out["reeb_flow_exponents"] = spec.exponents.tolist()
        out["reeb_flow_max_exponent"] = float(np.max(np.abs(spec.exponents)))
        out["reeb_flow_horizon"] = T_flow
    return out


# ---------------------------------------------------------------------------
# geometry of projected geodesics


def circle_fit(points: np.ndarray) -> tuple:
    """Least-squares circle through planar points: (center, radius, max radial residual)."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] < 3:
        raise DomainError("need at least three planar points")
    shift = P.mean(axis=0)
    Q = P - shift
    A = np.column_stack([2 * Q, np.ones(len(Q))])
    b = np.sum(Q * Q, axis=1)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    c = sol[:2]
    R = math.sqrt(sol[2] + c @ c)
    resid = float(np.max(np.abs(np.linalg.norm(Q - c, axis=1) - R)))
    return c + shift, R, resid
