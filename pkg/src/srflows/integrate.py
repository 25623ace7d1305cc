"""Flows of Hamiltonian, Lie-Poisson and plain vector-field systems.

The default scheme is 2-stage Gauss-Legendre collocation (order 4,
symplectic, time-symmetric).  scipy's RK45 serves as an adaptive reference.
Integration always happens on the covering space; wrapping by periodicity or
monodromy is applied only when reporting section crossings.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import kernels
from .errors import DomainError, NumericalError
from .models import LiePoissonModel, QuotientData
from .phase import CotangentScalar, PhasePoint, as_phase

_log = logging.getLogger(__name__)

GAUSS4 = "symplectic-gauss4"
ADAPTIVE = "adaptive-embedded-5(4)"


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = GAUSS4
    dt: float = 1e-3
    rtol: float = 1e-10
    atol: float = 1e-12
    stage_tol: float = 1e-12
    stage_maxit: int = 25
    renorm_interval: float = 1.0
    transient_fraction: float = 0.1
    max_samples: int = 2000

    def __post_init__(self):
        if self.scheme not in (GAUSS4, ADAPTIVE):
            raise DomainError(f"unknown scheme '{self.scheme}'")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not (self.rtol > 0 and self.atol > 0 and self.stage_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.stage_maxit < 1 or self.max_samples < 2:
            raise DomainError("stage_maxit >= 1 and max_samples >= 2 required")
        if not self.renorm_interval > 0 or not 0 <= self.transient_fraction < 1:
            raise DomainError("renorm_interval > 0 and 0 <= transient_fraction < 1 required")


@dataclass(frozen=True)
class OdeSystem:
    """x' = f(x) described for the compiled kernels, or by Python callables.

    ``observables`` are (name, fn(x) -> float) pairs recorded along flows.
    """

    dim: int
    ip: Optional[np.ndarray] = None
    fp: Optional[np.ndarray] = None
    rhs: Optional[Callable] = None
    jac: Optional[Callable] = None
    observables: tuple = ()
    name: str = ""

    @property
    def compiled(self) -> bool:
        return self.ip is not None

    def f(self, x):
        if self.compiled:
            return kernels.system_rhs(np.asarray(x, dtype=float), self.ip, self.fp)
        return self.rhs(x)

    def J(self, x):
        if self.compiled:
            return kernels.system_jac(np.asarray(x, dtype=float), self.ip, self.fp)
        return self.jac(x)


def hamiltonian_system(H: CotangentScalar, integrals: Sequence[CotangentScalar] = ()) -> OdeSystem:
    obs = tuple([("H", H)] + [(I.name or f"I{i + 2}", I) for i, I in enumerate(integrals)])
    n = 2 * H.dim
    if H.system is not None:
        ip, fp = H.system
        return OdeSystem(n, ip=ip, fp=fp, observables=obs, name=H.name)
    m = H.dim

    def rhs(x):
        g = H.evaluate(PhasePoint.from_array(x))[1]
        return np.concatenate([g[m:], -g[:m]])

    def jac(x):
        h = H.evaluate(PhasePoint.from_array(x))[2]
        return np.vstack([h[m:], -h[:m]])

    return OdeSystem(n, rhs=rhs, jac=jac, observables=obs, name=H.name)


def lie_poisson_system(model: LiePoissonModel) -> OdeSystem:
    ip, fp = model.system
    obs = (
        ("H", lambda m: 0.5 * float(np.sum((model.frame @ m) ** 2))),
        ("casimir", lambda m: model.casimir(m)),
    )
    return OdeSystem(3, ip=ip, fp=fp, observables=obs, name=model.name)


def linear_system(M) -> OdeSystem:
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    ip = np.array([kernels.SYS_LINEAR, n], dtype=np.int64)
    return OdeSystem(n, ip=ip, fp=M.ravel().copy(), name="linear")


def vector_field_system(model_id: int, prm, coefficients, dim: int) -> OdeSystem:
    """x' = sum_r c_r X_r(x) over rows of a compiled catalog frame."""
    c = np.asarray(coefficients, dtype=float)
    ip = np.array([kernels.SYS_VECTOR_FIELD, model_id, c.size], dtype=np.int64)
    fp = np.concatenate([c, np.asarray(prm, dtype=float)])
    return OdeSystem(dim, ip=ip, fp=fp, name="vector field")


def as_system(obj, integrals: Sequence[CotangentScalar] = ()) -> OdeSystem:
    if isinstance(obj, OdeSystem):
        return obj
    if isinstance(obj, CotangentScalar):
        return hamiltonian_system(obj, integrals)
    if isinstance(obj, LiePoissonModel):
        return lie_poisson_system(obj)
    raise DomainError(f"cannot integrate object of type {type(obj).__name__}")


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    values: dict = field(default_factory=dict)
    scheme: str = GAUSS4

    def __post_init__(self):
        d = np.diff(self.times)
        if d.size and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("trajectory times must be strictly monotone")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def drift(self, name: str, relative: bool = False) -> float:
        v = self.values[name]
        d = float(np.max(np.abs(v - v[0])))
        return d / max(abs(float(v[0])), 1.0) if relative else d

    def to_csv(self, path, labels: Optional[Sequence[str]] = None):
        n = self.states.shape[1]
        if labels is None:
            m = n // 2
            labels = [f"q{i + 1}" for i in range(m)] + [f"p{i + 1}" for i in range(m)] if n % 2 == 0 else [f"x{i + 1}" for i in range(n)]
        header = ["t", *labels, *self.values.keys()]
        cols = [self.times, *self.states.T, *self.values.values()]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in zip(*cols):
                w.writerow(["%.17g" % v for v in row])


def _observe(sys: OdeSystem, states: np.ndarray) -> dict:
    out = {}
    for name, fn in sys.observables:
        out[name] = np.array([float(fn(s)) for s in states])
    return out


def _steps(T: float, dt: float) -> tuple:
    n = max(1, int(math.ceil(abs(T) / dt - 1e-9)))
    return n, math.copysign(abs(T) / n, T)


def _py_rhs(sys):
    return lambda x, ip, fp: sys.f(x)


def _py_jac(sys):
    return lambda x, ip, fp: sys.J(x)


def _gauss4_python_run(sys, x0, h, nsteps, stride, tol, maxit):
    stages = kernels.stages_for(_py_rhs(sys), _py_jac(sys))
    dummy_i, dummy_f = np.zeros(1, np.int64), np.zeros(1)
    x = x0.copy()
    comp = np.zeros_like(x)
    out = [x.copy()]
    for s in range(nsteps):
        k1, k2, ok = stages(x, h, dummy_i, dummy_f, tol, maxit)
        if not ok:
            return np.array(out), s
        y = h * 0.5 * (k1 + k2) - comp
        t = x + y
        comp = (t - x) - y
        x = t
        if not np.all(np.isfinite(x)):
            return np.array(out), s
        if (s + 1) % stride == 0 or s + 1 == nsteps:
            out.append(x.copy())
    return np.array(out), -1


def _gauss4(sys: OdeSystem, x0: np.ndarray, h: float, nsteps: int, stride: int, cfg: IntegratorConfig):
    if sys.compiled:
        states, nrec, failed = kernels.gauss4_run(
            x0, sys.ip, sys.fp, h, nsteps, stride, cfg.stage_tol, cfg.stage_maxit
        )
        states = states[:nrec]
    else:
        states, failed = _gauss4_python_run(sys, x0, h, nsteps, stride, cfg.stage_tol, cfg.stage_maxit)
    if failed >= 0:
        raise NumericalError(
            f"implicit stage solver failed or state became non-finite at t = {failed * h:.6g}", time=failed * h
        )
    return states


def _sample_times(nsteps, stride, h):
    idx = list(range(0, nsteps + 1, stride))
    if idx[-1] != nsteps:
        idx.append(nsteps)
    return np.array(idx, dtype=float) * h


def flow(H, x0, T: float, cfg: IntegratorConfig = IntegratorConfig(), integrals: Sequence = (), stride: Optional[int] = None) -> Trajectory:
    """Integrate from x0 for time T (negative T runs backward)."""
    sys = as_system(H, integrals)
    x0 = np.asarray(x0.x if isinstance(x0, PhasePoint) else x0, dtype=float)
    if x0.size != sys.dim or not np.all(np.isfinite(x0)):
        raise DomainError(f"initial state must be a finite vector of length {sys.dim}")
    if T == 0 or not math.isfinite(T):
        raise DomainError("flow time must be finite and non-zero")
    if cfg.scheme == ADAPTIVE:
        return _adaptive_flow(sys, x0, T, cfg)
    nsteps, h = _steps(T, cfg.dt)
    if stride is None:
        stride = max(1, int(math.ceil(nsteps / (cfg.max_samples - 1))))
    states = _gauss4(sys, x0, h, nsteps, stride, cfg)
    times = _sample_times(nsteps, stride, h)
    return Trajectory(times, states, _observe(sys, states), GAUSS4)


def _adaptive_flow(sys, x0, T, cfg):
    n = cfg.max_samples
    t_eval = np.linspace(0.0, T, n)
    sol = solve_ivp(lambda t, x: sys.f(x), (0.0, T), x0, method="RK45", rtol=cfg.rtol, atol=cfg.atol, t_eval=t_eval)
    if sol.status != 0:
        t_fail = float(sol.t[-1]) if sol.t.size else 0.0
        raise NumericalError(f"adaptive integration failed at t = {t_fail:.6g}: {sol.message}", time=t_fail)
    states = sol.y.T.copy()
    return Trajectory(sol.t.copy(), states, _observe(sys, states), ADAPTIVE)


# ---------------------------------------------------------------------------
# tangent flow


@dataclass
class TangentGrowth:
    """Accumulated log-growth of an orthonormalized tangent basis.

    ``rates`` are the per-direction averages over the retained window, in the
    order produced by QR (largest first, generically).  ``history`` holds the
    running averages at each renormalization, for convergence diagnostics.
    """

    rates: np.ndarray
    history: np.ndarray
    history_times: np.ndarray
    horizon: float
    retained: float
    fixed_point: bool = False


def _tangent_python(sys, x, Y, h, nsteps, cfg):
    stages = kernels.stages_for(_py_rhs(sys), _py_jac(sys))
    di, df = np.zeros(1, np.int64), np.zeros(1)
    n = x.size
    eye = np.eye(n)
    for s in range(nsteps):
        k1, k2, ok = stages(x, h, di, df, cfg.stage_tol, cfg.stage_maxit)
        if not ok:
            return x, Y, s
        y1 = x + h * (kernels.A11 * k1 + kernels.A12 * k2)
        y2 = x + h * (kernels.A21 * k1 + kernels.A22 * k2)
        J1, J2 = sys.J(y1), sys.J(y2)
        M = np.block([[eye - h * kernels.A11 * J1, -h * kernels.A12 * J1], [-h * kernels.A21 * J2, eye - h * kernels.A22 * J2]])
        dK = np.linalg.solve(M, np.vstack([J1 @ Y, J2 @ Y]))
        Y = Y + h * 0.5 * (dK[:n] + dK[n:])
        x = x + h * 0.5 * (k1 + k2)
        if not np.all(np.isfinite(x)):
            return x, Y, s
    return x, Y, -1


def _tangent_chunk(sys, x, Y, h, nsteps, cfg):
    if sys.compiled:
        return kernels.gauss4_tangent_run(
            x, Y, sys.ip, sys.fp, h, nsteps, cfg.stage_tol, cfg.stage_maxit
        )
    return _tangent_python(sys, x, Y, h, nsteps, cfg)


def flow_with_tangent(
    H,
    x0,
    T: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    norm: Optional[Callable] = None,
    integrals: Sequence = (),
    basis: Optional[np.ndarray] = None,
    reduce: Optional[Callable] = None,
) -> tuple:
    """Co-integrate the linearized flow and accumulate Lyapunov growth rates.

    ``norm(x)`` returns a matrix L so that tangent lengths are measured as
    ||L v||; by default the coordinate norm is used.  Returns
    ``(trajectory, TangentGrowth)``; the trajectory is sampled at
    renormalization instants.  ``basis`` (n x k) restricts the tangent flow to
    an invariant subspace spanned by its columns.  ``reduce(x)`` may return
    ``(x', D)`` to move the state by a symmetry of the system (D its
    derivative, or None); it is applied at renormalization instants and keeps
    covering-space coordinates bounded.
    """
    sys = as_system(H, integrals)
    x = np.asarray(x0.x if isinstance(x0, PhasePoint) else x0, dtype=float).copy()
    if x.size != sys.dim or not np.all(np.isfinite(x)):
        raise DomainError(f"initial state must be a finite vector of length {sys.dim}")
    if not T > 0:
        raise DomainError("tangent flow needs T > 0")
    n = sys.dim
    Y0 = np.eye(n) if basis is None else np.asarray(basis, dtype=float)
    if Y0.ndim != 2 or Y0.shape[0] != n:
        raise DomainError(f"tangent basis must have {n} rows")
    f0 = sys.f(x)
    if not np.any(f0):
        # a fixed point: the linear flow exp(tJ) grows at the real parts of J's spectrum
        Qb = np.linalg.qr(Y0)[0]
        ev = np.linalg.eigvals(Qb.T @ sys.J(x) @ Qb)
        rates = np.sort(ev.real)[::-1]
        traj = Trajectory(np.array([0.0, T]), np.array([x, x]), _observe(sys, np.array([x, x])))
        return traj, TangentGrowth(rates, rates[None, :], np.array([T]), T, T, fixed_point=True)

    interval = max(cfg.renorm_interval, cfg.dt)
    nchunks = max(1, int(math.ceil(T / interval - 1e-9)))
    chunk_T = T / nchunks
    steps_per, h = _steps(chunk_T, cfg.dt)
    t_skip = cfg.transient_fraction * T
    L = norm if norm is not None else (lambda x: np.eye(n))
    Lx = L(x)
    Q = np.linalg.qr(Lx @ Y0)[0]
    Y = np.linalg.solve(Lx, Q)
    logsum = np.zeros(Y0.shape[1])
    kept = 0.0
    hist, hist_t = [], []
    times, states = [0.0], [x.copy()]
    t = 0.0
    for c in range(nchunks):
        x, Y, failed = _tangent_chunk(sys, x, Y, h, steps_per, cfg)
        if failed >= 0:
            tf = t + failed * h
            raise NumericalError(f"tangent flow failed at t = {tf:.6g}", time=tf)
        t += chunk_T
        if reduce is not None:
            x, D = reduce(x)
            if D is not None:
                Y = D @ Y
        Lx = L(x)
        Q, R = np.linalg.qr(Lx @ Y)
        d = np.abs(np.diag(R))
        if np.any(d == 0) or not np.all(np.isfinite(d)):
            raise NumericalError(f"tangent basis collapsed at t = {t:.6g}", time=t)
        Y = np.linalg.solve(Lx, Q)
        if t > t_skip + 1e-12:
            logsum += np.log(d)
            kept += chunk_T
            hist.append(logsum / kept)
            hist_t.append(t)
        times.append(t)
        states.append(x.copy())
    if kept == 0.0:
        raise DomainError("horizon too short: every renormalization fell in the discarded transient")
    states = np.array(states)
    traj = Trajectory(np.array(times), states, _observe(sys, states))
    return traj, TangentGrowth(logsum / kept, np.array(hist), np.array(hist_t), T, kept)


# ---------------------------------------------------------------------------
# Poincare sections


@dataclass(frozen=True)
class SectionSpec:
    """Crossings of s(x) through its levels.

    ``period`` makes every level ``offset + k * period`` a section (e.g. an
    angle or the suspension coordinate); without it only ``offset`` is.
    ``direction`` restricts to increasing (+1) or decreasing (-1) crossings.
    ``quotient`` wraps reported points; for a monodromy the crossing level is
    used as the gluing count.
    """

    s: CotangentScalar
    direction: int = 0
    period: Optional[float] = None
    offset: float = 0.0
    quotient: Optional[QuotientData] = None

    def level_index(self, v: float) -> int:
        if self.period is None:
            return 0 if v < self.offset else 1
        return int(math.floor((v - self.offset) / self.period))

    def level_value(self, below: int, above: int) -> float:
        if self.period is None:
            return self.offset
        return self.offset + max(below, above) * self.period


@dataclass
class SectionResult:
    crossings: list  # (time, PhasePoint) after wrapping
    raw: list  # (time, covering-space state)
    skipped_tangential: int = 0


def _single_step(sys, x, tau, cfg):
    if tau == 0.0:
        return x.copy()
    return _gauss4(sys, x, tau, 1, 1, cfg)[-1]


def poincare_crossings(H, section: SectionSpec, x0, n_crossings: int, cfg: IntegratorConfig = IntegratorConfig(),
                       t_max: float = 1e4, chunk_steps: int = 2000, tol: float = 1e-10) -> SectionResult:
    """Locate successive crossings of a section along the symplectic flow.

    Each crossing is bracketed between steps, estimated on the cubic Hermite
    interpolant and then polished by Newton on the exact one-step map until
    |s - level| < tol.  Crossings with |ds/dt| < 1e-8 are skipped.
    """
    if cfg.scheme != GAUSS4:
        raise DomainError("sections are located on the symplectic scheme")
    sys = as_system(H)
    x = np.asarray(as_phase(x0).x, dtype=float)
    s = section.s
    if s.dim * 2 != sys.dim:
        raise DomainError("section function lives on a different phase space")

    def sval(y):
        v, g, _ = s.evaluate(PhasePoint.from_array(y))
        return v, float(g @ sys.f(y))

    v0, d0 = sval(x)
    if abs(d0) < 1e-12:
        raise DomainError("section function is stationary at the seed (it behaves like a first integral there)")
    h = cfg.dt
    out, raw = [], []
    skipped = 0
    t = 0.0
    prev_x, prev_v, prev_d = x, v0, d0
    while len(out) < n_crossings and t < t_max:
        steps = min(chunk_steps, max(1, int(math.ceil((t_max - t) / h))))
        states = _gauss4(sys, prev_x, h, steps, 1, cfg)
        for k in range(1, states.shape[0]):
            y = states[k]
            v, d = sval(y)
            i0, i1 = section.level_index(prev_v), section.level_index(v)
            if i0 != i1 and (section.direction == 0 or np.sign(v - prev_v) == section.direction):
                level = section.level_value(i0, i1)
                tau, xc, dc = _refine(sys, s, prev_x, prev_v, prev_d, v, d, level, h, cfg, tol)
                tc = t + (k - 1) * h + tau
                if abs(dc) < 1e-8:
                    skipped += 1
                    _log.warning("tangential section crossing at t = %.6g skipped", tc)
                elif tc > 1e-12:
                    raw.append((tc, xc))
                    wrapped = xc
                    if section.quotient is not None:
                        lvl = None
                        if section.quotient.monodromy is not None and section.period is not None:
                            lvl = int(round((level - section.offset) / section.period))
                        wrapped = section.quotient.wrap_phase(xc, level=lvl)
                    out.append((tc, PhasePoint.from_array(wrapped)))
                    if len(out) >= n_crossings:
                        break
            prev_x, prev_v, prev_d = y, v, d
        t += (states.shape[0] - 1) * h
    if not out:
        raise NumericalError(f"no section crossing found within t = {t_max:g}", time=t)
    return SectionResult(out, raw, skipped)


def _refine(sys, s, xa, va, da, vb, db, level, h, cfg, tol):
    """Crossing time within one step, then Newton on the single-step map."""

    def hermite(tau):
        u = tau / h
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        return h00 * va + h10 * h * da + h01 * vb + h11 * h * db - level

    fa, fb = hermite(0.0), hermite(h)
    if fa == 0.0:
        tau = 0.0
    elif fa * fb < 0:
        tau = brentq(hermite, 0.0, h, xtol=1e-15)
    else:
        tau = h * (level - va) / (vb - va)
    xc = _single_step(sys, xa, tau, cfg)
    for _ in range(20):
        v, g, _ = s.evaluate(PhasePoint.from_array(xc))
        dv = float(g @ sys.f(xc))
        r = v - level
        if abs(r) < tol * max(1.0, abs(level)):
            return tau, xc, dv
        if dv == 0.0:
            break
        tau -= r / dv
        xc = _single_step(sys, xa, tau, cfg)
    v, g, _ = s.evaluate(PhasePoint.from_array(xc))
    dv = float(g @ sys.f(xc))
    if abs(v - level) >= tol * max(1.0, abs(level)) and abs(dv) >= 1e-8:
        raise NumericalError(f"crossing refinement did not reach |s - level| < {tol:g}")
    return tau, xc, dv
