"""Reproduction matrix: every catalog model against every check that applies to it.

Each row carries a target, the measured value, a tolerance, the comparison
used and a method tag.  Rows are keyed "<model> / <quantity>" and evaluated
lazily so that a glob filter skips the work for rows it excludes.
"""
from __future__ import annotations

import fnmatch
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _jit
from . import abnormal as ab
from . import analysis as an
from . import entropy as en
from . import hamiltonian as hm
from . import integrate as ig
from . import models as md

LN_GOLDEN_SQ = math.log((3.0 + math.sqrt(5.0)) / 2.0)

SUSPENSIONS = ([[2, 1], [1, 1]], [[0, 1], [-1, 0]], [[1, 1], [0, 1]])
LIE_CASES = (
    ("lie:h3", {}),
    ("lie:so3", {"sigma": 0.5}),
    ("lie:so3", {"sigma": 1.0}),
    ("lie:so3", {"sigma": 2.0}),
    ("lie:sl2-a", {"sigma": 1.0}),
    ("lie:sl2-b", {"sigma": 1.0}),
    ("lie:solvable-a", {"lambda1": 1.0, "lambda2": 2.0}),
    ("lie:solvable-b", {"phi": 1.0}),
    ("lie:solvable-c", {}),
)
COMPOSITION_PAIRS = (
    ("A, A", [[2, 1], [1, 1]], [[2, 1], [1, 1]]),
    ("A, A^-1", [[2, 1], [1, 1]], [[1, -1], [-1, 2]]),
    ("A, I", [[2, 1], [1, 1]], [[1, 0], [0, 1]]),
    ("A, A^2", [[2, 1], [1, 1]], [[5, 3], [3, 2]]),
    ("R, R", [[0, -1], [1, 0]], [[0, -1], [1, 0]]),
    ("B, B^T", [[1, 1], [0, 1]], [[1, 0], [1, 1]]),
)


def susp_name(A) -> str:
    return "suspension" + str(np.asarray(A).tolist()).replace(" ", "")


def lie_name(name: str, params: dict) -> str:
    if not params:
        return name
    return name + "[" + ",".join(f"{k}={v:g}" for k, v in params.items()) + "]"


@dataclass
class Row:
    key: str
    target: float
    tolerance: float
    comparison: str  # "below", "relative", "absolute", "at_least"
    method: str
    measured: float = float("nan")
    passed: bool = False
    detail: dict = field(default_factory=dict)
    error: Optional[str] = None

    def judge(self):
        m, t, tol = self.measured, self.target, self.tolerance
        if not math.isfinite(m):
            self.passed = False
        elif self.comparison == "below":
            self.passed = m < tol
        elif self.comparison == "relative":
            self.passed = abs(m - t) <= tol * abs(t)
        elif self.comparison == "absolute":
            self.passed = abs(m - t) <= tol
        elif self.comparison == "at_least":
            self.passed = m >= t
        else:
            raise ValueError(self.comparison)

    def as_dict(self) -> dict:
        d = {
            "key": self.key,
            "target": self.target,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "comparison": self.comparison,
            "method": self.method,
            "passed": self.passed,
        }
        if self.detail:
            d["detail"] = self.detail
        if self.error:
            d["error"] = self.error
        return d


@dataclass
class _Check:
    key: str
    target: float
    tolerance: float
    comparison: str
    method: str
    measure: Callable  # (cache) -> float or (float, detail)


class _Cache(dict):
    def get_or(self, key, fn):
        if key not in self:
            self[key] = fn()
        return self[key]


# ---------------------------------------------------------------------------
# measurements shared by several rows


def integrator_quality(seed: int = 0) -> dict:
    """Convergence ratio on torus3, time-reversal error and harmonic energy error."""
    model = md.torus3()
    H = hm.sr_hamiltonian(model)
    x0 = hm.energy_shell_points(model, 1, seed)[0]
    T = 2.0
    cfg = lambda dt: ig.IntegratorConfig(dt=dt, stage_tol=1e-15, stage_maxit=50)
    ref = ig.flow(H, x0, T, cfg(1e-3)).final
    errs = [float(np.linalg.norm(ig.flow(H, x0, T, cfg(dt)).final - ref)) for dt in (0.2, 0.1, 0.05)]
    heis = md.heisenberg()
    Hh = hm.sr_hamiltonian(heis)
    y0 = hm.energy_shell_points(heis, 1, seed)[0]
    fwd = ig.flow(Hh, y0, 10.0, ig.IntegratorConfig(dt=0.01)).final
    back = ig.flow(Hh, fwd, -10.0, ig.IntegratorConfig(dt=0.01)).final
    osc = ig.linear_system([[0.0, 1.0], [-1.0, 0.0]])
    tr = ig.flow(osc, np.array([1.0, 0.0]), 100.0, ig.IntegratorConfig(dt=0.1))
    energy = 0.5 * np.sum(tr.states**2, axis=1)
    return {
        "errors": errs,
        "ratios": [errs[0] / errs[1], errs[1] / errs[2]],
        "reversal": float(np.max(np.abs(back - y0))),
        "harmonic": float(np.max(np.abs(energy - energy[0]))),
    }


def heisenberg_circles(n: int = 20, T: float = 10.0, seed: int = 0) -> dict:
    """Fit circles to the (x1, x3) projections of fixed-seed Heisenberg geodesics."""
    model = md.heisenberg()
    H = hm.sr_hamiltonian(model)
    worst, radii = 0.0, []
    for x0 in hm.energy_shell_points(model, n, seed):
        tr = ig.flow(H, x0, T, ig.IntegratorConfig(dt=0.01))
        _, r, resid = an.circle_fit(tr.states[:, [0, 2]])
        worst = max(worst, resid)
        radii.append(r)
    return {"max_residual": worst, "radii": radii}


def eq9_residual(model, n: int = 1000, seed: int = 0) -> float:
    """max |H_ext - H - I_g| at Gaussian phase points."""
    Hx = hm.riemannian_extension(model)
    H = hm.sr_hamiltonian(model)
    Ig = hm.reeb_momentum(model)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        x = np.concatenate([model.sample_q(rng), rng.standard_normal(model.dim)])
        worst = max(worst, abs(Hx(x) - H(x) - Ig(x)))
    return worst


def abnormal_martinet(T: float = 10.0) -> dict:
    S = ab.ConstraintManifold.from_model(md.martinet())
    x0 = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    k0 = S.kernel_direction(x0)
    curve = S.trace_abnormal(x0, T)
    q = curve.configuration
    cons = max(float(np.max(np.abs(S.values(x)))) for x in curve.points)
    return {
        "max_z": float(np.max(np.abs(q[:, 2]))),
        "max_dy": float(np.max(np.abs(q[:, 1] - q[0, 1]))),
        "x_range": [float(q[:, 0].min()), float(q[:, 0].max())],
        "kernel_angle": max(ab.angle_to(k, np.eye(6)[0]) for k in [k0, *curve.kernels]),
        "constraints": cons,
    }


def abnormal_engel(T: float = 2.0) -> dict:
    S = ab.ConstraintManifold.from_model(md.engel())
    x0 = np.array([0.3, -0.2, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0])
    x0 = S.project_momentum(x0)
    curve = S.trace_abnormal(x0, T)
    q = curve.configuration
    e_w = np.eye(8)[3]
    return {
        "kernel_angle": max(ab.angle_to(k, e_w) for k in curve.kernels),
        "max_other_motion": float(np.max(np.abs(q[:, :3] - q[0, :3]))),
        "w_range": [float(q[:, 3].min()), float(q[:, 3].max())],
    }


def sigma_probe(model, n: int = 100, seed: int = 0) -> dict:
    """How many of n fixed-seed segments on S meet a degeneracy locus."""
    S = ab.ConstraintManifold.from_model(model)
    found, reasons = 0, {}
    for a, d in S.probe_segments(n, seed=seed):
        try:
            S.locate_sigma(a, d)
            found += 1
        except ab.NoDegeneracyError:
            reasons["no sign change"] = reasons.get("no sign change", 0) + 1
        except Exception as exc:  # projection failures count as "not found" but are reported
            reasons[type(exc).__name__] = reasons.get(type(exc).__name__, 0) + 1
    return {"found": found, "reasons": reasons}


# ---------------------------------------------------------------------------
# the matrix


def _checks(seed: int) -> list:
    C = []

    def add(key, target, tol, comparison, method, measure):
        C.append(_Check(key, target, tol, comparison, method, measure))

    # exact entropy and the composition table
    hyp = [[2, 1], [1, 1]]
    add("torus[[2,1],[1,1]] / toral_entropy", LN_GOLDEN_SQ, 1e-12, "absolute", "closed-form", lambda c: en.toral_entropy(hyp))
    for label, f, g in COMPOSITION_PAIRS:
        key = "composition:" + label.replace(" ", "")
        row = lambda c, f=f, g=g, label=label: en.composition_entropy_table([(label, f, g)])[0]
        add(f"{key} / violation", 0.0, 0.5, "below", "closed-form", lambda c, row=row: float(row(c).violation))
    B = lambda c: en.composition_entropy_table([("B, B^T", [[1, 1], [0, 1]], [[1, 0], [1, 1]])])[0]
    add("composition:B,B^T / h(B)+h(B^T)", 0.0, 1e-12, "absolute", "closed-form", lambda c: B(c).h_f + B(c).h_g)
    add("composition:B,B^T / h(BB^T)", LN_GOLDEN_SQ, 1e-12, "absolute", "closed-form", lambda c: B(c).h_fg)

    # spanning counts
    def span(A):
        def run(c):
            e = en.spanning_entropy(A, [0.01], range(4, 15), seed=seed)
            return e.value, {"stderr": e.uncertainty, "counting": e.diagnostics["counting"]}

        return run

    add("torus[[2,1],[1,1]] / spanning", LN_GOLDEN_SQ, 0.15, "relative", "spanning-count", span(hyp))
    add("torus[[1,0],[0,1]] / spanning", 0.0, 0.05, "below", "spanning-count", span([[1, 0], [0, 1]]))
    add("torus[[0,-1],[1,0]] / spanning", 0.0, 0.05, "below", "spanning-count", span([[0, -1], [1, 0]]))

    # suspensions
    for A in SUSPENSIONS:
        name = susp_name(A)
        model = lambda A=A: md.make_suspension_model(A)
        rep = lambda c, A=A, model=model: c.get_or(("verify", str(A)), lambda: an.verify_first_integrals(model(), seed=seed))
        add(f"{name} / brackets", 0.0, 1e-10, "below", "exact-derivatives", lambda c, rep=rep: rep(c).max_bracket)
        add(f"{name} / drift", 0.0, 1e-6, "below", ig.GAUSS4, lambda c, rep=rep: rep(c).max_drift)
        add(f"{name} / rank3_fraction", 0.95, 0.0, "at_least", "svd-rank", lambda c, rep=rep: rep(c).rank_fraction(3))
        add(f"{name} / frame_invariance", 0.0, 1e-12, "below", "gluing-residual", lambda c, model=model: md.verify_frame_invariance(model()))
        reeb = lambda c, A=A, model=model: c.get_or(("reeb", str(A)), lambda: an.reeb_verify(model(), seed=seed))
        add(f"{name} / alpha(nu)", 0.0, 1e-10, "below", "exact-derivatives", lambda c, reeb=reeb: reeb(c)["alpha_nu"])
        add(f"{name} / i_nu dalpha", 0.0, 1e-10, "below", "exact-derivatives", lambda c, reeb=reeb: reeb(c)["i_nu_dalpha"])
        if A == [[2, 1], [1, 1]]:
            add(f"{name} / [nu,xi1]", 0.0, 1e-10, "below", "exact-derivatives", lambda c, reeb=reeb: reeb(c)["nu_xi1"])
            add(f"{name} / [nu,xi2]-ln^2(lambda)xi1", 0.0, 1e-10, "below", "exact-derivatives", lambda c, reeb=reeb: reeb(c)["nu_xi2"])

            def lead(c, model=model):
                spec = an.lyapunov_spectrum(model(), np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]), T=200.0)
                return spec.leading, {"exponents": spec.exponents.tolist()}

            add(f"{name} / h_top", LN_GOLDEN_SQ, 0.02, "relative", "lyapunov", lead)
            prof = lambda v, model=model: (lambda c: an.directional_entropy_profile(model(), v).value)
            add(f"{name} / rho(1,0,0)", LN_GOLDEN_SQ, 0.05, "relative", "lyapunov-proxy", prof((1.0, 0.0, 0.0)))
            for t2 in (-1.0, 1.0):
                for t3 in (-1.0, 1.0):
                    add(f"{name} / rho(0,{t2:+g},{t3:+g})", 0.0, 1e-3, "below", "lyapunov-proxy", prof((0.0, t2, t3)))
        add(f"{name} / reeb_flow_lyapunov", 0.0, 1e-3, "below", "lyapunov", lambda c, reeb=reeb: reeb(c)["reeb_flow_max_exponent"])
        add(f"{name} / eq9", 0.0, 1e-12, "below", "exact", lambda c, model=model: eq9_residual(model(), seed=seed))
        add(f"{name} / no_sigma", 0.0, 0.5, "below", "pfaffian-sign", lambda c, model=model: float(sigma_probe(model(), seed=seed)["found"]))

    # classical examples
    for name in ("torus3", "heisenberg", "martinet", "engel"):
        model = lambda name=name: md.catalog_get(name)
        rep = lambda c, name=name, model=model: c.get_or(("verify", name), lambda: an.verify_first_integrals(model(), seed=seed))
        rank = 1 + len(model().known_integrals)
        add(f"{name} / brackets", 0.0, 1e-10, "below", "exact-derivatives", lambda c, rep=rep: rep(c).max_bracket)
        add(f"{name} / drift", 0.0, 1e-6, "below", ig.GAUSS4, lambda c, rep=rep: rep(c).max_drift)
        add(f"{name} / rank{rank}_fraction", 0.95, 0.0, "at_least", "svd-rank", lambda c, rep=rep, rank=rank: rep(c).rank_fraction(rank))
    for name in ("torus3", "heisenberg"):
        model = lambda name=name: md.catalog_get(name)
        reeb = lambda c, name=name, model=model: c.get_or(("reeb", name), lambda: an.reeb_verify(model(), seed=seed))
        add(f"{name} / alpha(nu)", 0.0, 1e-10, "below", "exact-derivatives", lambda c, reeb=reeb: reeb(c)["alpha_nu"])
        add(f"{name} / i_nu dalpha", 0.0, 1e-10, "below", "exact-derivatives", lambda c, reeb=reeb: reeb(c)["i_nu_dalpha"])
        add(f"{name} / eq9", 0.0, 1e-12, "below", "exact", lambda c, model=model: eq9_residual(model(), seed=seed))
        add(f"{name} / reeb_symmetry", 0.0, 1e-10, "below", "poisson-bracket", lambda c, model=model: hm.reeb_symmetry_check(model(), seed=seed))
        add(f"{name} / no_sigma", 0.0, 0.5, "below", "pfaffian-sign", lambda c, model=model: float(sigma_probe(model(), seed=seed)["found"]))

    def circles(c):
        r = heisenberg_circles(seed=seed)
        return r["max_residual"], {"radii": r["radii"]}

    add("heisenberg / circle_fit", 0.0, 1e-6, "below", "least-squares", circles)

    mart = lambda c: c.get_or("martinet-abnormal", abnormal_martinet)
    add("martinet / abnormal", 0.0, 1e-8, "below", "kernel-trace", lambda c: (max(mart(c)["max_z"], mart(c)["max_dy"]), mart(c)))
    add("martinet / abnormal_kernel", 0.0, 1e-6, "below", "kernel-trace", lambda c: mart(c)["kernel_angle"])
    eng = lambda c: c.get_or("engel-abnormal", abnormal_engel)
    add("engel / abnormal_kernel", 0.0, 1e-6, "below", "kernel-trace", lambda c: eng(c)["kernel_angle"])
    add("engel / abnormal", 0.0, 1e-8, "below", "kernel-trace", lambda c: (eng(c)["max_other_motion"], eng(c)))

    # Lie-Poisson reductions
    for name, params in LIE_CASES:

        def cas(c, name=name, params=params):
            rep = an.verify_first_integrals(md.lie_poisson_model(name, params), seed=seed)
            return rep.drifts["casimir"], {"H_drift": rep.drifts["H"], "dF.rhs": rep.bracket_residuals["dF . rhs"]}

        add(f"{lie_name(name, params)} / casimir", 0.0, 1e-8, "below", ig.GAUSS4, cas)

    # integrator
    iq = lambda c: c.get_or("integrator", lambda: integrator_quality(seed))
    add("integrator / order_ratio_min", 12.0, 0.0, "at_least", ig.GAUSS4, lambda c: (min(iq(c)["ratios"]), {"ratios": iq(c)["ratios"]}))
    add("integrator / order_ratio_max", 0.0, 20.0, "below", ig.GAUSS4, lambda c: max(iq(c)["ratios"]))
    add("integrator / reversal", 0.0, 1e-8, "below", ig.GAUSS4, lambda c: iq(c)["reversal"])
    add("integrator / harmonic", 0.0, 1e-12, "below", ig.GAUSS4, lambda c: iq(c)["harmonic"])
    return C


def check_keys(seed: int = 0) -> list:
    return [c.key for c in _checks(seed)]


def report_bundle(only: Optional[Sequence[str]] = None, seed: int = 0, progress: Optional[Callable] = None) -> dict:
    """Run the matrix (optionally only rows matching any glob in ``only``)."""
    checks = _checks(seed)
    if only:
        checks = [c for c in checks if any(fnmatch.fnmatchcase(c.key, pat) for pat in only)]
    cache = _Cache()
    rows = []
    for chk in checks:
        row = Row(chk.key, chk.target, chk.tolerance, chk.comparison, chk.method)
        try:
            out = chk.measure(cache)
            if isinstance(out, tuple):
                row.measured, row.detail = float(out[0]), out[1]
            else:
                row.measured = float(out)
            row.judge()
        except Exception as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        rows.append(row)
        if progress is not None:
            progress(row)
    return {
        "config": {"seed": seed, "only": list(only) if only else None, "numba": _jit.HAS_NUMBA},
        "rows": [r.as_dict() for r in rows],
        "passed": sum(r.passed for r in rows),
        "failed": sum(not r.passed for r in rows),
    }


def format_table(bundle: dict) -> str:
    rows = bundle["rows"]
    w = max((len(r["key"]) for r in rows), default=10)
    lines = [f"{'check':<{w}}  {'target':>12}  {'measured':>12}  {'tol':>8}  {'method':<20} status"]
    for r in rows:
        status = "PASS" if r["passed"] else ("ERROR" if r.get("error") else "FAIL")
        lines.append(f"{r['key']:<{w}}  {r['target']:>12.6g}  {r['measured']:>12.6g}  {r['tolerance']:>8.2g}  {r['method']:<20} {status}")
    lines.append(f"{bundle['passed']} passed, {bundle['failed']} failed")
    return "\n".join(lines)
