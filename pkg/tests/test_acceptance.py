"""Acceptance suite: one check per reproduction criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line with the measured
numbers, visible even under pytest's output capture.  Run the file directly
(``python3 tests/test_acceptance.py``) to get just the twelve lines.
"""
import math
import sys

import numpy as np
import pytest

from srflows import abnormal as ab
from srflows import analysis as an
from srflows import hamiltonian as ham
from srflows import integrate as ig
from srflows import models

LN_GOLDEN = math.log((3.0 + math.sqrt(5.0)) / 2.0)
CASES = {
    "hyperbolic": [[2, 1], [1, 1]],
    "elliptic": [[0, 1], [-1, 0]],
    "parabolic": [[1, 1], [0, 1]],
}
V_POINT = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0])

_capture = None


@pytest.fixture(autouse=True)
def _grab_capture(request):
    global _capture
    _capture = request.config.pluginmanager.getplugin("capturemanager")
    yield
    _capture = None


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}  {detail}"
    if _capture is not None:
        with _capture.global_and_fixture_disabled():
            print("\n" + line, flush=True)
    else:
        print(line, flush=True)
    assert ok, line


def test_criterion_01_exact_entropy():
    h = an.toral_entropy([[2, 1], [1, 1]])
    err = abs(h - LN_GOLDEN)
    verdict(1, err < 1e-12, f"h_top(A) = {h!r}, |error| = {err:.2e} (tol 1e-12)")


def test_criterion_02_flow_entropy():
    m = models.make_suspension_model(CASES["hyperbolic"])
    spec = an.lyapunov_spectrum(m, V_POINT, T=200.0)
    rel = abs(spec.leading - LN_GOLDEN) / LN_GOLDEN
    verdict(2, rel < 0.02, f"leading exponent {spec.leading:.6f} vs {LN_GOLDEN:.6f}, rel error {rel:.2e} (tol 2%)")


def test_criterion_03_spanning_estimator():
    cat = an.spanning_entropy([[2, 1], [1, 1]], [0.01], range(4, 15)).value
    ident = an.spanning_entropy([[1, 0], [0, 1]], [0.01], range(4, 15)).value
    rot = an.spanning_entropy([[0, 1], [-1, 0]], [0.01], range(4, 15)).value
    rel = abs(cat - LN_GOLDEN) / LN_GOLDEN
    ok = rel < 0.15 and ident < 0.05 and rot < 0.05
    verdict(3, ok, f"cat map {cat:.4f} (rel {rel:.3f}, tol 0.15); identity {ident:.2e}, rotation {rot:.2e} (tol 0.05)")


def test_criterion_04_suspension_integrability():
    parts, ok = [], True
    for label, A in CASES.items():
        rep = an.verify_first_integrals(models.make_suspension_model(A), n_trajectories=4, T=100.0,
                                        cfg=ig.IntegratorConfig(dt=1e-3), n_points=1000)
        frac = rep.rank_fraction(3)
        good = rep.max_bracket < 1e-10 and rep.max_drift < 1e-6 and frac >= 0.95
        ok &= good
        parts.append(f"{label}: bracket {rep.max_bracket:.1e} drift {rep.max_drift:.1e} rank3 {frac:.3f}")
    verdict(4, ok, "; ".join(parts) + " (tol 1e-10, 1e-6, 0.95)")


def test_criterion_05_casimirs():
    cases = [("lie:h3", {})] + [("lie:so3", {"sigma": s}) for s in (0.5, 1.0, 2.0)]
    cases += [("lie:sl2-a", {"sigma": 1.0}), ("lie:solvable-a", {"lambda1": 1.0, "lambda2": 2.0})]
    worst, name = 0.0, ""
    for key, prm in cases:
        rep = an.verify_first_integrals(models.lie_poisson_model(key, prm), n_trajectories=4, T=100.0,
                                        cfg=ig.IntegratorConfig(dt=1e-3), n_points=200)
        if rep.max_drift >= worst:
            worst, name = rep.max_drift, rep.model
    verdict(5, worst < 1e-8, f"worst Casimir drift {worst:.2e} ({name}) over {len(cases)} algebras (tol 1e-8)")


def test_criterion_06_heisenberg_circles():
    m = models.heisenberg()
    H = ham.sr_hamiltonian(m)
    pts = ham.energy_shell_points(m, 20, seed=0)
    worst = 0.0
    for x0 in pts:
        tr = ig.flow(H, x0, 10.0, ig.IntegratorConfig(dt=0.01))
        worst = max(worst, an.circle_fit(tr.states[:, [0, 2]])[2])
    verdict(6, worst < 1e-6, f"max radial residual {worst:.2e} over 20 geodesics (tol 1e-6)")


def test_criterion_07_reeb_identities():
    parts, ok = [], True
    for label, A in CASES.items():
        m = models.make_suspension_model(A)
        inv = models.verify_frame_invariance(m)
        r = an.reeb_verify(m, samples=100)
        ids = max(r["alpha_nu"], r["i_nu_dalpha"], r.get("nu_xi1", 0.0), r.get("nu_xi2", 0.0))
        lyap = r["reeb_flow_max_exponent"]
        good = inv < 1e-12 and ids < 1e-10 and lyap < 1e-3
        ok &= good
        parts.append(f"{label}: invariance {inv:.1e} identities {ids:.1e} nu-flow {lyap:.1e}")
    verdict(7, ok, "; ".join(parts) + " (tol 1e-12, 1e-10, 1e-3)")


def test_criterion_08_abnormal():
    S = ab.ConstraintManifold.from_model(models.martinet())
    x0 = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    curve = S.trace_abnormal(x0, 10.0)
    q = curve.configuration
    dy, z = float(np.max(np.abs(q[:, 1] - q[0, 1]))), float(np.max(np.abs(q[:, 2])))
    ang_m = max(ab.angle_to(k, np.eye(6)[0]) for k in [S.kernel_direction(x0), *curve.kernels])

    E = ab.ConstraintManifold.from_model(models.engel())
    xe = np.array([0.3, -0.2, 0.1, 0.0, -0.1, 1.0, 0.0, 0.0])
    ang_e = max(ab.angle_to(k, np.eye(8)[3]) for k in E.trace_abnormal(xe, 2.0).kernels)

    contact = [models.torus3(), models.heisenberg()] + [models.make_suspension_model(A) for A in CASES.values()]
    hits = 0
    for m in contact:
        C = ab.ConstraintManifold.from_model(m)
        for a, d in C.probe_segments(100, seed=0):
            try:
                C.locate_sigma(a, d)
                hits += 1
            except ab.NoDegeneracyError:
                pass
    ok = dy < 1e-8 and z < 1e-8 and ang_m < 1e-6 and ang_e < 1e-6 and hits == 0
    verdict(8, ok, f"martinet |dy| {dy:.1e} |z| {z:.1e} angle {ang_m:.1e}; engel angle {ang_e:.1e}; "
                   f"Sigma found on {hits} of {100 * len(contact)} contact probes")


def test_criterion_09_extension_and_reeb_symmetry():
    rng = np.random.default_rng(0)
    ext = {}
    reeb_models = [models.torus3(), models.heisenberg()] + [models.make_suspension_model(A) for A in CASES.values()]
    for m in reeb_models:
        Hx, H, Ig = ham.riemannian_extension(m), ham.sr_hamiltonian(m), ham.reeb_momentum(m)
        worst = 0.0
        for _ in range(1000):
            x = np.concatenate([m.sample_q(rng), rng.standard_normal(3)])
            worst = max(worst, abs(Hx(x) - H(x) - Ig(x)))
        ext[m.name] = worst
    sym = {name: ham.reeb_symmetry_check(models.catalog_get(name), samples=100) for name in ("heisenberg", "torus3")}
    ok = max(ext.values()) < 1e-12 and max(sym.values()) < 1e-10
    verdict(9, ok, f"extension identity worst {max(ext.values()):.1e} (tol 1e-12); "
                   + ", ".join(f"{{I_g,H}} {k} {v:.2e}" for k, v in sym.items()) + " (tol 1e-10)")


def test_criterion_10_composition():
    A = np.array([[2, 1], [1, 1]])
    B = np.array([[1, 1], [0, 1]])
    R = np.array([[0, 1], [-1, 0]])
    pairs = [("A,A", A, A), ("A,A^-1", A, np.array([[1, -1], [-1, 2]])), ("A,I", A, np.eye(2, dtype=int)),
             ("A,A^2", A, A @ A), ("R,R", R, R), ("B,Bt", B, B.T)]
    rows = an.composition_entropy_table(pairs)
    commuting_ok = all(r.subadditive for r in rows if r.commuting)
    bbt = rows[-1]
    bbt_ok = bbt.h_f == 0.0 and bbt.h_g == 0.0 and abs(bbt.h_fg - LN_GOLDEN) < 1e-12 and not bbt.commuting
    verdict(10, commuting_ok and bbt_ok,
            f"{sum(r.commuting for r in rows)} commuting rows subadditive: {commuting_ok}; "
            f"(B,Bt): h = {bbt.h_f}, {bbt.h_g}, h(BBt) = {bbt.h_fg:.12f}")


def test_criterion_11_pseudonorm_profile():
    m = models.make_suspension_model(CASES["hyperbolic"])
    lead = an.directional_entropy_profile(m, (1.0, 0.0, 0.0)).value
    off = max(an.directional_entropy_profile(m, (0.0, a, b)).value for a in (-1.0, 1.0) for b in (-1.0, 1.0))
    rel = abs(lead - LN_GOLDEN) / LN_GOLDEN
    verdict(11, rel < 0.05 and off < 1e-3, f"rho(1,0,0) = {lead:.6f} (rel {rel:.2e}, tol 5%); "
                                           f"max rho(0,+-1,+-1) = {off:.2e} (tol 1e-3)")


def test_criterion_12_integrator_quality():
    H = ham.sr_hamiltonian(models.torus3())
    x0 = np.array([0.2, 0.0, 0.0, 0.8, 0.6, -0.3])
    ref = ig.flow(H, x0, 2.0, ig.IntegratorConfig(dt=1e-3)).final
    errs = [np.max(np.abs(ig.flow(H, x0, 2.0, ig.IntegratorConfig(dt=dt)).final - ref)) for dt in (0.2, 0.1, 0.05)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]

    Hh = ham.sr_hamiltonian(models.heisenberg())
    y0 = ham.energy_shell_points(models.heisenberg(), 1, seed=0)[0]
    fwd = ig.flow(Hh, y0, 10.0, ig.IntegratorConfig(dt=0.01)).final
    back = ig.flow(Hh, fwd, -10.0, ig.IntegratorConfig(dt=0.01)).final
    rev = float(np.max(np.abs(back - y0)))

    osc = ig.flow(ig.linear_system([[0.0, 1.0], [-1.0, 0.0]]), np.array([1.0, 0.0]), 1000.0, ig.IntegratorConfig(dt=0.1))
    E = 0.5 * np.sum(osc.states**2, axis=1)
    quad = float(np.max(np.abs(E - E[0])))
    ok = all(12.0 <= r <= 20.0 for r in ratios) and rev < 1e-8 and quad < 1e-12
    verdict(12, ok, f"order ratios {', '.join(f'{r:.2f}' for r in ratios)} (in [12, 20]); "
                    f"reversal {rev:.1e} (tol 1e-8); quadratic drift {quad:.1e} (tol 1e-12)")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
