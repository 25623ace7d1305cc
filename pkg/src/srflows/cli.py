"""Command-line front end.

Exit codes: 0 success, 1 domain error (bad model, parameters or usage),
2 numerical failure (or failing checks in ``report``), 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import abnormal as ab
from . import analysis as an
from . import entropy as en
from . import hamiltonian as hm
from . import integrate as ig
from . import models as md
from . import report as rp
from .errors import DomainError, NumericalError

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise DomainError(f"usage: {message}")


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise DomainError(f"expected comma-separated numbers, got '{text}'") from None


def _matrix(text: str) -> list:
    vals = _floats(text)
    k = int(round(math.sqrt(len(vals))))
    if k * k != len(vals) or k == 0:
        raise DomainError(f"matrix needs a square number of entries, got {len(vals)}")
    return [vals[i * k : (i + 1) * k] for i in range(k)]


def _n_range(text: str) -> list:
    """'4:14' (inclusive) or a comma list."""
    if ":" in text:
        a, b = text.split(":", 1)
        try:
            lo, hi = int(a), int(b)
        except ValueError:
            raise DomainError(f"bad range '{text}'") from None
        return list(range(lo, hi + 1))
    return [int(v) for v in _floats(text)]


def _model(text: str):
    text = text.strip()
    if text.startswith("{"):
        return md.model_from_descriptor(text)
    return md.catalog_get(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _emit(doc: dict, args) -> None:
    text = json.dumps(_jsonable(doc), indent=2)
    if getattr(args, "output", None) and args.format == "json":
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _cfg(args) -> ig.IntegratorConfig:
    scheme = ig.ADAPTIVE if getattr(args, "scheme", "gauss4") == "adaptive" else ig.GAUSS4
    return ig.IntegratorConfig(scheme=scheme, dt=args.dt, rtol=args.tol, atol=args.tol * 1e-2)


def _start(model, args):
    if args.x0:
        return np.array(_floats(args.x0))
    if isinstance(model, md.LiePoissonModel):
        return model.sample(np.random.default_rng(args.seed), 1)[0]
    return hm.energy_shell_points(model, 1, args.seed)[0]


# ---------------------------------------------------------------------------
# subcommands


def cmd_models(args) -> int:
    rows = []
    for name in md.CATALOG:
        rows.append({"name": name})
    _emit({"config": _config(args), "models": rows, "descriptor_example": {"model": "suspension", "A": [[2, 1], [1, 1]]}}, args)
    return EXIT_OK


def cmd_trace(args) -> int:
    model = _model(args.model)
    x0 = _start(model, args)
    H = model if isinstance(model, md.LiePoissonModel) else hm.sr_hamiltonian(model)
    integrals = [] if isinstance(model, md.LiePoissonModel) else list(model.known_integrals)
    traj = ig.flow(H, x0, args.T, _cfg(args), integrals=integrals, stride=args.stride)
    if args.output and args.format == "csv":
        labels = ["m1", "m2", "m3"] if isinstance(model, md.LiePoissonModel) else None
        traj.to_csv(args.output, labels=labels)
    summary = {
        "config": _config(args),
        "model": model.name,
        "x0": x0,
        "final": traj.final,
        "scheme": traj.scheme,
        "drifts": {k: traj.drift(k) for k in traj.values},
        "samples": len(traj.times),
    }
    if not (args.output and args.format == "csv"):
        _emit(summary, args)
    else:
        print(json.dumps(_jsonable(summary), indent=2))
    return EXIT_OK


def cmd_verify(args) -> int:
    model = _model(args.model)
    cfg = ig.IntegratorConfig(dt=args.dt)
    rep = an.verify_first_integrals(model, n_trajectories=args.n_trajectories, T=args.T, cfg=cfg, seed=args.seed, n_points=args.n_points)
    _emit({"config": _config(args), "report": rep.as_dict()}, args)
    return EXIT_OK


def cmd_lyapunov(args) -> int:
    model = _model(args.model)
    if isinstance(model, md.LiePoissonModel):
        raise DomainError("Lyapunov spectra are computed for geodesic flows on T*M, not for reduced Lie-Poisson systems")
    x0 = _start(model, args)
    spec = an.lyapunov_spectrum(model, x0, T=args.T, cfg=ig.IntegratorConfig(dt=args.dt, renorm_interval=args.renorm))
    _emit({"config": _config(args), "x0": x0, "spectrum": spec.as_dict()}, args)
    return EXIT_OK


def cmd_entropy(args) -> int:
    if args.kind == "toral":
        A = _matrix(args.matrix)
        h = en.toral_entropy(A)
        if args.format == "json" and args.output:
            _emit({"config": _config(args), "value": h, "method": "closed-form"}, args)
        else:
            print(repr(h))
        return EXIT_OK
    if args.kind == "spanning":
        est = en.spanning_entropy(_matrix(args.matrix), _floats(args.eps), _n_range(args.n_range), seed=args.seed, method=args.method)
        _emit({"config": _config(args), "estimate": est.as_dict()}, args)
        return EXIT_OK
    if args.kind == "profile":
        model = _model(args.model)
        est = an.directional_entropy_profile(model, _floats(args.v), T=args.T, cfg=ig.IntegratorConfig(dt=args.dt))
        _emit({"config": _config(args), "estimate": est.as_dict()}, args)
        return EXIT_OK
    if args.kind == "composition":
        rows = en.composition_entropy_table(rp.COMPOSITION_PAIRS)
        _emit({"config": _config(args), "rows": [r.as_dict() for r in rows]}, args)
        return EXIT_OK
    raise DomainError(f"unknown entropy kind '{args.kind}'")


def _find_sigma(S, seed: int, n: int = 50):
    for a, d in S.probe_segments(n, seed=seed):
        try:
            return S.locate_sigma(a, d)
        except (DomainError, NumericalError):
            continue
    raise ab.NoDegeneracyError(f"no degeneracy locus met on {n} probe segments (seed {seed})")


def cmd_abnormal(args) -> int:
    model = _model(args.model)
    if isinstance(model, md.LiePoissonModel):
        raise DomainError("abnormal curves need a frame on a manifold, not a Lie-Poisson reduction")
    S = ab.ConstraintManifold.from_model(model)
    if args.x0:
        x = np.array(_floats(args.x0))
        if args.direction:
            x = S.locate_sigma(x, np.array(_floats(args.direction)))
    elif args.direction:
        x = S.locate_sigma(S.sample_point(np.random.default_rng(args.seed)), np.array(_floats(args.direction)))
    else:
        x = _find_sigma(S, args.seed)
    curve = S.trace_abnormal(x, args.T, h=args.dt, sign=-1.0 if args.reverse else 1.0)
    if args.output and args.format == "csv":
        curve.to_csv(args.output)
    cons = max(float(np.max(np.abs(S.values(p)))) for p in curve.points)
    summary = {
        "config": _config(args),
        "model": model.name,
        "start": x,
        "end": curve.points[-1],
        "samples": len(curve.times),
        "max_constraint": cons,
        "max_abs_pfaffian": float(np.max(np.abs(curve.pfaffian))),
    }
    if args.output and args.format == "csv":
        print(json.dumps(_jsonable(summary), indent=2))
    else:
        _emit(summary, args)
    return EXIT_OK


def cmd_reeb(args) -> int:
    model = _model(args.model)
    if isinstance(model, md.LiePoissonModel):
        raise DomainError("Reeb checks need a contact model")
    out = {"config": _config(args), "model": model.name}
    out["identities"] = an.reeb_verify(model, samples=args.samples, seed=args.seed, T_flow=args.T)
    out["extension_identity"] = rp.eq9_residual(model, n=args.samples, seed=args.seed)
    out["reeb_symmetry"] = hm.reeb_symmetry_check(model, samples=args.samples, seed=args.seed)
    _emit(out, args)
    return EXIT_OK


def cmd_report(args) -> int:
    progress = (lambda r: print(f"  {r.key}: {'ok' if r.passed else 'FAIL'}", file=sys.stderr, flush=True)) if args.verbose else None
    t0 = time.perf_counter()
    bundle = rp.report_bundle(only=args.only, seed=args.seed, progress=progress)
    print(f"elapsed {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    bundle["config"].update(_config(args))
    print(rp.format_table(bundle))
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(json.dumps(_jsonable(bundle), indent=2) + "\n")
    if bundle["failed"]:
        failed = [r["key"] for r in bundle["rows"] if not r["passed"]]
        print("failing checks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="srflows", description="Sub-Riemannian geodesic flows: integrals, entropy, Reeb fields and abnormal curves.")
    p.add_argument("--version", action="version", version=f"srflows {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, output=True):
        sp.add_argument("--seed", type=int, default=0)
        if output:
            sp.add_argument("--output", "-o", help="output file")
            sp.add_argument("--format", choices=("json", "csv"), default="json")

    sp = sub.add_parser("models", help="list catalog models")
    common(sp)
    sp.set_defaults(func=cmd_models)

    sp = sub.add_parser("trace", help="integrate a geodesic (or Lie-Poisson) flow")
    sp.add_argument("--model", required=True, help='name or JSON descriptor, e.g. \'{"model":"torus3"}\'')
    sp.add_argument("--x0", help="comma-separated start point (default: seeded point with H = 1/2)")
    sp.add_argument("--T", type=float, default=10.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--scheme", choices=("gauss4", "adaptive"), default="gauss4")
    sp.add_argument("--stride", type=int)
    common(sp)
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("verify", help="first-integral drifts, brackets and independence rank")
    sp.add_argument("--model", required=True)
    sp.add_argument("--T", type=float, default=100.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--n-trajectories", type=int, default=4)
    sp.add_argument("--n-points", type=int, default=1000)
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("lyapunov", help="Lyapunov spectrum of the geodesic flow")
    sp.add_argument("--model", required=True)
    sp.add_argument("--x0")
    sp.add_argument("--T", type=float, default=200.0)
    sp.add_argument("--dt", type=float, default=0.01)
    sp.add_argument("--renorm", type=float, default=1.0, help="time between QR renormalizations")
    common(sp)
    sp.set_defaults(func=cmd_lyapunov)

    sp = sub.add_parser("entropy", help="toral, spanning-count, directional profile or composition table")
    sp.add_argument("kind", choices=("toral", "spanning", "profile", "composition"))
    sp.add_argument("--matrix", default="2,1,1,1", help="row-major integer entries")
    sp.add_argument("--eps", default="0.01", help="comma-separated scales")
    sp.add_argument("--n-range", default="4:14")
    sp.add_argument("--method", choices=("patch", "grid"))
    sp.add_argument("--model", default='{"model":"suspension","A":[[2,1],[1,1]]}')
    sp.add_argument("--v", default="1,0,0", help="direction (t1,t2,t3) for the profile")
    sp.add_argument("--T", type=float, default=200.0)
    sp.add_argument("--dt", type=float, default=0.01)
    common(sp)
    sp.set_defaults(func=cmd_entropy)

    sp = sub.add_parser("abnormal", help="trace an abnormal curve")
    sp.add_argument("--model", default="martinet")
    sp.add_argument("--x0", help="start point on S (on the degeneracy locus unless --direction is given)")
    sp.add_argument("--direction", help="search direction for locating the degeneracy locus from x0")
    sp.add_argument("--T", type=float, default=10.0)
    sp.add_argument("--dt", type=float, default=0.05)
    sp.add_argument("--reverse", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_abnormal)

    sp = sub.add_parser("reeb", help="Reeb identities, extension identity and Reeb symmetry")
    sp.add_argument("--model", required=True)
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--T", type=float, default=1e4, help="horizon of the Reeb-flow Lyapunov run")
    common(sp)
    sp.set_defaults(func=cmd_reeb)

    sp = sub.add_parser("report", help="run the reproduction matrix")
    sp.add_argument("--only", action="append", help="glob on row keys, repeatable (e.g. 'lie:*')")
    sp.add_argument("--json", help="write the full JSON document here")
    sp.add_argument("--verbose", "-v", action="store_true")
    common(sp, output=False)
    sp.set_defaults(func=cmd_report)
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not getattr(args, "func", None):
            raise DomainError("missing subcommand (models, trace, verify, lyapunov, entropy, abnormal, reeb, report)")
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
