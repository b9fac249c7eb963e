"""
Command-line front end.

Every subcommand reads a graph instance (a JSON file, or ``fixture:<name>``)
and writes a JSON report, or CSV rows for ``scatter``. Exit status is 0
on success, 1 on input errors and 2 when a checked identity fails.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io as _io
import json
import os
import sys
import warnings
from contextlib import contextmanager

import numpy as np

from . import __version__
from .factorization import (FactorizationError, IncompatibleFactorization, factorize_edge,
                            factorize_vertex_tree, reconstruct)
from .fermion import FermionicQuadraticForm, build_fock, diagonalize, predicted_spectrum
from .fixtures import FIXTURES, get_fixture
from .graph import is_cycle, validate
from .io import Instance, SchemaError, instance_to_json, jsonable, load_instance
from .operators import delta_norm_bound, extend_to_window
from .scattering import (SingularLambda, exceptional_spectrum, maslov_crossings, normal_spectrum,
                         perturbation_experiment, scattering_data, scattering_matrix, singular_lambda_scan)
from .wronskian import homology_class, wronskian_edge, wronskian_vertex

TOL_ENV = "SCHROGRAPH_TOL"
CSV_VERSION = "scatter-csv v1"


class InputError(Exception):
    pass


class CheckFailed(Exception):
    def __init__(self, report, message):
        super().__init__(message)
        self.report = report


def _default_tol() -> float:
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return 1e-8
    try:
        val = float(raw)
    except ValueError:
        raise InputError(f"{TOL_ENV}={raw!r} is not a number") from None
    if not val > 0:
        raise InputError(f"{TOL_ENV} must be positive")
    return val


def _range(text: str) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise InputError(f"range {text!r} must look like a:b:n") from None
    if n < 1:
        raise InputError(f"range {text!r} is empty")
    return np.linspace(a, b, n)


def _window(text: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in text.split(":"))
    except ValueError:
        raise InputError(f"window {text!r} must look like a:b") from None
    if not a < b:
        raise InputError(f"window {text!r} is empty")
    return a, b


def _load(spec: str) -> Instance:
    if spec.startswith("fixture:"):
        name = spec.split(":", 1)[1]
        if name not in FIXTURES or FIXTURES[name].kind != "graph":
            graph_fx = [k for k, f in FIXTURES.items() if f.kind == "graph"]
            raise InputError(f"unknown graph fixture {name!r}; choose from {', '.join(graph_fx)}")
        return get_fixture(name)
    try:
        return load_instance(spec)
    except SchemaError as exc:
        raise InputError(str(exc)) from None


def _read_json(path: str, what: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} {path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _config_hash(args) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("output", "func")}
    blob = json.dumps(jsonable(cfg), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _report(args, results, warnings_=()):
    return {
        "subcommand": args.command,
        "version": __version__,
        "config_hash": _config_hash(args),
        "results": results,
        "warnings": list(warnings_),
    }


@contextmanager
def _sink(path: str):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit_json(args, payload):
    text = json.dumps(jsonable(payload), sort_keys=True, indent=2)
    with _sink(args.output) as fh:
        fh.write(text + "\n")


def _instance(args) -> Instance:
    inst = _load(args.instance)
    issues = validate(inst.graph)
    if issues and not getattr(args, "allow_invalid", False):
        raise InputError("; ".join(issues))
    return inst.shifted(args.shift)


# ---- subcommands -----------------------------------------------------------


def cmd_check_wronskian(args):
    inst = _instance(args)
    g, L = inst.graph, inst.vertex_operator
    tol = args.assert_tol
    if args.generate == "eig":
        if g.k:
            if args.lam is None:
                raise InputError("--generate eig on a graph with tails needs --lambda")
            plane = scattering_data(L, g, args.lam)
            if plane.solution_dim < 2:
                raise InputError(f"solution space at lambda={args.lam} has dimension {plane.solution_dim} < 2")
            depth = args.depth
            phi = plane.system.extend(plane.null_basis[:, 0], args.lam, depth)
            psi = plane.system.extend(plane.null_basis[:, 1], args.lam, depth)
            op = extend_to_window(L, g, depth)
            W, paths = g.window(depth)
            ignore = [W.index(p[-1]) for p in paths]
            tips = [p[-1] for p in paths]
            lam = args.lam
        else:
            w, V = np.linalg.eigh(L.matrix)
            gaps = np.flatnonzero(np.diff(w) <= 1e-9 * max(1.0, np.abs(w).max()))
            if not gaps.size:
                raise InputError("operator has no degenerate eigenvalue; pass --phi/--psi")
            i = int(gaps[0])
            phi, psi, lam = V[:, i], V[:, i + 1], float(w[i])
            op, ignore, tips = L, [], []
    else:
        if not (args.phi and args.psi):
            raise InputError("give --phi and --psi files, or --generate eig")
        phi = np.asarray(_read_json(args.phi, "phi"), dtype=float)
        psi = np.asarray(_read_json(args.psi, "psi"), dtype=float)
        op, ignore, tips, lam = L, [], [], args.lam
        if args.operator == "edge":
            op = inst.edge_operator_or_default()
    if args.operator == "edge" and args.generate != "eig":
        chain = wronskian_edge(op, phi, psi, lam=lam, tol=tol)
    else:
        chain = wronskian_vertex(op, phi, psi, lam=lam, tol=tol, ignore_rows=ignore)
    _, resid = is_cycle(chain, ignore=tips)
    # a Wronskian that vanishes identically has no scale of its own
    natural = float(np.abs(phi).max() * np.abs(psi).max() * np.abs(op.matrix).max())
    resid /= max(float(np.abs(chain.values).max(initial=0.0)), natural, 1e-300)
    results = {"cycle_residual": resid, "lambda": lam, "max_abs_W": float(np.abs(chain.values).max(initial=0.0))}
    if g.k and args.generate == "eig":
        hc = homology_class(chain, g)
        results.update(hc.as_dict())
    report = _report(args, results)
    if resid > tol:
        raise CheckFailed(report, f"Wronskian is not a cycle: relative boundary {resid:.3e}")
    return report


def _scatter_rows(inst, lams, assert_tol):
    g, L = inst.graph, inst.vertex_operator
    rows, failed, warns = [], False, []
    for lam in sorted(lams):
        plane = scattering_data(L, g, lam)
        row = {"lambda": float(lam), "dim": plane.dim, "flagged": int(plane.flagged), "status": "ok"}
        S = None
        try:
            sm = scattering_matrix(plane)
            S = sm.S
            row["unitarity"], row["symmetry"] = sm.unitarity_residual, sm.symmetry_residual
            if not sm.check(assert_tol):
                failed = True
                row["status"] = "check_failed"
        except SingularLambda as exc:
            row["status"] = "singular"
            warns.append(f"lambda={lam:.12g}: {exc}")
        except ValueError as exc:
            row["status"] = "domain"
            warns.append(f"lambda={lam:.12g}: {exc}")
        if plane.flagged:
            warns.append(f"lambda={lam:.12g}: rank decision ambiguous, dims {plane.candidate_dims}")
        row["S"] = S
        rows.append(row)
    return rows, failed, warns


def cmd_scatter(args):
    inst = _instance(args)
    if args.lam is None and args.range is None:
        raise InputError("give --lambda or --range")
    lams = [args.lam] if args.lam is not None else list(_range(args.range))
    rows, failed, warns = _scatter_rows(inst, lams, args.assert_tol)
    k = inst.graph.k
    if args.format == "json":
        report = _report(args, rows, warns)
    else:
        buf = _io.StringIO()
        buf.write(f"# {CSV_VERSION}; k={k}; config={_config_hash(args)}\n")
        cols = ["lambda", "dim", "flagged", "status"]
        cols += [f"S{j + 1}{l + 1}_{p}" for j in range(k) for l in range(k) for p in ("re", "im")]
        cols += ["unitarity", "symmetry"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            vals = [repr(r["lambda"]), r["dim"], r["flagged"], r["status"]]
            for j in range(k):
                for l in range(k):
                    z = r["S"][j, l] if r["S"] is not None else complex("nan")
                    vals += [repr(float(z.real)), repr(float(z.imag))]
            vals += [repr(float(r.get("unitarity", float("nan")))), repr(float(r.get("symmetry", float("nan"))))]
            w.writerow(vals)
        report = buf.getvalue()
    if failed:
        raise CheckFailed(report, "scattering matrix failed the unitarity/symmetry check")
    return report


def _normal_json(ev):
    return {"lambda": ev.lam, "residual": ev.residual, "decay_ratio": ev.decay_ratio,
            "a_minus": ev.a_minus, "multiplicity": ev.multiplicity, "verified": ev.verified}


def _exceptional_json(ev):
    return {"lambda": ev.lam, "eigenfunction": {str(k): v for k, v in ev.eigenfunction.items()},
            "nest_residual": ev.nest_residual, "residual": ev.residual, "drowned": ev.drowned}


def _singular_json(sv):
    out = {"lambda": sv.lam, "residual": sv.residual}
    if sv.tail_alphas is not None:
        out.update({"tail_alphas": sv.tail_alphas, "alpha_sum": sv.alpha_sum,
                    "finite_class": sv.finite_class})
    return out


def cmd_spectrum(args):
    inst = _instance(args)
    g, L = inst.graph, inst.vertex_operator
    a, b = _window(args.window)
    try:
        normal = normal_spectrum(L, g, (a, b), args.grid)
        tally = maslov_crossings(L, g, (a, b), args.grid)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    results = {
        "window": [a, b],
        "normal": [_normal_json(e) for e in normal],
        "maslov": {"count": tally.count, "pattern": tally.pattern},
        "exceptional": [_exceptional_json(e) for e in exceptional_spectrum(L, g)],
    }
    report = _report(args, results)
    bad = [e.lam for e in normal if not e.verified]
    if bad:
        raise CheckFailed(report, f"eigenfunction verification failed at {bad}")
    return report


def cmd_exceptional(args):
    inst = _instance(args)
    ex = exceptional_spectrum(inst.vertex_operator, inst.graph, args.assert_tol)
    return _report(args, [_exceptional_json(e) for e in ex])


def cmd_singular(args):
    inst = _instance(args)
    if inst.graph.k != 2:
        raise InputError(f"singular scan needs exactly 2 tails, instance has {inst.graph.k}")
    xs = _range(args.range)
    svs = singular_lambda_scan(inst.vertex_operator, inst.graph, (xs[0], xs[-1]), len(xs),
                               normalize_at=args.normalize_at)
    return _report(args, [_singular_json(s) for s in svs])


def cmd_perturb(args):
    inst = _instance(args)
    sym = None
    if args.swap:
        sym = {}
        for pair in args.swap:
            try:
                x, y = pair.split(":")
            except ValueError:
                raise InputError(f"--swap {pair!r} must look like A:B") from None
            core = inst.graph.core
            for z in (x, y):
                if not core.has_vertex(z):
                    raise InputError(f"--swap: unknown vertex {z!r}")
            sym[x], sym[y] = y, x
    st = perturbation_experiment(inst.vertex_operator, inst.graph, args.mag, args.trials, args.seed,
                                 symmetry=sym, tol=args.assert_tol)
    return _report(args, {"trials": st.trials, "survivals": st.survivals, "fraction": st.fraction,
                          "magnitude": st.magnitude, "mode": st.mode, "seed": args.seed})


def cmd_factorize(args):
    inst = _instance(args)
    if args.mode == "edge":
        try:
            res = factorize_edge(inst.edge_operator_or_default(), args.C, args.special)
        except IncompatibleFactorization as exc:
            rep = _report(args, {"compatibility": {str(v): rows for v, rows in exc.report.vertices.items()}},
                          [str(exc)])
            raise CheckFailed(rep, str(exc)) from None
        except FactorizationError as exc:
            raise InputError(str(exc)) from None
        _, resid = reconstruct(res, inst.edge_operator_or_default())
    else:
        if not args.subtree:
            raise InputError("--mode vertex needs --subtree")
        sub = _read_json(args.subtree, "subtree")
        try:
            verts, root = sub["vertices"], sub["root"]
        except (KeyError, TypeError):
            raise InputError("subtree file needs 'vertices' and 'root'") from None
        boundary = {}
        if args.boundary:
            for i, row in enumerate(_read_json(args.boundary, "boundary")):
                try:
                    boundary[(row["edge"], row["vertex"])] = float(row["c"])
                except (KeyError, TypeError, ValueError):
                    raise InputError(f"boundary[{i}]: expected edge, vertex, c") from None
        try:
            res = factorize_vertex_tree(inst.vertex_operator, verts, root, boundary, args.C)
        except FactorizationError as exc:
            raise InputError(str(exc)) from None
        _, resid = reconstruct(res, inst.vertex_operator)
    out = res.as_dict()
    out["reconstruct_residual"] = resid
    report = _report(args, out)
    if resid > args.assert_tol:
        raise CheckFailed(report, f"reconstruction residual {resid:.3e}")
    return report


def cmd_fermion(args):
    A = np.asarray(_read_json(args.A, "A"), dtype=float)
    B = np.asarray(_read_json(args.B, "B"), dtype=float)
    try:
        form = FermionicQuadraticForm(A, B, args.const)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    spec, mu, shift = predicted_spectrum(form)
    _, _, chk = diagonalize(form)
    out = {"mu": mu, "predicted_spectrum": spec, "shift": shift, "diagonal_residual":
           float(np.abs(chk.D_prime - np.diag(np.diag(chk.D_prime))).max(initial=0.0))}
    dev = 0.0
    if args.oracle:
        try:
            fock = np.linalg.eigvalsh(build_fock(form))
        except ValueError as exc:
            raise InputError(str(exc)) from None
        dev = float(np.abs(fock - spec).max())
        out["fock_spectrum"] = fock
    out["max_deviation"] = dev
    report = _report(args, out)
    if dev > args.assert_tol:
        raise CheckFailed(report, f"predicted spectrum deviates from the Fock spectrum by {dev:.3e}")
    return report


def cmd_bound(args):
    inst = _instance(args)
    g = inst.graph
    vb = delta_norm_bound(inst.vertex_operator, g if g.k else None)
    eb = delta_norm_bound(inst.edge_operator_or_default())
    return _report(args, {
        "vertex": {"M_L": vb.M_L, "attained_at": str(vb.attained_at), "flag": vb.discrete_spectrum_guaranteed},
        "edge": {"M_L": eb.M_L, "attained_at": str(eb.attained_at), "flag": eb.discrete_spectrum_guaranteed},
    })


def cmd_fixtures(args):
    if args.dump:
        if args.dump not in FIXTURES:
            raise InputError(f"unknown fixture {args.dump!r}")
        fx = FIXTURES[args.dump]
        obj = fx()
        if fx.kind == "graph":
            return instance_to_json(obj)
        if fx.kind == "fermion":
            return {"A": obj.A, "B": obj.B, "const": obj.const}
        K, k, M = obj
        return {"simplices": K.simplices[k], "k": k, "matrix": M}
    return _report(args, [{"name": f.name, "kind": f.kind, "description": f.description}
                          for f in FIXTURES.values()])


# ---- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="schrograph", description=__doc__.strip().splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    tol = _default_tol()

    def common(sp, instance=True):
        if instance:
            sp.add_argument("instance", help="graph JSON file or fixture:<name>")
            sp.add_argument("--shift", type=float, default=0.0, help="replace L by L + shift * Id")
            sp.add_argument("--allow-invalid", action="store_true", help="skip graph validation")
        sp.add_argument("--output", "-o", default="-", help="output path ('-' for stdout)")
        sp.add_argument("--assert-tol", type=float, default=tol,
                        help=f"tolerance for checked identities (default 1e-8, env {TOL_ENV})")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("check-wronskian", help="Wronskian of two solutions and its homology class")
    common(sp)
    sp.add_argument("--phi")
    sp.add_argument("--psi")
    sp.add_argument("--generate", choices=["eig"])
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--operator", choices=["vertex", "edge"], default="vertex")
    sp.add_argument("--depth", type=int, default=6)
    sp.set_defaults(func=cmd_check_wronskian)

    sp = sub.add_parser("scatter", help="scattering matrix on a lambda grid")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--range")
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.set_defaults(func=cmd_scatter)

    sp = sub.add_parser("spectrum", help="normal eigenvalues and Maslov crossings in a window")
    common(sp)
    sp.add_argument("--window", required=True)
    sp.add_argument("--grid", type=int, default=400)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("exceptional", help="eigenvalues with eigenfunctions vanishing on all tails")
    common(sp)
    sp.set_defaults(func=cmd_exceptional)

    sp = sub.add_parser("singular", help="singular lambda values for two tails")
    common(sp)
    sp.add_argument("--range", default="-2:2:400")
    sp.add_argument("--normalize-at")
    sp.set_defaults(func=cmd_singular)

    sp = sub.add_parser("perturb", help="survival of exceptional eigenvalues under perturbation")
    common(sp)
    sp.add_argument("--mag", type=float, required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--swap", action="append", help="symmetry as a vertex transposition A:B (repeatable)")
    sp.set_defaults(func=cmd_perturb)

    sp = sub.add_parser("factorize", help="factorization L + C = QQ^+")
    common(sp)
    sp.add_argument("--mode", choices=["edge", "vertex"], required=True)
    sp.add_argument("--C", type=float, default=0.0)
    sp.add_argument("--special", action="store_true")
    sp.add_argument("--subtree")
    sp.add_argument("--boundary")
    sp.set_defaults(func=cmd_factorize)

    sp = sub.add_parser("fermion", help="spectrum of a quadratic fermionic form")
    common(sp, instance=False)
    sp.add_argument("--A", required=True)
    sp.add_argument("--B", required=True)
    sp.add_argument("--const", type=float, default=0.0)
    sp.add_argument("--oracle", action="store_true", help="compare with the exact 2^n Fock spectrum")
    sp.set_defaults(func=cmd_fermion)

    sp = sub.add_parser("bound", help="delta-norm bound M_L")
    common(sp)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("fixtures", help="list built-in fixtures or dump one")
    common(sp, instance=False)
    sp.add_argument("--dump")
    sp.set_defaults(func=cmd_fixtures)
    return p


def _write(args, payload):
    if isinstance(payload, str):
        with _sink(args.output) as fh:
            fh.write(payload)
    else:
        _emit_json(args, payload)


_VALUE_OPTS = ("--range", "--window", "--lambda", "--shift", "--C", "--const", "--mag")


def _join_negative_values(argv: list[str]) -> list[str]:
    """Let ``--range -1.9:1.9:50`` through argparse, which reads ``-1.9...`` as a flag."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _VALUE_OPTS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and argv[i + 1][1:2].isdigit() | (argv[i + 1][1:2] == "."):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        parser = build_parser()
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    if getattr(args, "assert_tol", 1.0) <= 0:
        print("error: --assert-tol must be positive", file=sys.stderr)
        return 1
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            payload = args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CheckFailed as exc:
        _write(args, exc.report)
        print(f"check failed: {exc}", file=sys.stderr)
        return 2
    _write(args, payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
