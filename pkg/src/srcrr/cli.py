"""Command-line front end.

Subcommands print JSON (stable key order, 9 significant digits) and, with
``--out``, write their primary artifact plus ``<out>.manifest.json``.
Exit codes: 0 ok, 2 parse error, 3 degenerate input, 4 infeasible D,
5 precondition violated.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InfeasibleDistortionError, PmfParseError, PreconditionError, SrcrrError
from .gacs_korner import gk_partition
from .probability import (
    Alphabet,
    DistortionMeasure,
    JointPmf,
    pmf_from_dict,
    pmf_to_dict,
)
from .pruning import MarkovFiveTuple, prune_a, prune_b
from .region import (
    RegionFrontier,
    SourceSpec,
    binary_region,
    binary_source,
    classify_source,
    discontinuity_demo,
    eval_triple_candidate,
    underline_distortion,
    write_frontier_csv,
)
from .search import SearchConfig, optimize_star_region, qb_region

BUILTINS = {
    "gk-example-p": "gk_example_p.json",
    "gk-example-q": "gk_example_q.json",
    "equivalent-qsuv": "equivalent_qsuv.json",
}


# -- output helpers --------------------------------------------------------------


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return str(x)
        return float(format(x, ".9g"))
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2)


def _emit(obj, out: str | None = None):
    text = dumps(obj)
    print(text)
    if out:
        Path(out).write_text(text + "\n")


def _read_input(spec: str) -> tuple[JointPmf, bytes]:
    if spec.startswith("builtin:"):
        key = spec.split(":", 1)[1]
        if key not in BUILTINS:
            raise PmfParseError(f"unknown builtin {key!r}; choose from {sorted(BUILTINS)}")
        raw = resources.files("srcrr").joinpath("data", BUILTINS[key]).read_bytes()
    else:
        try:
            raw = Path(spec).read_bytes()
        except OSError as exc:
            raise PmfParseError(f"cannot read {spec}: {exc}") from None
    try:
        doc = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise PmfParseError(f"{spec} is not valid JSON: {exc}") from None
    return pmf_from_dict(doc), raw


def _source_pmf(args) -> tuple[JointPmf, bytes]:
    if args.input:
        return _read_input(args.input)
    if args.rho is None or args.delta is None:
        raise PmfParseError("give --input or both --rho and --delta for the binary family")
    p = binary_source(args.rho, args.delta)
    return p, json.dumps(pmf_to_dict(p), sort_keys=True).encode()


def _distortion(p: JointPmf, path: str | None) -> DistortionMeasure:
    S = p.alphabet("S")
    if path is None:
        return DistortionMeasure.hamming(S)
    try:
        doc = json.loads(Path(path).read_text())
        recon = Alphabet("Shat", tuple(doc.get("recon", S.symbols)))
        return DistortionMeasure(S, recon, np.array(doc["values"], dtype=float))
    except (OSError, KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, SrcrrError):
            raise
        raise PmfParseError(f"cannot read distortion measure {path}: {exc}") from None


def _write_manifest(out: str, args, raw: bytes | None):
    params = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "command": args.command,
        "params": params,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "input_sha256": hashlib.sha256(raw).hexdigest() if raw is not None else None,
    }
    Path(out + ".manifest.json").write_text(dumps(manifest) + "\n")


# -- subcommands -----------------------------------------------------------------


def cmd_gk(args) -> int:
    p, raw = _read_input(args.input)
    left = args.left or [p.names[0]]
    right = args.right or [n for n in p.names if n not in left]
    part = gk_partition(p, left, right)
    masses = list(part.class_mass)
    probs = np.array(masses)
    result = {
        "left": list(part.left_vars),
        "right": list(part.right_vars),
        "classes": part.n_classes,
        "class_masses": masses,
        "class_labels": [part.right_labels[c] for c in part.class_ids],
        "gk_entropy_bits": float(-(probs * np.log2(probs)).sum()) if len(probs) else 0.0,
        "choices": part.mapping_choices("left"),
        "component_sizes_left": list(part.component_sizes("left").values()),
        "component_sizes_right": list(part.component_sizes("right").values()),
    }
    _emit(result, args.out)
    if args.out:
        _write_manifest(args.out, args, raw)
    return 0


def _config(args) -> SearchConfig:
    return SearchConfig(grid=args.grid, restarts=args.restarts, seed=args.seed)


def cmd_region(args) -> int:
    method = args.method
    frontiers: list[RegionFrontier] = []
    raw = None
    extra = None
    if method == "binary":
        if args.rho is None or args.delta is None:
            raise PmfParseError("the binary method needs --rho and --delta")
        frontiers = [binary_region(args.rho, args.delta, D) for D in args.D]
    else:
        p, raw = _source_pmf(args)
        dist = _distortion(p, args.distortion)
        base = SourceSpec(p, dist, 0.0)
        dlow = underline_distortion(base)
        for D in args.D:
            if D < dlow - 1e-12:
                raise InfeasibleDistortionError(D, dlow)
        cfg = _config(args)
        if method == "star":
            frontiers = [optimize_star_region(base.with_D(D), args.k, cfg) for D in args.D]
        elif method == "qb":
            frontiers = [qb_region(base.with_D(D), cfg) for D in args.D]
        else:
            extra = []
            for D in args.D:
                res = _triple(base.with_D(D), args)
                corners = [(res.corner_ddag.a, res.corner_ddag.b)] if res.feasible else []
                frontiers.append(RegionFrontier.from_points(corners, D=D, underline_D=dlow))
                extra.append(
                    {
                        "D": D,
                        "corner_ddag": [res.corner_ddag.a, res.corner_ddag.b],
                        "corner_dag": [res.corner_dag.a, res.corner_dag.b],
                        "distortion": res.candidate.achieved_distortion,
                        "feasible": res.feasible,
                        "dag_admissible": res.dag_admissible,
                    }
                )
    summary = []
    for fr in frontiers:
        row = {"D": fr.D, "corners": len(fr.corners)}
        if fr.corners:
            row["min_r_uv"] = min(c.a for c in fr.corners)
            row["min_sum_rate"] = min(c.b for c in fr.corners)
            row["frontier"] = [[c.a, c.b] for c in fr.corners]
        summary.append(row)
        line = f"method={method} D={fr.D:.9g} corners={len(fr.corners)}"
        if fr.corners:
            line += f" min_r_uv={row['min_r_uv']:.9g} min_sum_rate={row['min_sum_rate']:.9g}"
        print(line, file=sys.stderr)
    out = {"method": method, "frontiers": summary}
    if extra is not None:
        out["triples"] = extra
    print(dumps(out))
    if args.out:
        write_frontier_csv(args.out, frontiers)
        _write_manifest(args.out, args, raw)
    return 0


def _triple(src: SourceSpec, args):
    nS = src.sizes[0]
    if args.triple:
        try:
            doc = json.loads(Path(args.triple).read_text())
            qa, qb, qc = (np.array(doc[k], dtype=float) for k in ("qAS", "qBAS", "qCAS"))
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise PmfParseError(f"cannot read triple {args.triple}: {exc}") from None
    else:
        rng = np.random.default_rng(args.seed)
        k = 2
        qa = rng.dirichlet(np.ones(k), size=nS)
        qb = rng.dirichlet(np.ones(k), size=(k, nS))
        qc = rng.dirichlet(np.ones(k), size=(k, nS))
    return eval_triple_candidate(src, qa, qb, qc)


def cmd_classify(args) -> int:
    p, raw = _source_pmf(args)
    if sorted(p.names) != ["S", "U", "V"]:
        raise PmfParseError(f"classification needs a pmf over exactly S, U, V; got {p.names}")
    report = classify_source(p, args.tol)
    _emit(report.to_dict(), args.out)
    if args.out:
        _write_manifest(args.out, args, raw)
    return 0


def _parse_event(spec: str, t: MarkovFiveTuple) -> np.ndarray:
    a1, a2 = t.joint.alphabet("A1"), t.joint.alphabet("A2")
    E = np.zeros((len(a1), len(a2)), dtype=bool)
    try:
        for pair in spec.split(";"):
            pair = pair.strip()
            if not pair:
                continue
            x, y = pair.split(",")
            E[a1.index(x.strip()), a2.index(y.strip())] = True
    except (ValueError, KeyError) as exc:
        raise PmfParseError(f"cannot parse event {spec!r}: {exc}") from None
    return E


def _lightest_event(t: MarkovFiveTuple, budget: float) -> np.ndarray:
    """Drop the lightest (a1, a2) pairs while their total mass stays within ``budget``."""
    pA = t.p_a1a2s.sum(axis=2)
    E = np.ones(pA.shape, dtype=bool)
    spent = 0.0
    for j in np.argsort(pA, axis=None, kind="stable"):
        if spent + pA.flat[j] > budget:
            break
        E.flat[j] = False
        spent += pA.flat[j]
    return E


def cmd_prune(args) -> int:
    p, raw = _read_input(args.input)
    t = MarkovFiveTuple(p)
    if args.eta is None:
        raise PreconditionError("pruning needs --eta")
    if args.method == "a":
        if args.event:
            E = _parse_event(args.event, t)
        elif args.delta is not None:
            E = _lightest_event(t, args.delta)
        else:
            raise PreconditionError("method a needs --event or --delta")
        pruned, report = prune_a(t, E, args.eta)
    else:
        if args.delta is None:
            raise PreconditionError("method b needs --delta")
        pruned, report = prune_b(t, args.delta, args.eta)
    doc = report.to_dict()
    doc["pruned"] = pmf_to_dict(pruned.joint)
    _emit(doc, args.out)
    if args.out:
        _write_manifest(args.out, args, raw)
    return 0


def cmd_demo(args) -> int:
    rep = discontinuity_demo(args.rho, args.D[0], args.delta_list, args.side)
    doc = rep.to_dict()
    print(dumps(doc))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta", "r_uv_min", "sum_rate_min", "gap_r_uv", "gap_sum_rate"])
            for d, c, g1, g2 in zip(rep.deltas, rep.corners, rep.gaps_r_uv, rep.gaps_sum_rate):
                w.writerow([format(x, ".9g") for x in (d, c.a, c.b, g1, g2)])
            endpoint = 0.0 if rep.side == "zero" else 1.0
            b = rep.boundary_corner
            w.writerow([format(x, ".9g") for x in (endpoint, b.a, b.b, 0.0, 0.0)])
        Path(args.out).with_suffix(".json").write_text(dumps(doc) + "\n")
        _write_manifest(args.out, args, None)
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="srcrr",
        description="Rate regions with common receiver reconstructions.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gk", help="Gacs-Korner common part of two variable groups")
    g.add_argument("--input", required=True, help="pmf JSON or builtin:NAME")
    g.add_argument("--left", nargs="+", help="left variable group (default: first variable)")
    g.add_argument("--right", nargs="+", help="right variable group (default: the rest)")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gk)

    r = sub.add_parser("region", help="rate-region frontier as CSV")
    r.add_argument("--method", choices=("star", "qb", "binary", "triple-eval"), required=True)
    r.add_argument("--input", help="pmf JSON over S,U,V or builtin:NAME")
    r.add_argument("--rho", type=float)
    r.add_argument("--delta", type=float)
    r.add_argument("--D", type=float, nargs="+", required=True)
    r.add_argument("--distortion", help="JSON with 'values' (|S| x |Shat|) and optional 'recon'")
    r.add_argument("--k", type=int, help="auxiliary alphabet size for star (default |S|+2)")
    r.add_argument("--triple", help="JSON with qAS, qBAS, qCAS arrays for triple-eval")
    r.add_argument("--grid", type=float, default=0.05)
    r.add_argument("--restarts", type=int, default=64)
    r.add_argument("--seed", type=int, default=42)
    r.add_argument("--out")
    r.set_defaults(func=cmd_region)

    c = sub.add_parser("classify", help="which solved source classes apply")
    c.add_argument("--input")
    c.add_argument("--rho", type=float)
    c.add_argument("--delta", type=float)
    c.add_argument("--tol", type=float, default=1e-9)
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    p = sub.add_parser("prune", help="prune a Markov five-tuple (A1,A2,S,B1,B2)")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("a", "b"), required=True)
    p.add_argument("--eta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--event", help="kept (a1,a2) pairs for method a, e.g. '0,0;1,1'")
    p.add_argument("--out")
    p.set_defaults(func=cmd_prune)

    d = sub.add_parser("demo-discontinuity", help="binary region as delta tends to 0 or 1")
    d.add_argument("--rho", type=float, required=True)
    d.add_argument("--D", type=float, nargs=1, required=True)
    d.add_argument("--delta", dest="delta_list", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4])
    d.add_argument("--side", choices=("zero", "one"), default="zero")
    d.add_argument("--out")
    d.set_defaults(func=cmd_demo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SrcrrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
