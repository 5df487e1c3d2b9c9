"""Command-line interface: ``qgraph <verb> ...``.

Every run prints one JSON report on stdout with a ``"checks"`` array of
``{"name", "pass", "deviation"}`` entries.  Exit status: 0 when all checks
pass, 1 when a verification fails, 2 on input errors.  The environment
variable ``QGRAPH_TOL`` (or ``--tol``) sets the tolerance, which must lie in
``[1e-14, 1e-3]``.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .bimodule import bimodule_from_adjacency
from .cayley import (_as_element, bilipschitz_constant, cayley_adjacency, central_walk_operator, filtration_inclusions,
                     folner_check, growth, growth_verdict, is_generating, regularity_deviation,
                     validate_generator)
from .choi import DEFAULT_TOL, classify, degree
from .fusion import (HARD_HORIZON, FiniteGroupDual, FusionDual, FusionError, GroupDual, HorizonOverflow,
                     NoProviderError, builtin)
from .io import (InputError, dump_bimodule, dump_element, dump_maps, dump_space, dump_two_sided, load_json,
                 parse_adjacency, parse_dual, parse_element, parse_space, to_jsonable)
from .qgfourier import (FiniteDualPair, classify_convolution, convolve, convolve_fourier, plancherel_deviation,
                        symmetry_report)
from .qspace import SpaceError, check_delta_form, kms_inner, m_star, mult, weight
from .sampling import random_element

TOL_MIN, TOL_MAX = 1e-14, 1e-3
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
PAIR_TYPES = (FiniteGroupDual, GroupDual)


class Report:
    def __init__(self, command: str, tol: float, seed: Optional[int]):
        self.data = {"command": command, "version": __version__, "tolerance": tol, "seed": seed,
                     "checks": [], "result": {}}

    def check(self, name: str, passed: bool, deviation: Optional[float] = None):
        self.data["checks"].append({"name": name, "pass": bool(passed),
                                    "deviation": None if deviation is None else float(deviation)})

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.data["checks"])

    def __setitem__(self, key, value):
        self.data["result"][key] = value


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _tolerance(args) -> float:
    raw = args.tol if args.tol is not None else os.environ.get("QGRAPH_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        tol = float(raw)
    except ValueError as exc:
        raise InputError(f"tolerance {raw!r} is not a number") from exc
    if not TOL_MIN <= tol <= TOL_MAX:
        raise InputError(f"tolerance {tol:g} outside [{TOL_MIN:g}, {TOL_MAX:g}]")
    return tol


def _dual(args) -> FusionDual:
    if getattr(args, "dual_file", None):
        return parse_dual(load_json(args.dual_file))
    if not getattr(args, "dual", None):
        raise InputError("a dual is required (--dual or --dual-file)")
    params = {}
    for key in ("q", "N", "d", "k", "group"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if args.dual == "zd" and "d" in params:
        params["d"] = int(params["d"])
    try:
        return builtin(args.dual, **params)
    except FusionError as exc:
        raise InputError(str(exc)) from exc


def _labels(dual: FusionDual, raw: Optional[Sequence[str]], what: str = "--gen") -> List:
    if not raw:
        raise InputError(f"{what} is required")
    out = []
    for item in raw:
        parts = item.split(";") if ";" in item else [item]
        for p in parts:
            try:
                out.append(dual.parse_label(p))
            except (ValueError, FusionError) as exc:
                raise InputError(f"{what}: bad label {p!r}: {exc}") from exc
    return out


def _generator(dual: FusionDual, args, files_attr="gen_file", labels_attr="gen"):
    path = getattr(args, files_attr, None)
    if path:
        return parse_element(load_json(path), parse_label=dual.parse_label)
    return _labels(dual, getattr(args, labels_attr, None), "--" + labels_attr.replace("_", "-"))


def _horizon(args) -> int:
    h = args.horizon
    if h < 0 or h > HARD_HORIZON:
        raise InputError(f"horizon {h} outside [0, {HARD_HORIZON}]")
    return h


def _emit(report: Report, args) -> int:
    text = json.dumps(to_jsonable(report.data), indent=2)
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK if report.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def cmd_space_check(args, tol) -> int:
    space = parse_space(load_json(args.file))
    rep = Report("space check", tol, args.seed)
    delta = check_delta_form(space, tol)
    rep.check("mm_star_identity", delta.passed, delta.deviation)
    rng = np.random.default_rng(args.seed)
    worst_pos = 0.0
    worst_bimod = 0.0
    for _ in range(args.samples):
        x = random_element(space, rng)
        y = random_element(space, rng)
        worst_pos = max(worst_pos, max(0.0, -kms_inner(space, x, x).real))
        lhs = mult(space, m_star(space, x @ y))
        rhs = x @ mult(space, m_star(space, y))
        worst_bimod = max(worst_bimod, (lhs - rhs).norm())
    rep.check("kms_inner_positive", worst_pos <= tol, worst_pos)
    rep.check("m_m_star_bimodular", worst_bimod <= tol * 10, worst_bimod)
    rep["blocks"] = [{"label": str(b.label), "dim": b.dim, "coefficient": b.coef} for b in space.blocks]
    rep["delta_squared"] = delta.as_dict()["delta_sq"]
    rep["weight_of_unit"] = weight(space, space.unit()).real
    rep["tracial"] = space.is_tracial
    return _emit(rep, args)


FLAG_NAMES = ("schur_idempotent", "real", "completely_positive", "kms_symmetric", "gns_symmetric", "loop_free")


def cmd_adjacency_verify(args, tol) -> int:
    A = parse_adjacency(load_json(args.file))
    rep = Report("adjacency verify", tol, args.seed)
    c = classify(A, tol)
    required = set(args.require.split(",")) if args.require else {"schur_idempotent", "completely_positive"}
    unknown = required - set(FLAG_NAMES)
    if unknown:
        raise InputError(f"--require: unknown properties {sorted(unknown)}")
    flags = c.as_dict()
    for name in FLAG_NAMES:
        if name in required:
            rep.check(name, flags[name], c.deviations[name])
    rep["classification"] = flags
    rep["is_quantum_adjacency"] = c.is_quantum_adjacency
    rep["is_quantum_graph"] = c.is_quantum_graph
    deg = degree(A)
    rep["degree"] = dump_element(deg)
    return _emit(rep, args)


def cmd_adjacency_convert(args, tol) -> int:
    A = parse_adjacency(load_json(args.file))
    rep = Report("adjacency convert", tol, args.seed)
    if args.to == "choi":
        rep["choi"] = dump_two_sided(A.choi)
    elif args.to == "map":
        rep["maps"] = dump_maps(A)
    else:
        c = classify(A, tol)
        if not c.is_quantum_adjacency:
            rep.check("projection_for_bimodule", False, c.deviations["schur_idempotent"])
        else:
            rep["bimodule"] = dump_bimodule(bimodule_from_adjacency(A, tol))
    rep["space"] = dump_space(A.space)
    return _emit(rep, args)


def _pair(dual) -> FiniteDualPair:
    try:
        return FiniteDualPair(dual)
    except NoProviderError as exc:
        raise InputError(f"fourier needs a finite dual pair: {exc}") from exc


def cmd_fourier(args, tol) -> int:
    dual = _dual(args)
    pair = _pair(dual)
    rep = Report("fourier", tol, args.seed)
    if args.element:
        x = parse_element(load_json(args.element), dual.space(pair.labels), dual.parse_label)
        f = pair.fourier(x)
        back = pair.inverse_fourier(f)
        dev = (back - x).norm()
        rep.check("round_trip", dev <= tol, dev)
        pd = plancherel_deviation(pair, x)
        rep.check("plancherel", pd <= tol, pd)
        rep["fourier"] = f
    else:
        rep.check("orthogonality", pair.orthogonality_deviation() <= tol, pair.orthogonality_deviation())
        rep["labels"] = [dual.format_label(a) for a in pair.labels]
        rep["dims"] = [dual.dim(a) for a in pair.labels]
    return _emit(rep, args)


def cmd_convolve(args, tol) -> int:
    dual = _dual(args)
    P = parse_element(load_json(args.P), parse_label=dual.parse_label)
    x = parse_element(load_json(args.x), parse_label=dual.parse_label)
    rep = Report("convolve", tol, args.seed)
    y = convolve(dual, P, x)
    rep["result"] = dump_element(y, dual.format_label)
    if isinstance(dual, PAIR_TYPES):
        dev = (convolve_fourier(FiniteDualPair(dual), P, x) - y).norm()
        rep.check("fourier_path_agrees", dev <= tol * max(1.0, y.norm()), dev)
    return _emit(rep, args)


def cmd_symmetry(args, tol) -> int:
    dual = _dual(args)
    P = _as_element(dual, _generator(dual, args))
    rep = Report("symmetry", tol, args.seed)
    s = symmetry_report(dual, P, tol)
    rep["symmetry"] = s.as_dict()
    if isinstance(dual, PAIR_TYPES):
        c = classify_convolution(dual, P, tol)
        rep.check("kms_matches_classifier", c.kms_symmetric == s.kms, None)
        rep.check("gns_matches_classifier", c.gns_symmetric == s.gns, None)
        rep["classification"] = c.as_dict()
    return _emit(rep, args)


def _write_growth_csv(fh, series) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "ball_size_labels", "a_n", "a_n_pow_inv_n"])
    for n, size, a, r in series.rows():
        w.writerow([n, size, repr(float(a)), "" if np.isnan(r) else repr(float(r))])


def cmd_cayley(args, tol) -> int:
    dual = _dual(args)
    horizon = _horizon(args)
    P = _generator(dual, args)
    rep = Report(f"cayley {args.verb}", tol, args.seed)
    rep["dual"] = dual.descriptor()
    if args.verb == "build":
        v = validate_generator(dual, P, tol)
        rep.check("generator_valid", v.valid, None)
        rep["generator"] = v.as_dict()
        g = is_generating(dual, P, horizon)
        rep["generation"] = g.as_dict()
        if args.window is not None and (dual.has_intertwiners or v.central):
            window = list(dual.labels(args.window))
            keep = set(window)
            A = cayley_adjacency(dual, P, window)
            c = classify(A, tol)
            for name in ("schur_idempotent", "completely_positive", "kms_symmetric", "loop_free"):
                rep.check(name, getattr(c, name), c.deviations[name])
            S = _as_element(dual, P).support()
            interior = [a for a in window if all(b in keep for s in S for b in dual.fuse(a, s))]
            # x -> P * x has degree h_L(P), which equals h_R(P) for central P
            deg = v.degree if v.central else v.degree_left
            dev = regularity_deviation(A, deg, interior)
            rep.check("regular", dev <= tol * max(1.0, deg), dev)
    elif args.verb == "growth":
        series = growth(dual, P, horizon)
        verdict = growth_verdict(series)
        rep["verdict"] = verdict.as_dict()
        rep["a_n"] = series.a
        rep["classical"] = series.classical
        if args.csv:
            with open(args.csv, "w", newline="", encoding="utf-8") as fh:
                _write_growth_csv(fh, series)
            rep["csv"] = args.csv
        if args.format == "csv":
            if args.out:
                with open(args.out, "w", newline="", encoding="utf-8") as fh:
                    _write_growth_csv(fh, series)
            else:
                _write_growth_csv(sys.stdout, series)
            return EXIT_OK if rep.passed else EXIT_FAIL
    elif args.verb == "folner":
        labels = list(P) if isinstance(P, list) else list(P.support())
        mu = set(labels) | {dual.trivial}
        res = folner_check(dual, mu, args.eps, horizon)
        rep["folner"] = res.as_dict()
    elif args.verb == "bilipschitz":
        P2 = _generator(dual, args, "gen2_file", "gen2")
        res = bilipschitz_constant(dual, P, P2, horizon)
        rep["bilipschitz"] = res.as_dict()
        if res.M is not None and isinstance(P, list) and isinstance(P2, list):
            inc = filtration_inclusions(dual, P, P2, res.M, min(horizon, 12))
            rep.check("filtration_inclusions", inc["forward"] and inc["backward"], None)
    elif args.verb == "walk":
        res = central_walk_operator(dual, P, horizon)
        rep["walk"] = res.as_dict()
    return _emit(rep, args)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--tol", help="tolerance (overrides QGRAPH_TOL)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomised checks (recorded in the report)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")


def _add_dual(p):
    p.add_argument("--dual", help="built-in dual: su_q2, su2, o_plus, u_plus, zd, z, free, group, dual")
    p.add_argument("--dual-file", help="JSON dual descriptor")
    p.add_argument("--q", type=float, help="deformation parameter for su_q2")
    p.add_argument("--N", type=int, help="matrix size for o_plus / u_plus")
    p.add_argument("--d", type=float, help="quantum dimension (o_plus / u_plus) or rank (zd)")
    p.add_argument("--k", type=int, help="rank of the free group")
    p.add_argument("--group", help="finite group: S3, D4, Z<n>")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgraph", description="Quantum graph workbench")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("space", help="quantum space checks")
    ssub = sp.add_subparsers(dest="action", required=True)
    p = ssub.add_parser("check", help="check m m^* = Id and KMS properties")
    p.add_argument("file")
    p.add_argument("--samples", type=int, default=5)
    _add_common(p)

    ap = sub.add_parser("adjacency", help="adjacency verification and conversion")
    asub = ap.add_subparsers(dest="action", required=True)
    p = asub.add_parser("verify")
    p.add_argument("file")
    p.add_argument("--require", help="comma-separated properties that must hold "
                                     "(default: schur_idempotent,completely_positive)")
    _add_common(p)
    p = asub.add_parser("convert")
    p.add_argument("file")
    p.add_argument("--to", choices=("choi", "map", "bimodule"), required=True)
    _add_common(p)

    p = sub.add_parser("fourier", help="Fourier transform on a finite dual pair")
    _add_dual(p)
    p.add_argument("--element", help="JSON element to transform")
    _add_common(p)

    p = sub.add_parser("convolve", help="convolution P * x")
    _add_dual(p)
    p.add_argument("P")
    p.add_argument("x")
    _add_common(p)

    p = sub.add_parser("symmetry", help="GNS/KMS symmetry of a convolution graph")
    _add_dual(p)
    p.add_argument("--gen", action="append")
    p.add_argument("--gen-file")
    _add_common(p)

    cp = sub.add_parser("cayley", help="quantum Cayley graph analyses")
    csub = cp.add_subparsers(dest="verb", required=True)
    for verb in ("build", "growth", "folner", "bilipschitz", "walk"):
        p = csub.add_parser(verb)
        _add_dual(p)
        p.add_argument("--gen", action="append", help="generator label (repeatable, or ';'-separated)")
        p.add_argument("--gen-file", help="JSON element used as generator")
        p.add_argument("--horizon", type=int, default=12)
        if verb == "build":
            p.add_argument("--window", type=int, help="also build and classify the truncated adjacency")
        if verb == "growth":
            p.add_argument("--csv", help="also write n, ball_size_labels, a_n, a_n_pow_inv_n to this file")
            p.add_argument("--format", choices=("json", "csv"), default="json",
                           help="csv prints the series instead of the JSON report")
        if verb == "folner":
            p.add_argument("--eps", type=float, default=0.1)
        if verb == "bilipschitz":
            p.add_argument("--gen2", action="append")
            p.add_argument("--gen2-file")
        _add_common(p)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        tol = _tolerance(args)
        if args.command == "space":
            return cmd_space_check(args, tol)
        if args.command == "adjacency":
            return cmd_adjacency_verify(args, tol) if args.action == "verify" else cmd_adjacency_convert(args, tol)
        if args.command == "fourier":
            return cmd_fourier(args, tol)
        if args.command == "convolve":
            return cmd_convolve(args, tol)
        if args.command == "symmetry":
            return cmd_symmetry(args, tol)
        return cmd_cayley(args, tol)
    except (InputError, SpaceError, FusionError, HorizonOverflow, NoProviderError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
