"""
Command-line front end.

Exit codes: 0 success, 1 negative verdict, 2 usage or input error.
Machine-readable JSON goes to ``--out``; a short summary goes to stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
import warnings
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import graph_geom as gg
from .errors import (ClassConditionViolated, NotParentOfW, PackingInsufficient, ScarTowerError,
                     TowerTruncated)
from .fock_states import SparseState, dicke_state, tower_state
from .op_algebra import Operator, locality_metrics
from .parent_decomp import (DecompositionCertificate, KINDS, check_certificate, classify_terms,
                            decompose, sample_parent)
from .spectral_verify import (EQUALLY_SPACED, annihilation_induction_check, finite_fraction_check,
                              freeze_check, theorem_precondition_check, tower_energies)
from .tower_forge import (PRESETS, GateCircuit, TowerSpec, apply_circuit, build_mapping_circuit,
                          check_classes, measure_locality_growth)

OK, NEGATIVE, USAGE = 0, 1, 2


class InputError(Exception):
    pass


# -- input helpers ----------------------------------------------------------

def load_json(path: str) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def write_json(data: Any, path: str | None) -> None:
    if path is None:
        return
    text = json.dumps(data, sort_keys=True, indent=2) + "\n"
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None


_GRAPH_RE = re.compile(r"^(chain|ring|grid|torus):(\d+)(?:x(\d+))?$")


def parse_graph(spec: str) -> gg.SiteGraph:
    """``chain:N``, ``ring:N``, ``grid:LxM``, ``torus:LxM`` or a graph JSON file."""
    m = _GRAPH_RE.match(spec)
    if m:
        kind, a, b = m.group(1), int(m.group(2)), m.group(3)
        if kind in ("chain", "ring"):
            if b is not None:
                raise InputError(f"{spec}: chains take a single size")
            return gg.chain(a, periodic=kind == "ring")
        if b is None:
            raise InputError(f"{spec}: grids need LxM")
        return gg.square_grid(a, int(b), periodic=kind == "torus")
    data = load_json(spec)
    try:
        return gg.SiteGraph.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{spec}: not a graph ({exc})") from None


def parse_tower(spec: str, g: gg.SiteGraph | None) -> TowerSpec:
    if spec in PRESETS:
        if g is None:
            raise InputError(f"preset tower {spec!r} needs --graph")
        return TowerSpec.from_preset(spec, g)
    data = load_json(spec)
    try:
        return TowerSpec.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{spec}: not a tower specification ({exc})") from None


def parse_operator(path: str) -> Operator:
    data = load_json(path)
    try:
        return Operator.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: not an operator ({exc})") from None


def parse_complexes(text: str) -> list[complex]:
    try:
        return [complex(x.replace(" ", "")) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"not a comma-separated list of numbers: {text!r}") from None


def parse_sites(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"not a comma-separated list of sites: {text!r}") from None


# -- subcommands ------------------------------------------------------------

def cmd_decompose(args) -> int:
    h = parse_operator(args.hamiltonian)
    g = parse_graph(args.graph)
    if args.check:
        cert = DecompositionCertificate.from_dict(load_json(args.check))
        chk = check_certificate(cert, h, g)
        print(f"certificate check: {'valid' if chk.ok else 'INVALID'} "
              f"(reconstruction {chk.reconstruction_error:.2e}, W residual {chk.max_w_residual:.2e}, "
              f"vacuum residual {chk.max_vacuum_residual:.2e}, max diameter {chk.max_diameter} <= {chk.diameter_bound})")
        return OK if chk.ok else NEGATIVE
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            cert = decompose(h, g)
    except NotParentOfW as exc:
        print(f"not a parent of W: violated rows {sorted(exc.violations)}")
        write_json({"verdict": "NotParentOfW",
                    "violations": {k: [str(m) for m in v] for k, v in exc.violations.items()}}, args.out)
        return NEGATIVE
    write_json(cert.to_dict(), args.out)
    for note in cert.warnings:
        print(f"note: {note}")
    print(f"Omega={cert.omega_0:.6g} omega={cert.omega:.6g} R={cert.R} "
          f"annihilators={len(cert.annihilators)} verified at N={cert.verified_at_n_sites}")
    return OK


def _graph_or_none(args) -> gg.SiteGraph | None:
    return parse_graph(args.graph) if getattr(args, "graph", None) else None


def cmd_verify_tower(args) -> int:
    h = parse_operator(args.hamiltonian)
    q = parse_tower(args.tower, _graph_or_none(args))
    try:
        rep = tower_energies(h, q, p_max=args.pmax, eigen_tol=args.tol, spacing_tol=args.spacing_tol)
    except TowerTruncated as exc:
        rep = exc.report
        print(f"tower ends at p={exc.last_valid}")
    write_json(rep.to_dict(), args.out)
    detail = f" at p={rep.bad_p}" if rep.bad_p else ""
    print(f"{rep.verdict}{detail}: Omega={rep.omega_0:.6g} omega={rep.omega:.6g} deviation={rep.deviation:.2e}")
    return OK if rep.verdict == EQUALLY_SPACED and rep.truncated_at is None else NEGATIVE


def cmd_induction(args) -> int:
    h = parse_operator(args.hamiltonian)
    q = parse_tower(args.tower, _graph_or_none(args))
    rep = annihilation_induction_check(h, q, k=args.k, tol=args.tol)
    write_json(rep.to_dict(), args.out)
    print(f"k={rep.k} gamma={rep.gamma}: hypothesis {'holds' if rep.hypothesis_holds else 'fails'}"
          f"{'' if rep.hypothesis_holds else ' at p=' + str(rep.hypothesis_failures)}, "
          f"conclusion {'holds' if rep.conclusion_holds else 'fails'}")
    if not rep.consistent:
        print("INCONSISTENT: hypothesis holds but conclusion fails")
    return OK if rep.hypothesis_holds and rep.conclusion_holds else NEGATIVE


def cmd_finite_fraction(args) -> int:
    h = parse_operator(args.hamiltonian)
    g = parse_graph(args.graph)
    q = parse_tower(args.tower, g)
    rep = finite_fraction_check(h, q, g, args.rmax, tol=args.tol)
    write_json(rep.to_dict(), args.out)
    print(f"checked p <= {rep.checked_up_to} (guaranteed bound {rep.theoretical_bound}"
          f"{'' if rep.chain_bound is None else ', chain bound ' + str(rep.chain_bound)}): "
          f"{'pass' if rep.passed else 'FAIL'}; annihilates base states: {rep.annihilates_base}")
    return OK if rep.passed and rep.annihilates_base and rep.range_ok else NEGATIVE


def cmd_pack(args) -> int:
    g = parse_graph(args.graph)
    bound = gg.packing_lower_bound(g, args.radius)
    if args.check:
        cert = load_json(args.check)
        ok = int(cert["radius"]) == args.radius and gg.check_packing(g, cert["centers"], args.radius)
        print(f"packing certificate {'valid' if ok else 'INVALID'}")
        return OK if ok else NEGATIVE
    centers = gg.pack_spheres(g, args.radius)
    ok = gg.check_packing(g, centers, args.radius) and len(centers) >= bound
    write_json({"radius": args.radius, "centers": centers}, args.out)
    print(f"{len(centers)} centers (bound {bound}): {centers}")
    return OK if ok else NEGATIVE


def cmd_layers(args) -> int:
    g = parse_graph(args.graph)
    bound = gg.layering_bound(g, args.radius)
    if args.check:
        cert = load_json(args.check)
        ok = int(cert["radius"]) == args.radius and gg.check_layers(g, cert["layers"], args.radius)
        print(f"layer certificate {'valid' if ok else 'INVALID'}")
        return OK if ok else NEGATIVE
    layers = gg.disjoint_layers(g, args.radius)
    ok = gg.check_layers(g, layers, args.radius) and len(layers) <= bound
    write_json({"radius": args.radius, "layers": layers}, args.out)
    print(f"{len(layers)} layers (bound {bound})")
    return OK if ok else NEGATIVE


def _circuit_checks(m: GateCircuit, q: TowerSpec) -> tuple[float, float]:
    n = q.n_sites
    out = apply_circuit(m, dicke_state(n, 1))
    res_w = out.normalized().distance(tower_state(q, 1, n))
    vac = SparseState.vacuum(n)
    res_0 = apply_circuit(m, vac).distance(vac)
    return res_w, res_0


def cmd_build_circuit(args) -> int:
    g = parse_graph(args.graph)
    q = parse_tower(args.tower, g)
    if args.check:
        m = GateCircuit.from_dict(load_json(args.check))
    else:
        m = build_mapping_circuit(q, g, mode=args.mode)
    res_w, res_0 = _circuit_checks(m, q)
    ok = res_w < 1e-12 and res_0 < 1e-12
    if not args.check:
        write_json(m.to_dict(), args.out)
    print(f"{m.depth} layers, {sum(1 for _ in m.gates())} gates; |M W - Q| = {res_w:.2e}, "
          f"|M 0 - 0| = {res_0:.2e}: {'ok' if ok else 'FAIL'}")
    return OK if ok else NEGATIVE


def cmd_locality_growth(args) -> int:
    g = parse_graph(args.graph)
    if args.circuit:
        m = GateCircuit.from_dict(load_json(args.circuit))
        bound = None
    else:
        if not args.tower:
            raise InputError("give --circuit or --tower")
        q = parse_tower(args.tower, g)
        m = build_mapping_circuit(q, g, mode=args.mode)
        rep = check_classes(q, g)
        bound = rep.delta_bound if rep.q1.satisfied else None
        if args.mode == "chain3":
            bound = 18
    probes = parse_sites(args.probes) if args.probes else None
    delta = measure_locality_growth(m, g, probe_sites=probes, cap=args.cap)
    ok = bound is None or delta <= bound
    write_json({"delta": delta, "bound": bound}, args.out)
    print(f"observed delta = {delta}" + ("" if bound is None else f" (bound {bound})"))
    return OK if ok else NEGATIVE


def cmd_freeze(args) -> int:
    g = _graph_or_none(args)
    q = parse_tower(args.tower, g)
    energies = parse_complexes(args.energies)
    if args.amplitudes:
        amps = np.array(parse_complexes(args.amplitudes))
    else:
        amps = np.ones(len(energies)) / np.sqrt(len(energies))
    if len(amps) != len(energies):
        raise InputError("need one amplitude per energy")
    amps = amps / np.linalg.norm(amps)
    cut = parse_sites(args.cut) if args.cut else list(range(q.n_sites // 2))
    rng = np.random.default_rng(args.seed)
    times = rng.uniform(0.0, args.tmax, size=args.n_times)
    dev = freeze_check(q, energies, amps, cut, times)
    ok = dev < args.tol
    write_json({"deviation": dev, "cut": cut, "times": times.tolist()}, args.out)
    print(f"max entropy deviation {dev:.2e}: {'frozen' if ok else 'NOT frozen'}")
    return OK if ok else NEGATIVE


def cmd_sample_parent(args) -> int:
    g = parse_graph(args.graph)
    h = sample_parent(g, args.rmax, args.terms, complex(args.omega0), complex(args.omega),
                      rng_seed=args.seed, hermitian=args.hermitian, kind=args.kind)
    write_json(h.to_dict(), args.out)
    m = locality_metrics(h, g)
    print(f"{len(h)} monomials, range {m.range}, {m.k_local}-local")
    return OK


def cmd_classify(args) -> int:
    h = parse_operator(args.hamiltonian)
    n = parse_graph(args.graph).n_sites if args.graph else args.n_sites
    rep = classify_terms(h, n_sites=n)
    write_json(rep.to_dict(), args.out)
    for row in rep.to_dict()["rows"]:
        print(f"({row['row']}): {row['n_terms']} terms, {row['status']}")
    return OK if rep.satisfied else NEGATIVE


def cmd_precheck(args) -> int:
    h = parse_operator(args.hamiltonian)
    g = parse_graph(args.graph)
    q = parse_tower(args.tower, g) if args.tower else None
    rep = theorem_precondition_check(h, g, q)
    write_json(rep.to_dict(), args.out)
    print(f"N={rep.n_sites} k={rep.k} R={rep.R} Delta={rep.max_degree}")
    print(f"  chain theorem:   N > {rep.chain_min}: {rep.chain_ok}")
    print(f"  graph theorem:   N > {rep.graph_min}: {rep.graph_ok}")
    t3 = "n/a" if rep.general_min is None else f"N > {rep.general_min}: {rep.general_ok}"
    print(f"  general towers:  {t3}")
    return OK


# -- parser -----------------------------------------------------------------

def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError("must be positive")
        return v
    return conv


def _natural(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scartower", description="Scar-tower algebra and verification toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=func)
        sp.add_argument("--out", help="write JSON result here")
        return sp

    graph_help = "graph JSON file or chain:N, ring:N, grid:LxM, torus:LxM"
    tower_help = "tower JSON file or preset: " + ", ".join(PRESETS)

    s = add("decompose", cmd_decompose, "certified decomposition of a parent of W")
    s.add_argument("--hamiltonian", required=True)
    s.add_argument("--graph", required=True, help=graph_help)
    s.add_argument("--check", metavar="CERT", help="re-verify an existing certificate instead")

    s = add("verify-tower", cmd_verify_tower, "tower energies and equal-spacing verdict")
    s.add_argument("--hamiltonian", required=True)
    s.add_argument("--tower", required=True, help=tower_help)
    s.add_argument("--graph", help=graph_help)
    s.add_argument("--pmax", type=_natural)
    s.add_argument("--tol", type=_positive(float), default=1e-10)
    s.add_argument("--spacing-tol", type=_positive(float), default=1e-9)

    s = add("induction-check", cmd_induction, "annihilation on low p implies all p")
    s.add_argument("--hamiltonian", required=True)
    s.add_argument("--tower", required=True, help=tower_help)
    s.add_argument("--graph", help=graph_help)
    s.add_argument("--k", type=_natural)
    s.add_argument("--tol", type=_positive(float), default=1e-10)

    s = add("finite-fraction", cmd_finite_fraction, "zero energies of pure annihilator sums")
    s.add_argument("--hamiltonian", required=True)
    s.add_argument("--tower", required=True, help=tower_help)
    s.add_argument("--graph", required=True, help=graph_help)
    s.add_argument("--rmax", type=_positive(int), required=True)
    s.add_argument("--tol", type=_positive(float), default=1e-10)

    for name, func, text in (("pack", cmd_pack, "greedy sphere packing"),
                             ("layers", cmd_layers, "disjoint-ball layering")):
        s = add(name, func, text)
        s.add_argument("--graph", required=True, help=graph_help)
        s.add_argument("--radius", type=_natural, required=True)
        s.add_argument("--check", metavar="CERT", help="re-verify an existing certificate instead")

    s = add("build-circuit", cmd_build_circuit, "gate circuit mapping W to the tower's first state")
    s.add_argument("--tower", required=True, help=tower_help)
    s.add_argument("--graph", required=True, help=graph_help)
    s.add_argument("--mode", choices=("ball", "chain5", "chain3"), default="ball")
    s.add_argument("--check", metavar="CIRCUIT", help="re-verify an existing circuit instead")

    s = add("locality-growth", cmd_locality_growth, "observed range growth under conjugation")
    s.add_argument("--graph", required=True, help=graph_help)
    s.add_argument("--circuit", help="circuit JSON")
    s.add_argument("--tower", help=tower_help)
    s.add_argument("--mode", choices=("ball", "chain5", "chain3"), default="ball")
    s.add_argument("--probes", help="comma-separated probe sites (default all)")
    s.add_argument("--cap", type=_positive(int), default=14)

    s = add("freeze-check", cmd_freeze, "entanglement of tower superpositions over time")
    s.add_argument("--tower", required=True, help=tower_help)
    s.add_argument("--graph", help=graph_help)
    s.add_argument("--energies", required=True, help="comma-separated E_0,E_1,...")
    s.add_argument("--amplitudes", help="comma-separated amplitudes (default uniform)")
    s.add_argument("--cut", help="comma-separated sites (default first half)")
    s.add_argument("--n-times", type=_positive(int), default=50)
    s.add_argument("--tmax", type=_positive(float), default=20.0)
    s.add_argument("--seed", type=_natural, default=0)
    s.add_argument("--tol", type=_positive(float), default=1e-10)

    s = add("sample-parent", cmd_sample_parent, "random parent Hamiltonian of W")
    s.add_argument("--graph", required=True, help=graph_help)
    s.add_argument("--rmax", type=_positive(int), default=3)
    s.add_argument("--terms", type=_natural, default=5)
    s.add_argument("--omega0", default="0")
    s.add_argument("--omega", default="1")
    s.add_argument("--seed", type=_natural, default=0)
    s.add_argument("--hermitian", action="store_true")
    s.add_argument("--kind", choices=KINDS)

    s = add("classify", cmd_classify, "per-row conditions for W to be an eigenstate")
    s.add_argument("--hamiltonian", required=True)
    grp = s.add_mutually_exclusive_group()
    grp.add_argument("--graph", help=graph_help)
    grp.add_argument("--n-sites", type=_natural)

    s = add("precheck", cmd_precheck, "system-size hypotheses of the spacing theorems")
    s.add_argument("--hamiltonian", required=True)
    s.add_argument("--graph", required=True, help=graph_help)
    s.add_argument("--tower", help=tower_help)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except (ClassConditionViolated, PackingInsufficient) as exc:
        print(f"negative: {exc}")
        return NEGATIVE
    except (ScarTowerError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
