"""Acceptance criteria, each run at its stated tolerance and size."""
import json
import math
import time
import warnings

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from scartower.cli import run
from scartower.fock_states import SparseState, apply, dicke_state, tower_state
from scartower.graph_geom import chain, disjoint_layers, pack_spheres, random_bounded_degree, square_grid
from scartower.op_algebra import (Operator, adjoint, annihilate, commutator, identity,
                                  locality_metrics, monomial, multiply, nilpotency_depth, number,
                                  random_operator, to_matrix, total_create)
from scartower.parent_decomp import decompose, sample_annihilator, sample_parent
from scartower.spectral_verify import (EQUALLY_SPACED, UNEQUAL, annihilation_induction_check,
                                       finite_fraction_check, freeze_check, tower_energies)
from scartower.tower_forge import (TowerSpec, apply_circuit, build_mapping_circuit, check_classes,
                                   delta_bound, measure_locality_growth)

TOL = 1e-12


def quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return fn(*args, **kwargs)


def oracle_distances(g):
    """All-pairs distances from scipy, independent of the package BFS."""
    edges = g.edges()
    if not edges:
        d = np.full((g.n_sites, g.n_sites), np.inf)
        np.fill_diagonal(d, 0)
        return d
    i, j = np.array(edges).T
    adj = csr_matrix((np.ones(len(edges)), (i, j)), shape=(g.n_sites, g.n_sites))
    return shortest_path(adj, directed=False, unweighted=True)


def parent_instances():
    """Seeded parents on the ring of 12 and the 3x4 torus, Hermitian and not."""
    out = []
    for graph_name, g in (("ring12", chain(12, periodic=True)), ("torus3x4", square_grid(3, 4, periodic=True))):
        for seed in range(100):
            hermitian = seed % 2 == 1
            kind = "tower" if seed % 4 < 2 else None
            rng = np.random.default_rng(seed)
            omega_0, omega = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
            if hermitian:
                omega_0, omega = omega_0.real, omega.real
            h = sample_parent(g, 3, 1 + seed % 6, omega_0, omega, rng_seed=1000 + seed,
                              hermitian=hermitian, kind=kind)
            out.append((graph_name, g, seed, hermitian, h))
    return out


PARENTS = parent_instances()


def heisenberg(n, field):
    h = Operator()
    for i in range(n):
        j = (i + 1) % n
        h = (h + 0.5 * (monomial((i,), (j,)) + monomial((j,), (i,)))
             + monomial((i, j), (i, j)) - 0.5 * number(i) - 0.5 * number(j) + identity(0.25))
        h = h + field * (identity(0.5) - number(i))
    return h


@pytest.mark.criterion(1, "oracle equivalence of symbolic algebra")
def test_ac01_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(1, 7))
        a = random_operator(range(n), int(rng.integers(1, 6)), rng)
        b = random_operator(range(n), int(rng.integers(1, 6)), rng)
        ma, mb = to_matrix(a, n), to_matrix(b, n)
        worst = max(worst,
                    np.abs(to_matrix(multiply(a, b), n) - ma @ mb).max(),
                    np.abs(to_matrix(commutator(a, b), n) - (ma @ mb - mb @ ma)).max(),
                    np.abs(to_matrix(adjoint(a), n) - ma.conj().T).max())
    elapsed = time.perf_counter() - start
    print(f"AC1 max entry error {worst:.2e}, {elapsed:.2f} s")
    assert worst < 1e-12
    assert elapsed < 10


@pytest.mark.criterion(2, "decomposition round-trip")
def test_ac02_decomposition_roundtrip():
    start = time.perf_counter()
    w_cache, vac_cache = {}, {}
    for graph_name, g, seed, _, h in PARENTS:
        n = g.n_sites
        w = w_cache.setdefault(n, dicke_state(n, 1))
        vac = vac_cache.setdefault(n, SparseState.vacuum(n))
        R = locality_metrics(h, g).range
        assert R <= 3
        cert = quiet(decompose, h, g)
        scale = max(1.0, h.max_abs())
        assert cert.reconstruct().distance(h) / scale < TOL, (graph_name, seed)
        for a in cert.annihilators:
            assert apply(a.operator, w).norm() / scale < TOL
            assert apply(a.operator, vac).norm() / scale < TOL
            assert g.diameter_of(a.support) <= 2 * cert.R
    elapsed = time.perf_counter() - start
    print(f"AC2 {len(PARENTS)} parents in {elapsed:.2f} s")
    assert elapsed < 60


@pytest.mark.criterion(3, "equal spacing of Dicke towers")
def test_ac03_equal_spacing():
    eligible = {True: 0, False: 0}
    for graph_name, g, seed, hermitian, h in PARENTS:
        rep = tower_energies(h, TowerSpec.dicke(g.n_sites))
        assert rep.verdict != UNEQUAL, (graph_name, seed, rep.deviation)
        if all(r < 1e-10 for r in rep.residuals):
            assert rep.verdict == EQUALLY_SPACED
            assert rep.deviation < 1e-9
            eligible[hermitian] += 1
    print(f"AC3 all-eigenstate parents: Hermitian {eligible[True]}, non-Hermitian {eligible[False]}")
    assert eligible[True] > 0 and eligible[False] > 0
    for n in (8, 10):
        field = 1.0
        rep = tower_energies(heisenberg(n, field), TowerSpec.dicke(n))
        for p, e in enumerate(rep.energies):
            assert abs(e - (n / 4 + field * (n / 2 - p))) < 1e-10


def s_type_depth_exact():
    sdag = total_create(range(8))
    return [nilpotency_depth(annihilate(i), sdag, 5) for i in range(8)]


@pytest.mark.criterion(4, "nilpotency bounds")
def test_ac04_nilpotency():
    start = time.perf_counter()
    ring = chain(8, periodic=True)
    towers = {"dicke": TowerSpec.dicke(8).operator(), "s2": TowerSpec.s2(ring).operator(),
              "nn": TowerSpec.nn(ring).operator()}
    rng = np.random.default_rng(99)
    worst = {}
    for trial in range(200):
        k = 1 + trial % 3
        sites = sorted(rng.choice(8, size=k, replace=False).tolist())
        o = random_operator(sites, 4, rng, max_weight=k)
        for name, q in towers.items():
            depth = nilpotency_depth(o, q, 2 * k + 2)
            assert depth <= 2 * k + 1, (name, k, o)
            worst[(name, k)] = max(worst.get((name, k), 0), depth)
    assert s_type_depth_exact() == [3] * 8
    elapsed = time.perf_counter() - start
    print(f"AC4 largest depths {sorted(worst.items())}, {elapsed:.2f} s")
    assert elapsed < 30


def pair_tower_annihilators(n, rng):
    """Annihilators of the paired tower and the vacuum with diameter <= 3 on a ring."""
    h = Operator()
    for i in range(n):
        j, k = (i + 1) % n, (i + 2) % n
        h = h + complex(*rng.normal(size=2)) * (monomial((), (i, j)) - monomial((), (j, k)))
        h = h + complex(*rng.normal(size=2)) * monomial((), (i, k))
        h = h + complex(*rng.normal(size=2)) * monomial((i, k), (i, k))
    return h


@pytest.mark.criterion(5, "finite-fraction annihilation")
def test_ac05_finite_fraction():
    cases = []
    for g in (chain(12, periodic=True), square_grid(3, 4, periodic=True)):
        for seed in range(10):
            kind = ("row2", "row3", "tau", "hop", "tower", "exchange", None)[seed % 7]
            cases.append((g, TowerSpec.dicke(12), sample_parent(g, 3, 6, 0, 0, rng_seed=seed, kind=kind)))
    ring = chain(12, periodic=True)
    cases.append((ring, TowerSpec.s2(ring), pair_tower_annihilators(12, np.random.default_rng(5))))
    for g, q, h in cases:
        rep = finite_fraction_check(h, q, g, 3)
        assert rep.range_ok and rep.annihilates_base
        assert rep.checked_up_to >= rep.theoretical_bound
        if rep.chain_bound is not None:
            assert rep.checked_up_to >= rep.chain_bound
        for p in range(rep.checked_up_to + 1):
            assert rep.witness[p] is not None
            assert rep.witness_overlap[p] < TOL
            if rep.eigen[p]:
                assert abs(rep.energies[p]) < 1e-10
    print(f"AC5 {len(cases)} annihilator sums checked")


@pytest.mark.criterion(6, "mapping circuit correctness")
def test_ac06_circuits():
    cases = [(chain(10, periodic=True), "s2", "chain5", None),
             (chain(9, periodic=True), "s2", "chain3", 18),
             (square_grid(3, 3, periodic=True), "nn", "ball", None)]
    for g, preset, mode, extra in cases:
        q = TowerSpec.from_preset(preset, g)
        n = g.n_sites
        m = build_mapping_circuit(q, g, mode=mode)
        out = apply_circuit(m, dicke_state(n, 1))
        assert out.normalized().distance(tower_state(q, 1, n)) < TOL
        vac = SparseState.vacuum(n)
        assert apply_circuit(m, vac).distance(vac) < TOL
        rep = check_classes(q, g)
        d = rep.q1.d
        assert m.depth <= g.max_degree ** (4 * d) + 1
        delta = measure_locality_growth(m, g)
        assert delta <= delta_bound(d, g.max_degree)
        if extra is not None:
            assert delta <= extra
        print(f"AC6 {mode} N={n}: {m.depth} layers, delta {delta}")


@pytest.mark.criterion(7, "packing and layering bounds")
def test_ac07_graph_bounds():
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    graphs = [random_bounded_degree(int(rng.integers(4, 61)), int(rng.integers(1, 5)), rng) for _ in range(50)]
    graphs += [chain(n, periodic=p) for n in (7, 20, 60) for p in (False, True)]
    graphs += [square_grid(5, 6, periodic=p) for p in (False, True)]
    for g in graphs:
        dist = oracle_distances(g)
        delta = g.max_degree
        for r in (0, 1, 2):
            centers = pack_spheres(g, r)
            assert len(centers) >= math.ceil(g.n_sites / (delta ** (2 * r) + 1))
            sub = dist[np.ix_(centers, centers)]
            assert np.all(sub[~np.eye(len(centers), dtype=bool)] > 2 * r)
            layers = disjoint_layers(g, r)
            assert len(layers) <= delta ** (2 * r) + 1
            assert sorted(s for layer in layers for s in layer) == list(range(g.n_sites))
            for layer in layers:
                sub = dist[np.ix_(layer, layer)]
                assert np.all(sub[~np.eye(len(layer), dtype=bool)] > 2 * r)
    elapsed = time.perf_counter() - start
    print(f"AC7 {len(graphs)} graphs in {elapsed:.2f} s")
    assert elapsed < 10


@pytest.mark.criterion(8, "entanglement freezing")
def test_ac08_freezing():
    rng = np.random.default_rng(8)
    q = TowerSpec.dicke(8)
    worst = 0.0
    for _ in range(20):
        amps = rng.normal(size=9) + 1j * rng.normal(size=9)
        amps /= np.linalg.norm(amps)
        omega_0, omega = rng.normal(size=2)
        energies = omega_0 + omega * np.arange(9)
        times = rng.uniform(0, 20, size=50)
        worst = max(worst, freeze_check(q, energies, amps, range(4), times))
    print(f"AC8 max entropy deviation {worst:.2e}")
    assert worst < 1e-10


@pytest.mark.criterion(9, "induction on annihilation")
def test_ac09_induction():
    g = chain(10, periodic=True)
    q = TowerSpec.dicke(10)
    kinds = ("tower", "row2", "tau", "hop", "exchange")
    passes = 0
    for trial in range(50):
        rng = np.random.default_rng(trial)
        kind = kinds[trial % len(kinds)]
        h = Operator()
        for _ in range(int(rng.integers(1, 5))):
            h = h + sample_annihilator(g, 2, int(rng.integers(2**31)), kind=kind, hermitian=trial % 2 == 0
                                       and kind in ("tower", "row2", "exchange"))
        assert locality_metrics(h, g).k_local <= 2
        rep = annihilation_induction_check(h, q)
        assert rep.consistent, (trial, kind)
        passes += rep.hypothesis_holds
    print(f"AC9 hypothesis held in {passes} of 50 sums; no inconsistency")
    assert passes > 0


@pytest.mark.criterion(10, "CLI determinism and re-verification")
def test_ac10_cli(tmp_path):
    def twice(args, name):
        blobs = []
        for tag in "ab":
            out = tmp_path / f"{name}_{tag}.json"
            assert quiet(run, args + ["--out", str(out)]) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]
        return str(tmp_path / f"{name}_a.json")

    for graph in ("ring:12", "torus:3x4"):
        for seed in (0, 1, 2):
            extra = ["--hermitian"] if seed == 1 else []
            parent = twice(["sample-parent", "--graph", graph, "--seed", str(seed), "--omega0", "0.5-1j"] + extra,
                           f"parent_{graph[:4]}_{seed}")
            cert = twice(["decompose", "--hamiltonian", parent, "--graph", graph], f"cert_{graph[:4]}_{seed}")
            assert quiet(run, ["decompose", "--hamiltonian", parent, "--graph", graph, "--check", cert]) == 0
    pack = twice(["pack", "--graph", "torus:4x4", "--radius", "1"], "pack")
    assert run(["pack", "--graph", "torus:4x4", "--radius", "1", "--check", pack]) == 0
    layers = twice(["layers", "--graph", "ring:12", "--radius", "2"], "layers")
    assert run(["layers", "--graph", "ring:12", "--radius", "2", "--check", layers]) == 0
    for graph, mode in (("ring:10", "chain5"), ("ring:9", "chain3"), ("torus:3x3", "ball")):
        tower = "nn" if mode == "ball" else "s2"
        circ = twice(["build-circuit", "--tower", tower, "--graph", graph, "--mode", mode], f"circ_{mode}")
        assert run(["build-circuit", "--tower", tower, "--graph", graph, "--check", circ]) == 0
    data = json.loads((tmp_path / "cert_ring_0_a.json").read_text())
    assert set(data) == {"omega0", "omega", "R", "annihilators", "verified_at_n_sites"}
