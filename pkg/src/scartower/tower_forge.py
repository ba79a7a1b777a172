"""
Quasiparticle towers built from pure-creation operators.

A :class:`TowerSpec` is ``Q+ = sum_Y a_Y prod_{j in Y} s+_j``.  This module
checks the structural classes that make such towers behave like the Dicke
tower, builds the invertible gate circuit ``M`` with ``M|W> = |Q>`` and
``M|0> = |0>``, and measures how much conjugation by ``M`` spreads operators.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from .errors import (ClassConditionViolated, ConeTooLarge, DimensionCapExceeded,
                     DimensionMismatch, PackingInsufficient, SiteOutOfGraph)
from .fock_states import SparseState, bits_to_string
from .graph_geom import SiteGraph, check_layers, disjoint_layers
from .op_algebra import Monomial, Operator, from_matrix, locality_metrics, to_matrix

PRESETS = ("dicke", "s2", "nn")
DEFAULT_CONE_CAP = 14
DEFAULT_CONJUGATE_CAP = 10


# -- tower specifications ---------------------------------------------------

class TowerSpec:
    """Pure-creation operator ``sum_Y a_Y prod_{j in Y} s+_j`` on ``n_sites``.

    Terms with equal supports are merged; an empty support or a vanishing
    merged coefficient is rejected.
    """

    __slots__ = ("n_sites", "terms", "preset")

    def __init__(self, n_sites: int, terms: Iterable[tuple[Iterable[int], complex]], preset: str | None = None):
        merged: dict[frozenset, complex] = {}
        order: list[frozenset] = []
        for sites, coeff in terms:
            y = frozenset(int(s) for s in sites)
            if not y:
                raise ValueError("tower terms need a nonempty support")
            if max(y) >= n_sites or min(y) < 0:
                raise SiteOutOfGraph(f"term {sorted(y)} outside 0..{n_sites - 1}")
            if y not in merged:
                order.append(y)
                merged[y] = 0j
            merged[y] += complex(coeff)
        for y in order:
            if merged[y] == 0:
                raise ValueError(f"term {sorted(y)} has zero coefficient")
        self.n_sites = int(n_sites)
        self.terms = tuple((y, merged[y]) for y in order)
        self.preset = preset

    # presets
    @classmethod
    def dicke(cls, n_sites: int) -> "TowerSpec":
        return cls(n_sites, [((i,), 1.0) for i in range(n_sites)], preset="dicke")

    @classmethod
    def s2(cls, g: SiteGraph) -> "TowerSpec":
        """Sum of ``s+_i s+_j`` over graph edges; the paired tower on a ring."""
        return cls(g.n_sites, [(e, 1.0) for e in _ring_ordered_edges(g)], preset="s2")

    @classmethod
    def nn(cls, g: SiteGraph) -> "TowerSpec":
        """Product of ``s+`` over each radius-1 ball."""
        return cls(g.n_sites, [(g.ball(i, 1), 1.0) for i in range(g.n_sites)], preset="nn")

    @classmethod
    def from_preset(cls, name: str, g: SiteGraph) -> "TowerSpec":
        if name == "dicke":
            return cls.dicke(g.n_sites)
        if name == "s2":
            return cls.s2(g)
        if name == "nn":
            return cls.nn(g)
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")

    @classmethod
    def from_operator(cls, op: Operator, n_sites: int) -> "TowerSpec":
        terms = []
        for mono, c in op.sorted_items():
            if mono.annihilate_mask:
                raise ClassConditionViolated(f"{mono} is not a pure-creation monomial")
            terms.append((mono.creates, c))
        return cls(n_sites, terms)

    def operator(self) -> Operator:
        return Operator({Monomial.from_sites(sorted(y), ()): c for y, c in self.terms})

    def with_coefficients(self, coeffs: Sequence[complex]) -> "TowerSpec":
        if len(coeffs) != len(self.terms):
            raise ValueError("one coefficient per term required")
        return TowerSpec(self.n_sites, [(y, a) for (y, _), a in zip(self.terms, coeffs)])

    def __len__(self) -> int:
        return len(self.terms)

    def to_dict(self) -> dict:
        return {"n_sites": self.n_sites, "preset": self.preset,
                "terms": [{"sites": sorted(y), "coeff": [c.real, c.imag]} for y, c in self.terms]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "TowerSpec":
        return cls(int(data["n_sites"]), [(t["sites"], complex(*t["coeff"])) for t in data["terms"]],
                   preset=data.get("preset"))

    def __repr__(self) -> str:
        tag = f", preset={self.preset!r}" if self.preset else ""
        return f"TowerSpec(n_sites={self.n_sites}, terms={len(self.terms)}{tag})"


def _ring_ordered_edges(g: SiteGraph) -> list[tuple[int, int]]:
    # (i, i+1) ordering so that term i is {i, i+1} on rings
    out = []
    for i, j in g.edges():
        if i == 0 and j == g.n_sites - 1 and g.n_sites > 2:
            out.append((j, i))
        else:
            out.append((i, j))
    return sorted(out, key=lambda e: e[0])


def charge_of(q: TowerSpec) -> int | None:
    """Common support size ``c`` of all terms, or ``None`` if sizes differ."""
    sizes = {len(y) for y, _ in q.terms}
    return sizes.pop() if len(sizes) == 1 else None


# -- structural classes -----------------------------------------------------

@dataclass
class Q1Report:
    satisfied: bool
    c: int | None
    d: int | None
    assignment: dict[int, int] | None = None
    reason: str = ""


@dataclass
class Q2Report:
    satisfied: bool
    c: int | None
    d1: int | None
    d2: int | None
    reason: str = ""


@dataclass
class TowerClassReport:
    q1: Q1Report
    q2: Q2Report
    q3: bool
    charge: int | None
    max_degree: int
    delta_bound: int | None
    alpha: int | None
    beta: int | None
    gamma: int
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"q1": {"satisfied": self.q1.satisfied, "c": self.q1.c, "d": self.q1.d, "reason": self.q1.reason},
                "q2": {"satisfied": self.q2.satisfied, "c": self.q2.c, "d1": self.q2.d1, "d2": self.q2.d2,
                       "reason": self.q2.reason},
                "q3": {"satisfied": self.q3},
                "charge": self.charge, "max_degree": self.max_degree,
                "bounds": {"delta": self.delta_bound, "alpha": self.alpha, "beta": self.beta, "gamma": self.gamma},
                "notes": list(self.notes)}


def _anchor_distances(q: TowerSpec, g: SiteGraph) -> np.ndarray:
    """``D[i, t] = max_{j in Y_t} dist(i, j)``; unreachable is ``inf``."""
    dist = g.distance_matrix().astype(float)
    dist[dist < 0] = np.inf
    out = np.empty((g.n_sites, len(q.terms)))
    for t, (y, _) in enumerate(q.terms):
        out[:, t] = dist[:, sorted(y)].max(axis=1)
    return out


def site_assignment(q: TowerSpec, g: SiteGraph) -> tuple[int, dict[int, int]] | None:
    """Bijection site -> term with every term inside ``B_i(d)`` for minimal ``d``.

    Among assignments achieving the minimal ``d``, the one with the smallest
    total anchor distance is taken, then the one where site ``i`` is the
    lowest-index site of its term most often.  Returns ``None`` if no
    bijection exists.
    """
    n, m = g.n_sites, len(q.terms)
    if n != m or n == 0:
        return None
    anchor = _anchor_distances(q, g)
    rank = np.zeros_like(anchor)
    for t, (y, _) in enumerate(q.terms):
        ordered = sorted(y)
        for i in range(n):
            rank[i, t] = ordered.index(i) if i in y else len(ordered)
    finite = anchor[np.isfinite(anchor)]
    for d in sorted(set(finite.astype(int).tolist())):
        big = n * (n + 1) * (m + 1) + 1
        cost = np.where(anchor <= d, anchor * big + rank, np.inf)
        cost_f = np.where(np.isfinite(cost), cost, 1e18)
        rows, cols = linear_sum_assignment(cost_f)
        if np.all(np.isfinite(cost[rows, cols])):
            return d, {int(i): int(t) for i, t in zip(rows, cols)}
    return None


def delta_bound(d: int, max_degree: int) -> int:
    return 8 * d * (max_degree ** (4 * d) + 1)


def alpha_bound(R: int, delta: int) -> int:
    return 2 * R + 3 * delta


def beta_bound(d1: int, d2: int, r_max: int, max_degree: int) -> int:
    return max_degree ** (2 * (d1 - 1) + 2 * d2 + r_max) + 1


def gamma_bound(k: int) -> int:
    return 2 * k + 1


def check_classes(q: TowerSpec, g: SiteGraph, R: int = 1, r_max: int | None = None,
                  coverage_radius: int | None = None, k: int = 1) -> TowerClassReport:
    """Evaluate the three structural classes of ``q`` on ``g``.

    Parameters
    ----------
    R : int
        Hamiltonian range used for the ``alpha`` bound.
    r_max : int, optional
        Range fed to ``beta``; defaults to ``alpha(R)`` when available, else ``2R``.
    coverage_radius : int, optional
        Largest accepted ``d2``; defaults to ``d1``.
    k : int
        Locality used for ``gamma``.
    """
    if q.n_sites != g.n_sites:
        raise DimensionMismatch(f"tower has {q.n_sites} sites, graph has {g.n_sites}")
    c = charge_of(q)
    notes = ["decomposition via the circuit also needs the vacuum to be an eigenstate"]

    # q1
    if c is None:
        q1 = Q1Report(False, None, None, reason="terms have different sizes")
    else:
        found = site_assignment(q, g)
        if found is None:
            q1 = Q1Report(False, c, None, reason="no bijection between sites and terms")
        else:
            d, assign = found
            if c == 1 and any(q.terms[t][0] != {i} for i, t in assign.items()):
                q1 = Q1Report(False, c, d, assign, reason="single-site terms must sit on their own site")
            else:
                q1 = Q1Report(True, c, d, assign)
                if c == 1:
                    q1.reason = "c=1: the map is diagonal"

    # q2
    if c is None:
        q2 = Q2Report(False, None, None, None, reason="terms have different sizes")
    else:
        d1 = max(g.diameter_of(y) for y, _ in q.terms)
        dist = g.distance_matrix().astype(float)
        dist[dist < 0] = np.inf
        covered = np.full(g.n_sites, np.inf)
        for y, _ in q.terms:
            covered = np.minimum(covered, dist[:, sorted(y)].min(axis=1))
        d2f = float(covered.max()) if covered.size else 0.0
        limit = d1 if coverage_radius is None else coverage_radius
        if not np.isfinite(d2f):
            q2 = Q2Report(False, c, d1, None, reason="some site is not covered by any term")
        else:
            d2 = int(d2f)
            ok = d2 <= limit
            q2 = Q2Report(ok, c, d1, d2, reason="" if ok else f"coverage distance {d2} exceeds {limit}")

    gamma = gamma_bound(k)
    delta = alpha = beta = None
    if q1.satisfied:
        delta = 0 if q1.d == 0 else delta_bound(q1.d, g.max_degree)
        alpha = alpha_bound(R, delta)
    if q2.satisfied:
        rm = r_max if r_max is not None else (alpha if alpha is not None else 2 * R)
        beta = beta_bound(q2.d1, q2.d2, rm, g.max_degree)
    return TowerClassReport(q1, q2, True, c, g.max_degree, delta, alpha, beta, gamma, notes)


# -- gate circuits ----------------------------------------------------------

class Gate:
    """Invertible matrix acting on ``support`` (bit ``p`` of a local index is site ``support[p]``)."""

    __slots__ = ("support", "matrix", "_inverse", "_spread")

    def __init__(self, support: Sequence[int], matrix, inverse=None):
        support = tuple(int(s) for s in support)
        if len(set(support)) != len(support):
            raise ValueError("gate support has repeated sites")
        mat = sp.csc_matrix(matrix, dtype=complex)
        dim = 1 << len(support)
        if mat.shape != (dim, dim):
            raise DimensionMismatch(f"gate on {len(support)} sites needs a {dim}x{dim} matrix")
        mat.eliminate_zeros()
        self.support = support
        self.matrix = mat
        self._inverse = None if inverse is None else sp.csc_matrix(inverse, dtype=complex)
        self._spread = None

    @property
    def mask(self) -> int:
        return sum(1 << s for s in self.support)

    def inverse(self) -> "Gate":
        if self._inverse is None:
            if self.is_involution(tol=1e-13):
                self._inverse = self.matrix
            else:
                self._inverse = sp.csc_matrix(np.linalg.inv(self.matrix.toarray()))
        return Gate(self.support, self._inverse, inverse=self.matrix)

    def spread_table(self) -> np.ndarray:
        if self._spread is None:
            loc = np.arange(1 << len(self.support), dtype=np.int64)
            out = np.zeros_like(loc)
            for p, s in enumerate(self.support):
                out |= ((loc >> p) & 1) << s
            self._spread = out
        return self._spread

    def local_index(self, keys: np.ndarray) -> np.ndarray:
        out = np.zeros(keys.size, dtype=np.int64)
        for p, s in enumerate(self.support):
            out |= ((keys >> s) & 1) << p
        return out

    def act(self, keys: np.ndarray, vals: np.ndarray):
        """Expand every (key, amplitude) through the gate; returns unmerged arrays and source indices."""
        mat = self.matrix
        loc = self.local_index(keys)
        start = mat.indptr[loc]
        count = mat.indptr[loc + 1] - start
        total = int(count.sum())
        src = np.repeat(np.arange(keys.size), count)
        offs = np.arange(total) - np.repeat(np.cumsum(count) - count, count) + np.repeat(start, count)
        rows = mat.indices[offs]
        new_keys = (keys[src] & ~np.int64(self.mask)) | self.spread_table()[rows]
        return new_keys, vals[src] * mat.data[offs], src

    def is_involution(self, tol: float = 1e-12) -> bool:
        sq = self.matrix @ self.matrix - sp.identity(self.matrix.shape[0], format="csc")
        return sq.nnz == 0 or abs(sq).max() < tol

    def to_dict(self) -> dict:
        """Nonzero entries as ``[row, col, re, im]`` in column-major order."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.row, coo.col))
        return {"support": list(self.support),
                "entries": [[int(coo.row[k]), int(coo.col[k]), float(coo.data[k].real), float(coo.data[k].imag)]
                            for k in order]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Gate":
        dim = 1 << len(data["support"])
        arr = np.array(data["entries"], dtype=float).reshape(-1, 4)
        mat = sp.csc_matrix((arr[:, 2] + 1j * arr[:, 3], (arr[:, 0].astype(int), arr[:, 1].astype(int))),
                            shape=(dim, dim))
        return cls(data["support"], mat)


@dataclass
class GateCircuit:
    """Layers of gates with pairwise disjoint supports, applied first to last."""

    n_sites: int
    layers: list[list[Gate]]
    mode: str = "custom"

    def __post_init__(self):
        for layer in self.layers:
            seen: set[int] = set()
            for gate in layer:
                if seen & set(gate.support):
                    raise ValueError("gates within a layer must have disjoint supports")
                if max(gate.support, default=-1) >= self.n_sites:
                    raise DimensionMismatch("gate support outside the circuit")
                seen |= set(gate.support)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gates(self):
        for layer in self.layers:
            yield from layer

    def inverse(self) -> "GateCircuit":
        return GateCircuit(self.n_sites, [[g.inverse() for g in layer] for layer in reversed(self.layers)],
                           mode=self.mode + "-inverse")

    def to_dict(self) -> dict:
        return {"n_sites": self.n_sites, "mode": self.mode,
                "layers": [[g.to_dict() for g in layer] for layer in self.layers]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "GateCircuit":
        return cls(int(data["n_sites"]), [[Gate.from_dict(g) for g in layer] for layer in data["layers"]],
                   mode=data.get("mode", "custom"))


def _swap_gate(support: Sequence[int], site: int, target: Iterable[int], a: complex) -> Gate:
    """``(I - P) + a|Q><s| + (1/a)|s><Q|`` on ``support``."""
    support = list(support)
    pos = {s: p for p, s in enumerate(support)}
    e_s = 1 << pos[site]
    e_q = sum(1 << pos[j] for j in target)
    dim = 1 << len(support)
    diag = np.ones(dim, dtype=complex)
    if e_s == e_q:
        diag[e_s] = a
        return Gate(support, sp.diags(diag, format="csc"))
    diag[[e_s, e_q]] = 0
    mat = sp.diags(diag, format="lil")
    mat[e_q, e_s] = a
    mat[e_s, e_q] = 1 / a
    return Gate(support, mat.tocsc(), inverse=mat.tocsc())


def _require_ring_pairs(q: TowerSpec, g: SiteGraph, period: int) -> list[complex]:
    n = g.n_sites
    if n % period:
        raise ClassConditionViolated(f"this mode needs N to be a multiple of {period}")
    if sorted(map(sorted, g.edges())) != sorted(sorted((i, (i + 1) % n)) for i in range(n)):
        raise ClassConditionViolated("this mode needs a periodic chain")
    coeffs = {y: a for y, a in q.terms}
    out = []
    for i in range(n):
        y = frozenset((i, (i + 1) % n))
        if y not in coeffs:
            raise ClassConditionViolated(f"missing pair term {{{i}, {(i + 1) % n}}}")
        out.append(coeffs[y])
    if len(coeffs) != n:
        raise ClassConditionViolated("tower has terms other than nearest-neighbour pairs")
    return out


def build_mapping_circuit(q: TowerSpec, g: SiteGraph, mode: str = "ball",
                          layers: Sequence[Sequence[int]] | None = None) -> GateCircuit:
    """Circuit ``M`` with ``M|W> = |Q>`` (up to the norm of ``|Q>``) and ``M|0> = |0>``.

    Modes
    -----
    ball
        One gate per site ``i`` on ``B_i(2d)``, layered so that gate supports
        within a layer are disjoint.  ``layers`` may override the layering.
    chain5
        Nearest-neighbour pairs on a ring with ``N % 5 == 0``; five layers
        ``{5m + j}``.
    chain3
        Same tower, three-site gates on ``(i-1, i, i+1)`` swapping ``|010>``
        and ``|011>``; three layers ``{3m + j}``.
    """
    if q.n_sites != g.n_sites:
        raise DimensionMismatch(f"tower has {q.n_sites} sites, graph has {g.n_sites}")
    n = g.n_sites
    if mode == "chain3":
        coeffs = _require_ring_pairs(q, g, 3)
        gates = {i: _swap_gate([(i - 1) % n, i, (i + 1) % n], i, [i, (i + 1) % n], coeffs[i]) for i in range(n)}
        return GateCircuit(n, [[gates[i] for i in range(j, n, 3)] for j in range(3)], mode="chain3")
    if mode == "chain5":
        coeffs = _require_ring_pairs(q, g, 5)
        gates = {i: _swap_gate([(i + o) % n for o in (-2, -1, 0, 1, 2)], i, [i, (i + 1) % n], coeffs[i])
                 for i in range(n)}
        return GateCircuit(n, [[gates[i] for i in range(j, n, 5)] for j in range(5)], mode="chain5")
    if mode != "ball":
        raise ValueError(f"unknown mode {mode!r}")

    report = check_classes(q, g)
    if not report.q1.satisfied:
        raise ClassConditionViolated(f"tower fails the mapping class: {report.q1.reason}")
    d = report.q1.d
    radius = 2 * d
    if layers is None:
        layers = disjoint_layers(g, radius)
    elif not check_layers(g, layers, radius):
        raise ValueError(f"layers are not a valid radius-{radius} partition")
    gates = {}
    for i, t in report.q1.assignment.items():
        y, a = q.terms[t]
        if y == {i} and a == 1:
            continue
        support = sorted(g.ball(i, radius))
        gates[i] = _swap_gate(support, i, sorted(y), a)
    built = [[gates[i] for i in layer if i in gates] for layer in layers]
    return GateCircuit(n, [layer for layer in built if layer], mode="ball")


def apply_circuit(m: GateCircuit, psi: SparseState, inverse: bool = False) -> SparseState:
    if psi.n_sites != m.n_sites:
        raise DimensionMismatch(f"state has {psi.n_sites} sites, circuit has {m.n_sites}")
    circ = m.inverse() if inverse else m
    keys, vals = psi.keys, psi.vals
    for gate in circ.gates():
        new_keys, new_vals, _ = gate.act(keys, vals)
        st = SparseState.from_arrays(m.n_sites, new_keys, new_vals, prune=1e-15)
        keys, vals = st.keys, st.vals
    return SparseState.from_arrays(m.n_sites, keys, vals)


def circuit_matrix(m: GateCircuit, cap: int = DEFAULT_CONJUGATE_CAP + 4, inverse: bool = False) -> sp.csr_matrix:
    """Sparse matrix of the whole circuit on ``2**n_sites`` states."""
    if m.n_sites > cap:
        raise DimensionCapExceeded(f"{m.n_sites} sites exceeds cap {cap}")
    dim = 1 << m.n_sites
    total = sp.identity(dim, dtype=complex, format="csr")
    circ = m.inverse() if inverse else m
    basis = np.arange(dim, dtype=np.int64)
    for gate in circ.gates():
        new_keys, amps, src = gate.act(basis, np.ones(dim, dtype=complex))
        full = sp.csr_matrix((amps, (new_keys, basis[src])), shape=(dim, dim))
        total = full @ total
    return total


def _cone(m: GateCircuit, start: set[int], reverse: bool) -> tuple[set[int], list[list[Gate]]]:
    cone = set(start)
    used: list[list[Gate]] = []
    order = reversed(m.layers) if reverse else m.layers
    for layer in order:
        hit = [g for g in layer if cone & set(g.support)]
        for g in hit:
            cone |= set(g.support)
        used.append(hit)
    return cone, used


def conjugate_local(m: GateCircuit, op: Operator, forward: bool = True, cap: int = DEFAULT_CONE_CAP) -> Operator:
    """``M op M^-1`` (``forward``) or ``M^-1 op M`` restricted to the light cone."""
    cone, used = _cone(m, set(op.support), reverse=not forward)
    if len(cone) > cap:
        raise ConeTooLarge(f"light cone of {len(cone)} sites exceeds cap {cap}")
    sites = sorted(cone)
    relabel = {s: p for p, s in enumerate(sites)}
    local_op = Operator({Monomial.from_sites([relabel[s] for s in mono.creates],
                                             [relabel[s] for s in mono.annihilates]): c
                         for mono, c in op.items()})
    mat = to_matrix(local_op, len(sites), cap=cap, sparse=True)
    dim = 1 << len(sites)
    basis = np.arange(dim, dtype=np.int64)
    for layer in used:
        for gate in layer:
            g_use = gate if forward else gate.inverse()
            g_inv = gate.inverse() if forward else gate
            mats = []
            for gg in (g_use, g_inv):
                local = Gate([relabel[s] for s in gg.support], gg.matrix)
                new_keys, amps, src = local.act(basis, np.ones(dim, dtype=complex))
                mats.append(sp.csr_matrix((amps, (new_keys, basis[src])), shape=(dim, dim)))
            mat = mats[0] @ mat @ mats[1]
    return from_matrix(mat.toarray(), sites)


def measure_locality_growth(m: GateCircuit, g: SiteGraph, probe_sites: Iterable[int] | None = None,
                            cap: int = DEFAULT_CONE_CAP, probes: Sequence[Operator] | None = None) -> int:
    """Largest ``range - 1`` of ``M n_j M^-1`` and ``M^-1 n_j M`` over probe sites.

    Range-1 probes make this the observed growth ``delta``.  Extra ``probes``
    are measured as ``range(conjugate) - range(probe)``.
    """
    if m.n_sites != g.n_sites:
        raise DimensionMismatch("circuit and graph sizes differ")
    if probe_sites is None:
        probe_sites = range(g.n_sites)
    ops = [Operator({Monomial.from_sites((j,), (j,)): 1.0}) for j in probe_sites]
    ops += list(probes or [])
    worst = 0
    for op in ops:
        base = locality_metrics(op, g).range
        for forward in (True, False):
            out = conjugate_local(m, op, forward=forward, cap=cap)
            worst = max(worst, locality_metrics(out, g).range - base)
    return worst


def conjugate_hamiltonian(m: GateCircuit, h: Operator, n_sites: int, cap: int = DEFAULT_CONJUGATE_CAP) -> Operator:
    """``M h M^-1`` expanded back into monomials."""
    if n_sites != m.n_sites:
        raise DimensionMismatch("circuit and Hamiltonian sizes differ")
    if n_sites > cap:
        raise DimensionCapExceeded(f"{n_sites} sites exceeds conjugation cap {cap}")
    fwd = circuit_matrix(m, cap=cap)
    inv = circuit_matrix(m, cap=cap, inverse=True)
    hm = to_matrix(h, n_sites, cap=cap, sparse=True)
    return from_matrix((fwd @ hm @ inv).toarray())


# -- witnesses --------------------------------------------------------------

def tower_witness(q: TowerSpec, g: SiteGraph, r_max: int, p: int) -> str:
    """Union of ``p`` terms whose sites are pairwise at least ``2(d1-1) + r_max`` apart.

    Every configuration produced by local annihilators of diameter
    ``<= r_max`` acting on the tower holds two particles from one compact
    region, which this configuration avoids.
    """
    if p < 0:
        raise ValueError("p must be non-negative")
    c = charge_of(q)
    if c is None:
        raise ClassConditionViolated("witness needs a charged tower")
    d1 = max(g.diameter_of(y) for y, _ in q.terms)
    sep = 2 * (d1 - 1) + r_max
    dist = g.distance_matrix()
    chosen: list[frozenset] = []
    for y, _ in sorted(q.terms, key=lambda t: sorted(t[0])):
        if len(chosen) == p:
            break
        ok = True
        for z in chosen:
            block = dist[np.ix_(sorted(y), sorted(z))]
            if np.any((block >= 0) & (block < sep)):
                ok = False
                break
        if ok:
            chosen.append(y)
    if len(chosen) < p:
        raise PackingInsufficient(len(chosen), p)
    bits = 0
    for y in chosen:
        for s in y:
            bits |= 1 << s
    return bits_to_string(bits, g.n_sites)
