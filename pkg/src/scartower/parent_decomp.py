"""
Parent Hamiltonians of the W state.

Terms of an operator are sorted into five buckets by the number of creation
(``n``) and annihilation (``m``) sites of each normal-ordered monomial.  Each
bucket carries a linear condition that is necessary for ``|W>`` to be an
eigenstate; when all hold, :func:`decompose` rewrites the operator as

    Omega * I + omega * sum_i n_i + sum_X h_X,

with every ``h_X`` supported on a set of diameter at most ``2R`` and
annihilating both ``|W>`` and the vacuum.  The result is self-checked before
it is returned.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .errors import (DisconnectedGraph, NotParentOfW, PackingInsufficient,
                     ScarTowerError, SiteOutOfGraph)
from .fock_states import SparseState, apply, bits_to_string, dicke_state
from .graph_geom import SiteGraph, greedy_separated
from .op_algebra import (EQ_RTOL, Monomial, Operator, adjoint,
                         annihilate, identity, locality_metrics, monomial, multiply,
                         number, total_number)

ROW_CREATE = "n>=1,m=0"
ROW_MULTI_ANNIHILATE = "n>=0,m>=2"
ROW_GROUPED = "n>=2,m=1"
ROW_ANNIHILATE = "n=0,m=1"
ROW_HOPPING = "n=1,m=1"
ROWS = (ROW_CREATE, ROW_MULTI_ANNIHILATE, ROW_GROUPED, ROW_ANNIHILATE, ROW_HOPPING)

SATISFIED = "satisfied"
VIOLATED = "violated"
UNCONDITIONAL = "none"

CONDITIONS = {
    ROW_CREATE: "c^{J} = 0",
    ROW_MULTI_ANNIHILATE: "none",
    ROW_GROUPED: "sum_k c^{J}_k = 0 for every J",
    ROW_ANNIHILATE: "sum_k c_k = 0",
    ROW_HOPPING: "sum_k c^{j}_k = lambda for every j",
}

CERT_TOL = 1e-12


def row_of(mono: Monomial) -> str | None:
    """Bucket label of a monomial; ``None`` for the identity."""
    n = len(mono.creates)
    m = len(mono.annihilates)
    if n == 0 and m == 0:
        return None
    if m == 0:
        return ROW_CREATE
    if m >= 2:
        return ROW_MULTI_ANNIHILATE
    if n >= 2:
        return ROW_GROUPED
    return ROW_ANNIHILATE if n == 0 else ROW_HOPPING


@dataclass
class RowReport:
    label: str
    terms: list = field(default_factory=list)
    status: str = SATISFIED
    offending: list = field(default_factory=list)
    lam: complex | None = None

    @property
    def condition(self) -> str:
        return CONDITIONS[self.label]

    def to_dict(self) -> dict:
        out = {"row": self.label, "condition": self.condition, "status": self.status,
               "n_terms": len(self.terms), "offending": [str(m) for m in self.offending]}
        if self.lam is not None:
            out["lambda"] = [self.lam.real, self.lam.imag]
        return out


@dataclass
class TermClassification:
    rows: dict[str, RowReport]
    identity_coeff: complex

    @property
    def satisfied(self) -> bool:
        return all(r.status != VIOLATED for r in self.rows.values())

    @property
    def lam(self) -> complex:
        return self.rows[ROW_HOPPING].lam

    def violations(self) -> dict[str, list[Monomial]]:
        return {k: r.offending for k, r in self.rows.items() if r.status == VIOLATED}

    def __getitem__(self, label: str) -> RowReport:
        return self.rows[label]

    def to_dict(self) -> dict:
        return {"identity": [self.identity_coeff.real, self.identity_coeff.imag],
                "satisfied": self.satisfied,
                "rows": [self.rows[k].to_dict() for k in ROWS]}


def _tol(h: Operator, rtol: float) -> float:
    return rtol * max(1.0, h.max_abs())


def classify_terms(h: Operator, n_sites: int | None = None, rtol: float = EQ_RTOL) -> TermClassification:
    """Bucket the monomials of ``h`` and evaluate each bucket's condition.

    Parameters
    ----------
    h : Operator
    n_sites : int, optional
        System size.  The hopping condition must hold for every site ``j``;
        sites without any hopping term contribute a zero sum.  Defaults to the
        support of ``h``.
    rtol : float
        Tolerance for vanishing sums, relative to ``max(1, max |c|)``.
    """
    tol = _tol(h, rtol)
    rows = {label: RowReport(label) for label in ROWS}
    rows[ROW_MULTI_ANNIHILATE].status = UNCONDITIONAL
    ident = 0j
    for mono, c in h.sorted_items():
        label = row_of(mono)
        if label is None:
            ident = c
        else:
            rows[label].terms.append((mono, c))

    r1 = rows[ROW_CREATE]
    if r1.terms:
        r1.status = VIOLATED
        r1.offending = [m for m, _ in r1.terms]

    r3 = rows[ROW_GROUPED]
    groups: dict[int, list] = {}
    for mono, c in r3.terms:
        groups.setdefault(mono.create_mask, []).append((mono, c))
    for _, members in sorted(groups.items()):
        if abs(sum(c for _, c in members)) > tol:
            r3.offending.extend(m for m, _ in members)
    if r3.offending:
        r3.status = VIOLATED

    r4 = rows[ROW_ANNIHILATE]
    if abs(sum(c for _, c in r4.terms)) > tol:
        r4.status = VIOLATED
        r4.offending = [m for m, _ in r4.terms]

    r5 = rows[ROW_HOPPING]
    sums: dict[int, complex] = {}
    for mono, c in r5.terms:
        j = mono.creates[0]
        sums[j] = sums.get(j, 0j) + c
    sites = range(n_sites) if n_sites is not None else sorted(h.support)
    per_site = np.array([sums.get(j, 0j) for j in sites], dtype=complex)
    lam = complex(per_site.mean()) if per_site.size else 0j
    r5.lam = lam
    if per_site.size and np.max(np.abs(per_site - lam)) > tol:
        r5.status = VIOLATED
        bad = {j for j, s in zip(sites, per_site) if abs(s - lam) > tol}
        r5.offending = [m for m, _ in r5.terms if m.creates[0] in bad]
        if not r5.offending:
            r5.offending = [m for m, _ in r5.terms]
    return TermClassification(rows, complex(ident))


# -- certificates -----------------------------------------------------------

class Annihilator(NamedTuple):
    support: frozenset
    operator: Operator


@dataclass
class DecompositionCertificate:
    omega_0: complex
    omega: complex
    annihilators: list[Annihilator]
    R: int
    verified_at_n_sites: int
    warnings: list[str] = field(default_factory=list)

    @property
    def eigenvalue(self) -> complex:
        """Eigenvalue of ``|W>``."""
        return self.omega_0 + self.omega

    def annihilator_sum(self) -> Operator:
        total = Operator()
        for a in self.annihilators:
            total = total + a.operator
        return total

    def reconstruct(self) -> Operator:
        return (identity(self.omega_0) + self.omega * total_number(self.verified_at_n_sites)
                + self.annihilator_sum())

    def to_dict(self) -> dict:
        return {"omega0": [self.omega_0.real, self.omega_0.imag],
                "omega": [self.omega.real, self.omega.imag],
                "R": self.R,
                "annihilators": [{"support": sorted(a.support), "operator": a.operator.to_dict()}
                                 for a in self.annihilators],
                "verified_at_n_sites": self.verified_at_n_sites}

    @classmethod
    def from_dict(cls, data: Mapping) -> "DecompositionCertificate":
        return cls(omega_0=complex(*data["omega0"]), omega=complex(*data["omega"]), R=int(data["R"]),
                   annihilators=[Annihilator(frozenset(a["support"]), Operator.from_dict(a["operator"]))
                                 for a in data["annihilators"]],
                   verified_at_n_sites=int(data["verified_at_n_sites"]))


@dataclass
class CertificateCheck:
    reconstruction_error: float
    max_w_residual: float
    max_vacuum_residual: float
    max_diameter: int
    diameter_bound: int
    supports_ok: bool

    @property
    def ok(self) -> bool:
        return (self.reconstruction_error < CERT_TOL and self.max_w_residual < CERT_TOL
                and self.max_vacuum_residual < CERT_TOL and self.max_diameter <= self.diameter_bound
                and self.supports_ok)


def check_certificate(cert: DecompositionCertificate, h: Operator, g: SiteGraph) -> CertificateCheck:
    """Independently re-verify a certificate against ``h`` on ``g``."""
    n = g.n_sites
    scale = max(1.0, h.max_abs())
    recon = cert.reconstruct().distance(h) / scale
    w = dicke_state(n, 1)
    vac = SparseState.vacuum(n)
    w_res = vac_res = 0.0
    diam = 0
    supports_ok = True
    for a in cert.annihilators:
        w_res = max(w_res, apply(a.operator, w).norm() / scale)
        vac_res = max(vac_res, apply(a.operator, vac).norm() / scale)
        diam = max(diam, g.diameter_of(a.support))
        supports_ok &= a.operator.support <= a.support
    return CertificateCheck(recon, w_res, vac_res, diam, 2 * cert.R, supports_ok)


def has_separated_sites(g: SiteGraph, R: int) -> bool:
    """Three sites pairwise farther than ``R`` and two farther than ``2R``."""
    dist = g.distance_matrix()
    far = (dist > R) | (dist < 0)
    np.fill_diagonal(far, False)
    very_far = (dist > 2 * R) | (dist < 0)
    np.fill_diagonal(very_far, False)
    if not very_far.any():
        return False
    for i, j in zip(*np.nonzero(np.triu(far))):
        if np.any(far[i] & far[j]):
            return True
    return False


def decompose(h: Operator, g: SiteGraph) -> DecompositionCertificate:
    """Split a parent Hamiltonian of ``|W>`` into certified local annihilators.

    Raises
    ------
    NotParentOfW
        Some bucket condition fails; ``violations`` names the rows.
    DisconnectedGraph
        The spanning-tree step needs a connected graph.
    """
    if h.max_site() >= g.n_sites:
        raise SiteOutOfGraph(f"operator touches site {h.max_site()} outside graph of {g.n_sites}")
    cls = classify_terms(h, n_sites=g.n_sites)
    if not cls.satisfied:
        raise NotParentOfW(cls.violations())
    if not g.is_connected():
        raise DisconnectedGraph("decomposition needs a connected graph")
    R = max(1, locality_metrics(h, g).range)
    notes = []
    if not has_separated_sites(g, R):
        msg = f"graph too small for the separation argument at R={R}; certified numerically only"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)

    pieces: list[Annihilator] = []

    def emit(op: Operator):
        if op:
            pieces.append(Annihilator(op.support, op))

    for mono, c in cls[ROW_MULTI_ANNIHILATE].terms:
        emit(Operator({mono: c}))

    groups: dict[int, dict] = {}
    for mono, c in cls[ROW_GROUPED].terms:
        groups.setdefault(mono.create_mask, {})[mono] = c
    for _, terms in sorted(groups.items()):
        emit(Operator(terms))

    row4 = {m.annihilates[0]: c for m, c in cls[ROW_ANNIHILATE].terms}
    if row4:
        order, parent = g.bfs_tree(0)
        carry = dict(row4)
        for v in reversed(order[1:]):
            c = carry.pop(v, 0j)
            if c == 0:
                continue
            u = parent[v]
            emit(c * (annihilate(v) - annihilate(u)))
            carry[u] = carry.get(u, 0j) + c

    for mono, c in cls[ROW_HOPPING].terms:
        j, k = mono.creates[0], mono.annihilates[0]
        if j != k:
            emit(c * (Operator({mono: 1.0}) - number(j)))

    cert = DecompositionCertificate(omega_0=cls.identity_coeff, omega=cls.lam, annihilators=pieces,
                                    R=R, verified_at_n_sites=g.n_sites, warnings=notes)
    check = check_certificate(cert, h, g)
    if not check.ok:
        raise ScarTowerError(f"decomposition failed its self-check: {check}")
    return cert


# -- sampling ---------------------------------------------------------------

KINDS = ("row2", "row3", "tau", "hop", "tower", "exchange")
HERMITIAN_KINDS = ("row2", "row3", "tower", "exchange")


def _cluster(g: SiteGraph, size: int, r_max: int, rng: np.random.Generator) -> list[int]:
    """Random connected-ish set of up to ``size`` sites with diameter <= r_max."""
    anchor = int(rng.integers(g.n_sites))
    chosen = [anchor]
    cands = sorted(g.ball(anchor, r_max - 1) - {anchor})
    rng.shuffle(cands)
    for c in cands:
        if len(chosen) >= size:
            break
        if g.diameter_of(chosen + [c]) <= r_max:
            chosen.append(int(c))
    return sorted(chosen)


def _coeff(rng) -> complex:
    return complex(rng.normal(), rng.normal())


def singlet_projector(i: int, j: int) -> Operator:
    """Projector onto the antisymmetric one-particle state of sites ``i, j``.

    Kills every Dicke state.
    """
    hop = monomial((i,), (j,)) + monomial((j,), (i,))
    return 0.5 * (number(i) + number(j)) - monomial((i, j), (i, j)) - 0.5 * hop


def _random_local(sites: list[int], rng, n_terms: int = 3) -> Operator:
    out = Operator()
    for _ in range(n_terms):
        cm = am = 0
        for s in sites:
            code = int(rng.integers(4))
            if code in (1, 3):
                cm |= 1 << s
            if code in (2, 3):
                am |= 1 << s
        out = out + Operator({Monomial(cm, am): _coeff(rng)})
    return out


def _draw(g: SiteGraph, r_max: int, rng: np.random.Generator, kind: str, hermitian: bool) -> Operator:
    if kind == "row2":
        sites = _cluster(g, int(rng.integers(2, 4)), r_max, rng)
        if len(sites) < 2:
            return Operator()
        k = [s for s in sites if rng.random() < 0.7]
        if len(k) < 2:
            k = sites[:2]
        j = [s for s in sites if rng.random() < 0.5]
        if hermitian and len(j) < 2:
            j = sites[-2:]
        h = monomial(j, k, _coeff(rng))
    elif kind == "row3":
        sites = _cluster(g, int(rng.integers(2, 5)), r_max, rng)
        if len(sites) < 2:
            return Operator()
        jset = sites[:2] if len(sites) < 3 else [s for s in sites if rng.random() < 0.6] or sites[:2]
        if len(jset) < 2:
            jset = sites[:2]
        ks = sites if len(sites) >= 2 else sites * 2
        cs = np.array([_coeff(rng) for _ in ks])
        cs -= cs.mean()
        h = Operator()
        for kk, c in zip(ks, cs):
            h = h + monomial(jset, (kk,), c)
    elif kind == "tau":
        sites = _cluster(g, 2, r_max, rng)
        if len(sites) < 2:
            return Operator()
        h = _coeff(rng) * (annihilate(sites[0]) - annihilate(sites[1]))
    elif kind == "hop":
        sites = _cluster(g, 2, r_max, rng)
        if len(sites) < 2:
            return Operator()
        j, k = (sites if rng.random() < 0.5 else sites[::-1])
        h = _coeff(rng) * (monomial((j,), (k,)) - number(j))
    elif kind == "exchange":
        sites = _cluster(g, 2, r_max, rng)
        if len(sites) < 2:
            return Operator()
        i, j = sites
        c = float(rng.normal()) if hermitian else _coeff(rng)
        ex = monomial((i,), (j,)) + monomial((j,), (i,)) - number(i) - number(j)
        return c * ex
    elif kind == "tower":
        sites = _cluster(g, int(rng.integers(2, 4)), r_max, rng)
        if len(sites) < 2:
            return Operator()
        i, j = (int(s) for s in rng.choice(sites, size=2, replace=False))
        p = singlet_projector(i, j)
        a = _random_local(sites, rng)
        if hermitian:
            return multiply(multiply(p, a + adjoint(a)), p)
        return multiply(a, p)
    else:
        raise ValueError(f"unknown annihilator kind {kind!r}; choose from {KINDS}")
    if hermitian:
        if kind in ("tau", "hop"):
            raise ValueError(f"kind {kind!r} has no Hermitian annihilator form")
        h = h + adjoint(h)
    return h


def sample_annihilator(g: SiteGraph, r_max: int, rng_seed: int, kind: str | None = None,
                       hermitian: bool = False) -> Operator:
    """Random local operator killing ``|W>`` and the vacuum.

    ``kind`` picks the family (see ``KINDS``); by default one is drawn from
    the seed.  The ``tower`` family also kills every Dicke state.
    """
    if r_max < 2:
        raise ValueError("r_max must be at least 2")
    rng = np.random.default_rng(rng_seed)
    return _sample(g, r_max, rng, kind, hermitian)


def _sample(g, r_max, rng, kind, hermitian) -> Operator:
    pool = HERMITIAN_KINDS if hermitian else KINDS
    for _ in range(32):
        k = kind if kind is not None else pool[int(rng.integers(len(pool)))]
        h = _draw(g, r_max, rng, k, hermitian)
        if h:
            return h
    raise ValueError("could not place an annihilator on this graph")


def sample_parent(g: SiteGraph, r_max: int, n_terms: int, omega_0: complex = 0.0, omega: complex = 0.0,
                  rng_seed: int = 0, hermitian: bool = False, kind: str | None = None) -> Operator:
    """``omega_0 * I + omega * sum n + (n_terms sampled annihilators)``."""
    rng = np.random.default_rng(rng_seed)
    h = identity(omega_0) + omega * total_number(g.n_sites)
    for _ in range(n_terms):
        h = h + _sample(g, r_max, rng, kind, hermitian)
    return h


def witness_sites(g: SiteGraph, r_max: int, p: int) -> list[int]:
    if p < 0:
        raise ValueError("p must be non-negative")
    sites = greedy_separated(g, max(1, r_max))
    if len(sites) < p:
        raise PackingInsufficient(len(sites), p)
    return sites[:p]


def witness_state(g: SiteGraph, r_max: int, p: int) -> str:
    """``p`` particles pairwise at distance ``>= r_max``, as a little-endian bitstring.

    No region of diameter ``r_max`` holds two of them.
    """
    bits = sum(1 << s for s in witness_sites(g, r_max, p))
    return bits_to_string(bits, g.n_sites)
