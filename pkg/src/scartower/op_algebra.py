"""
Hard-core boson operators in the normal-ordered monomial basis.

A monomial ``s+_{j1} ... s+_{jn} s_{k1} ... s_{km}`` is stored as a pair of
bitmasks ``(create_mask, annihilate_mask)``.  A site in both masks carries the
number operator ``n = s+ s``.  Per site the local factor is therefore one of
``{1, s+, s, n}`` and products reduce with

    s+ s+ = s s = 0,   s+ s = n,   s s+ = 1 - n,

while operators on different sites commute.  All reductions are carried out
on whole bitmasks at once (see :func:`monomial_product`).

Site convention: ``|0>`` is the empty site, ``s+|0> = |1>``.  Basis index of an
occupation configuration is ``sum_i bit_i 2**i``.
"""
from __future__ import annotations

import math
import os
from typing import Iterable, Iterator, Mapping, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import DepthExceeded, DimensionCapExceeded, SiteOutOfGraph

PRUNE = 1e-14
EQ_RTOL = 1e-12
DEFAULT_DENSE_CAP = 14


def dense_cap() -> int:
    """Site cap for dense conversions; ``SCARTOWER_DIM_CAP`` overrides."""
    value = os.environ.get("SCARTOWER_DIM_CAP")
    return int(value) if value else DEFAULT_DENSE_CAP


def _bits(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def _mask(sites: Iterable[int]) -> int:
    m = 0
    for s in sites:
        s = int(s)
        if s < 0:
            raise SiteOutOfGraph(f"negative site index {s}")
        m |= 1 << s
    return m


class Monomial(NamedTuple):
    """Normal-ordered string ``prod_{j in creates} s+_j prod_{k in annihilates} s_k``."""

    create_mask: int
    annihilate_mask: int

    @classmethod
    def from_sites(cls, creates=(), annihilates=()) -> "Monomial":
        creates, annihilates = list(creates), list(annihilates)
        if len(set(creates)) != len(creates) or len(set(annihilates)) != len(annihilates):
            raise ValueError("repeated site inside creates or annihilates")
        return cls(_mask(creates), _mask(annihilates))

    @property
    def creates(self) -> tuple[int, ...]:
        return _bits(self.create_mask)

    @property
    def annihilates(self) -> tuple[int, ...]:
        return _bits(self.annihilate_mask)

    @property
    def sites(self) -> tuple[int, ...]:
        return _bits(self.create_mask | self.annihilate_mask)

    @property
    def support_mask(self) -> int:
        return self.create_mask | self.annihilate_mask

    def __str__(self) -> str:
        if not self.support_mask:
            return "1"
        parts = []
        for s in self.sites:
            c = self.create_mask >> s & 1
            a = self.annihilate_mask >> s & 1
            parts.append({(1, 0): "s+", (0, 1): "s", (1, 1): "n"}[c, a] + f"_{s}")
        return " ".join(parts)


IDENTITY_MONOMIAL = Monomial(0, 0)


def _subsets(mask: int) -> Iterator[int]:
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def monomial_product(a: Monomial, b: Monomial) -> list[tuple[Monomial, int]]:
    """Expand ``a * b`` into signed canonical monomials.

    On a single site the product ``s+^cA s^aA s+^cB s^aB`` is zero when two
    creations or two annihilations meet, and a contraction ``s s+ = 1 - n``
    happens wherever ``aA`` and ``cB`` are both set.  Each contraction site
    either keeps the outer factors (sign +1) or inserts ``n`` (sign -1); the
    second branch vanishes if that site already has ``cA`` or ``aB``.
    """
    ca, aa = a
    cb, ab = b
    if (aa & ab & ~cb) or (~aa & ca & cb):
        return []
    contract = aa & cb
    c_base = ca | (cb & ~contract)
    a_base = ab | (aa & ~contract)
    free = contract & ~ca & ~ab
    if not free:
        return [(Monomial(c_base, a_base), 1)]
    out = []
    for sub in _subsets(free):
        sign = -1 if bin(sub).count("1") & 1 else 1
        out.append((Monomial(c_base | sub, a_base | sub), sign))
    return out


class Operator:
    """Finite complex linear combination of canonical monomials.

    Instances are immutable.  Coefficients whose magnitude falls below
    ``prune`` are dropped on construction.  ``==`` compares term maps up to a
    tolerance relative to the largest coefficient (see :meth:`isclose`).
    """

    __slots__ = ("_terms",)
    __hash__ = None  # tolerance-based equality

    def __init__(self, terms: Mapping[Monomial, complex] | Iterable = (), prune: float = PRUNE):
        acc: dict[Monomial, complex] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for mono, coeff in items:
            mono = Monomial(*mono)
            acc[mono] = acc.get(mono, 0j) + complex(coeff)
        self._terms = {m: c for m, c in acc.items() if c != 0 and abs(c) >= prune}

    @classmethod
    def _raw(cls, terms: dict) -> "Operator":
        op = object.__new__(cls)
        op._terms = terms
        return op

    # -- container protocol -------------------------------------------------
    @property
    def terms(self) -> Mapping[Monomial, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, mono: Monomial) -> complex:
        return self._terms.get(Monomial(*mono), 0j)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def sorted_items(self) -> list[tuple[Monomial, complex]]:
        """Terms in a reproducible order (by site tuples)."""
        return sorted(self._terms.items(), key=lambda kv: (len(kv[0].sites), kv[0].creates, kv[0].annihilates))

    @property
    def support(self) -> frozenset[int]:
        m = 0
        for mono in self._terms:
            m |= mono.support_mask
        return frozenset(_bits(m))

    def max_site(self) -> int:
        """Largest site index touched, or -1 for identity/empty operators."""
        m = 0
        for mono in self._terms:
            m |= mono.support_mask
        return m.bit_length() - 1

    def max_abs(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def is_zero(self, atol: float = 0.0) -> bool:
        return all(abs(c) <= atol for c in self._terms.values())

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Operator):
            other = complex(other) * identity()
        acc = dict(self._terms)
        for m, c in other._terms.items():
            acc[m] = acc.get(m, 0j) + c
        return Operator(acc)

    __radd__ = __add__

    def __neg__(self):
        return Operator._raw({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Operator):
            other = complex(other) * identity()
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Operator):
            return multiply(self, other)
        other = complex(other)
        if other == 0:
            return Operator()
        return Operator({m: c * other for m, c in self._terms.items()})

    def __rmul__(self, other):
        return self.__mul__(other) if not isinstance(other, Operator) else multiply(other, self)

    def __truediv__(self, other):
        return self * (1.0 / complex(other))

    def isclose(self, other: "Operator", rtol: float = EQ_RTOL, atol: float = 0.0) -> bool:
        """Coefficient-wise comparison with tolerance ``rtol * max|coeff|``."""
        scale = max(self.max_abs(), other.max_abs())
        tol = max(rtol * scale, atol)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0j) - other._terms.get(k, 0j)) <= tol for k in keys)

    def distance(self, other: "Operator") -> float:
        """Largest absolute coefficient difference."""
        keys = set(self._terms) | set(other._terms)
        return max((abs(self._terms.get(k, 0j) - other._terms.get(k, 0j)) for k in keys), default=0.0)

    def __eq__(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        return self.isclose(other)

    def __repr__(self) -> str:
        if not self._terms:
            return "Operator(0)"
        parts = [f"({c.real:+.6g}{c.imag:+.6g}j) {m}" for m, c in self.sorted_items()]
        return "Operator(" + " ".join(parts) + ")"

    # -- serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {"terms": [
            {"creates": list(m.creates), "annihilates": list(m.annihilates),
             "coeff": [c.real, c.imag]}
            for m, c in self.sorted_items()]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Operator":
        terms = []
        for t in data["terms"]:
            re, im = t["coeff"]
            terms.append((Monomial.from_sites(t["creates"], t["annihilates"]), complex(re, im)))
        return cls(terms, prune=0.0)


# -- constructors -----------------------------------------------------------

def identity(coeff: complex = 1.0) -> Operator:
    return Operator({IDENTITY_MONOMIAL: coeff})


def monomial(creates=(), annihilates=(), coeff: complex = 1.0) -> Operator:
    return Operator({Monomial.from_sites(creates, annihilates): coeff})


def create(i: int) -> Operator:
    return monomial((i,), ())


def annihilate(i: int) -> Operator:
    return monomial((), (i,))


def number(i: int) -> Operator:
    return monomial((i,), (i,))


def sz(i: int) -> Operator:
    """``s^z = [s+, s] / 2 = n - 1/2``."""
    return number(i) - 0.5


def total_create(sites: Iterable[int]) -> Operator:
    """``S+`` restricted to ``sites``."""
    return Operator({Monomial(1 << int(i), 0): 1.0 for i in sites})


def total_number(sites: Iterable[int] | int) -> Operator:
    if isinstance(sites, int):
        sites = range(sites)
    return Operator({Monomial(1 << int(i), 1 << int(i)): 1.0 for i in sites})


def tau(i: int, j: int) -> Operator:
    """``s_i - s_j``; kills the W state and the vacuum."""
    return annihilate(i) - annihilate(j)


# -- algebra ----------------------------------------------------------------

def multiply(a: Operator, b: Operator) -> Operator:
    acc: dict[Monomial, complex] = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            c = ca * cb
            for m, sign in monomial_product(ma, mb):
                acc[m] = acc.get(m, 0j) + (c if sign > 0 else -c)
    return Operator(acc)


def commutator(a: Operator, b: Operator) -> Operator:
    acc: dict[Monomial, complex] = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            c = ca * cb
            for m, sign in monomial_product(ma, mb):
                acc[m] = acc.get(m, 0j) + sign * c
            for m, sign in monomial_product(mb, ma):
                acc[m] = acc.get(m, 0j) - sign * c
    return Operator(acc)


def iterated_commutator(o: Operator, q: Operator, depth: int) -> Operator:
    """``[[[o, q], q], ..., q]`` with ``depth`` commutators."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    for _ in range(depth):
        if not o:
            break
        o = commutator(o, q)
    return o


def nilpotency_depth(o: Operator, qdag: Operator, max_depth: int, rtol: float = EQ_RTOL) -> int:
    """Smallest ``d <= max_depth`` with ``ad_q^d(o) = 0``.

    Zero is judged relative to the largest coefficient seen along the chain,
    which absorbs rounding left over from cancellations.  Raises
    :class:`DepthExceeded` if the chain is still nonzero at ``max_depth``.
    """
    scale = o.max_abs()
    current = o
    for d in range(max_depth + 1):
        if current.is_zero(atol=rtol * scale):
            return d
        if d == max_depth:
            break
        current = commutator(current, qdag)
        scale = max(scale, current.max_abs())
    raise DepthExceeded(max_depth)


def adjoint(a: Operator) -> Operator:
    return Operator._raw({Monomial(m.annihilate_mask, m.create_mask): c.conjugate()
                          for m, c in a.items()})


class LocalityMetrics(NamedTuple):
    range: int
    k_local: int
    support: frozenset


def locality_metrics(a: Operator, g) -> LocalityMetrics:
    """Range, k-locality and support of ``a`` measured on graph ``g``.

    Range of a monomial is ``1 + max pairwise distance`` of its sites, i.e. the
    smallest ``R`` with every pairwise distance ``< R``; a monomial with no
    sites (the identity) has range 1.  An empty operator has range 0.
    """
    rng = 0
    k = 0
    for mono in a:
        sites = mono.sites
        for s in sites:
            if s >= g.n_sites:
                raise SiteOutOfGraph(f"site {s} not in graph of {g.n_sites} sites")
        rng = max(rng, g.diameter_of(sites) if sites else 1)
        k = max(k, len(sites))
    return LocalityMetrics(rng, k, a.support)


# -- dense bridge -----------------------------------------------------------

def _check_cap(n_sites: int, cap: int | None) -> None:
    cap = dense_cap() if cap is None else cap
    if n_sites > cap:
        raise DimensionCapExceeded(f"{n_sites} sites exceeds dense cap of {cap}")


def to_matrix(a: Operator, n_sites: int, cap: int | None = None, sparse: bool = False):
    """Matrix of ``a`` in the occupation basis (index ``sum_i bit_i 2**i``)."""
    _check_cap(n_sites, cap)
    if a.max_site() >= n_sites:
        raise SiteOutOfGraph(f"operator touches site {a.max_site()} >= {n_sites}")
    dim = 1 << n_sites
    basis = np.arange(dim, dtype=np.int64)
    rows, cols, vals = [], [], []
    for mono, c in a.items():
        cm, am = np.int64(mono.create_mask), np.int64(mono.annihilate_mask)
        ok = ((basis & am) == am) & (((basis & ~am) & cm) == 0)
        src = basis[ok]
        rows.append((src & ~am) | cm)
        cols.append(src)
        vals.append(np.full(src.size, c, dtype=complex))
    if rows:
        rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0, dtype=complex)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    return mat if sparse else mat.toarray()


# fused (out, in) index 2*out+in  ->  codes (1, s+, s, n)
_LOCAL_CHANGE = np.array([[1, 0, 0, 0],
                          [0, 0, 1, 0],
                          [0, 1, 0, 0],
                          [-1, 0, 0, 1]], dtype=complex)


def from_matrix(mat, sites=None, prune: float = 1e-12) -> Operator:
    """Expand a dense matrix on ``sites`` back into monomials.

    Per site ``[[a, b], [c, d]] = a*1 + c*s+ + b*s + (d - a)*n``; the full
    expansion applies this change of basis on every site axis.
    """
    mat = np.asarray(mat, dtype=complex)
    dim = mat.shape[0]
    n = int(round(math.log2(dim))) if dim > 1 else 0
    if mat.shape != (dim, dim) or (1 << n) != dim:
        raise ValueError("matrix must be square with power-of-two dimension")
    sites = list(range(n)) if sites is None else [int(s) for s in sites]
    if len(sites) != n:
        raise ValueError("need one site label per qubit")
    # reshape gives out bits (site n-1 .. 0) then in bits (site n-1 .. 0);
    # interleave to (out_0, in_0, out_1, in_1, ...) and fuse each pair
    t = mat.reshape([2] * (2 * n))
    perm = []
    for i in range(n):
        perm += [n - 1 - i, 2 * n - 1 - i]
    t = t.transpose(perm).reshape([4] * n)
    for i in range(n):
        t = np.moveaxis(np.tensordot(_LOCAL_CHANGE, t, axes=([1], [i])), 0, i)
    flat = t.reshape(-1)
    idx = np.nonzero(np.abs(flat) > prune)[0]
    terms = {}
    for k in idx:
        digits = np.unravel_index(k, [4] * n) if n else ()
        cm = am = 0
        for i, code in enumerate(digits):
            if code in (1, 3):
                cm |= 1 << sites[i]
            if code in (2, 3):
                am |= 1 << sites[i]
        terms[Monomial(cm, am)] = complex(flat[k])
    return Operator(terms, prune=prune)


def random_operator(sites, n_terms: int, rng: np.random.Generator, max_weight: int | None = None) -> Operator:
    """Random operator with ``n_terms`` monomials supported on ``sites``."""
    sites = list(sites)
    max_weight = len(sites) if max_weight is None else min(max_weight, len(sites))
    terms = []
    for _ in range(n_terms):
        w = int(rng.integers(0, max_weight + 1))
        chosen = rng.choice(sites, size=w, replace=False) if w else []
        cm = am = 0
        for s in chosen:
            code = int(rng.integers(1, 4))
            if code in (1, 3):
                cm |= 1 << int(s)
            if code in (2, 3):
                am |= 1 << int(s)
        c = complex(rng.normal(), rng.normal())
        terms.append((Monomial(cm, am), c))
    return Operator(terms)
