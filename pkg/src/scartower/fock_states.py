"""
Sparse states over occupation bitstrings.

A :class:`SparseState` stores sorted integer keys (bit ``i`` is the occupancy
of site ``i``) and complex amplitudes.  Operators act monomial by monomial on
the whole key array at once.
"""
from __future__ import annotations

import itertools
import math
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import InvalidParticleNumber, SiteOutOfGraph, SubsetTooLarge, TowerTruncated
from .op_algebra import Operator

MAX_SITES = 63
ENTROPY_CUTOFF = 1e-14
DEFAULT_SUBSET_CAP = 12
EIGEN_TOL = 1e-10


def _merge(keys: np.ndarray, vals: np.ndarray, prune: float = 0.0):
    if keys.size == 0:
        return keys.astype(np.int64), vals.astype(complex)
    uniq, inv = np.unique(keys, return_inverse=True)
    re = np.bincount(inv, weights=vals.real, minlength=uniq.size)
    im = np.bincount(inv, weights=vals.imag, minlength=uniq.size)
    out = re + 1j * im
    keep = np.abs(out) > prune
    return uniq[keep], out[keep]


class SparseState:
    """Immutable sparse vector in the occupation basis of ``n_sites`` sites."""

    __slots__ = ("n_sites", "keys", "vals")

    def __init__(self, n_sites: int, amplitudes: Mapping[int, complex] | None = None):
        if not 0 <= n_sites <= MAX_SITES:
            raise ValueError(f"n_sites must be in 0..{MAX_SITES}")
        amplitudes = amplitudes or {}
        keys = np.fromiter((int(k) for k in amplitudes), dtype=np.int64, count=len(amplitudes))
        vals = np.fromiter((complex(v) for v in amplitudes.values()), dtype=complex, count=len(amplitudes))
        if keys.size and (keys.min() < 0 or int(keys.max()) >> n_sites):
            raise SiteOutOfGraph("configuration has bits beyond n_sites")
        self._set(n_sites, *_merge(keys, vals))

    def _set(self, n_sites, keys, vals):
        keys.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "n_sites", n_sites)
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "vals", vals)

    def __setattr__(self, name, value):
        raise AttributeError("SparseState is immutable")

    @classmethod
    def from_arrays(cls, n_sites: int, keys, vals, prune: float = 0.0) -> "SparseState":
        st = object.__new__(cls)
        st._set(n_sites, *_merge(np.asarray(keys, dtype=np.int64), np.asarray(vals, dtype=complex), prune))
        return st

    @classmethod
    def basis(cls, n_sites: int, bits: int | str, coeff: complex = 1.0) -> "SparseState":
        if isinstance(bits, str):
            bits = bits_from_string(bits)
        return cls(n_sites, {bits: coeff})

    @classmethod
    def vacuum(cls, n_sites: int) -> "SparseState":
        return cls(n_sites, {0: 1.0})

    @property
    def amplitudes(self) -> dict[int, complex]:
        return {int(k): complex(v) for k, v in zip(self.keys, self.vals)}

    def __len__(self) -> int:
        return int(self.keys.size)

    def amplitude(self, bits: int) -> complex:
        i = np.searchsorted(self.keys, bits)
        if i < self.keys.size and self.keys[i] == bits:
            return complex(self.vals[i])
        return 0j

    def norm(self) -> float:
        return float(np.linalg.norm(self.vals))

    def normalized(self) -> "SparseState":
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero state")
        return SparseState.from_arrays(self.n_sites, self.keys, self.vals / nrm)

    def inner(self, other: "SparseState") -> complex:
        """``<self|other>``."""
        common, ia, ib = np.intersect1d(self.keys, other.keys, assume_unique=True, return_indices=True)
        return complex(np.vdot(self.vals[ia], other.vals[ib]))

    def __add__(self, other: "SparseState") -> "SparseState":
        self._compatible(other)
        return SparseState.from_arrays(self.n_sites, np.concatenate([self.keys, other.keys]),
                                       np.concatenate([self.vals, other.vals]))

    def __sub__(self, other: "SparseState") -> "SparseState":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "SparseState":
        return SparseState.from_arrays(self.n_sites, self.keys, self.vals * complex(scalar))

    __rmul__ = __mul__

    def _compatible(self, other):
        if self.n_sites != other.n_sites:
            raise ValueError("states live on different system sizes")

    def distance(self, other: "SparseState") -> float:
        return (self - other).norm()

    def to_dense(self) -> np.ndarray:
        if self.n_sites > 24:
            raise ValueError("dense vector too large")
        out = np.zeros(1 << self.n_sites, dtype=complex)
        out[self.keys] = self.vals
        return out

    @classmethod
    def from_dense(cls, vec, prune: float = 0.0) -> "SparseState":
        vec = np.asarray(vec, dtype=complex)
        n = int(round(math.log2(vec.size)))
        idx = np.nonzero(vec)[0]
        return cls.from_arrays(n, idx, vec[idx], prune)

    def particle_numbers(self) -> np.ndarray:
        return np.array([bin(int(k)).count("1") for k in self.keys], dtype=int)

    # -- serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {"n_sites": self.n_sites,
                "amplitudes": [{"bits": bits_to_string(int(k), self.n_sites), "coeff": [v.real, v.imag]}
                               for k, v in zip(self.keys, self.vals)]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "SparseState":
        n = int(data["n_sites"])
        keys, vals = [], []
        for a in data["amplitudes"]:
            if len(a["bits"]) != n:
                raise ValueError(f"bitstring {a['bits']!r} does not have {n} sites")
            keys.append(bits_from_string(a["bits"]))
            vals.append(complex(*a["coeff"]))
        return cls.from_arrays(n, keys, vals)

    def __repr__(self) -> str:
        shown = ", ".join(f"{bits_to_string(int(k), self.n_sites)}: {complex(v):.4g}"
                          for k, v in list(zip(self.keys, self.vals))[:6])
        more = "" if len(self) <= 6 else f", ... ({len(self)} terms)"
        return f"SparseState({shown}{more})"


def bits_to_string(bits: int, n_sites: int) -> str:
    """Little-endian: character ``i`` is site ``i``."""
    return "".join("1" if bits >> i & 1 else "0" for i in range(n_sites))


def bits_from_string(text: str) -> int:
    if set(text) - {"0", "1"}:
        raise ValueError(f"not a bitstring: {text!r}")
    return sum(1 << i for i, ch in enumerate(text) if ch == "1")


def apply(a: Operator, psi: SparseState) -> SparseState:
    if a.max_site() >= psi.n_sites:
        raise SiteOutOfGraph(f"operator touches site {a.max_site()} but state has {psi.n_sites} sites")
    keys, vals = psi.keys, psi.vals
    out_k, out_v = [], []
    for mono, c in a.items():
        cm, am = np.int64(mono.create_mask), np.int64(mono.annihilate_mask)
        cleared = keys & ~am
        ok = ((keys & am) == am) & ((cleared & cm) == 0)
        if ok.any():
            out_k.append(cleared[ok] | cm)
            out_v.append(vals[ok] * c)
    if not out_k:
        return SparseState(psi.n_sites)
    return SparseState.from_arrays(psi.n_sites, np.concatenate(out_k), np.concatenate(out_v))


def _weight_configs(n_sites: int, p: int) -> np.ndarray:
    return np.fromiter((sum(1 << i for i in c) for c in itertools.combinations(range(n_sites), p)),
                       dtype=np.int64, count=math.comb(n_sites, p))


def dicke_state(n_sites: int, p: int) -> SparseState:
    """Normalized uniform superposition of all weight-``p`` configurations."""
    if not 0 <= p <= n_sites:
        raise InvalidParticleNumber(f"p={p} outside 0..{n_sites}")
    keys = _weight_configs(n_sites, p)
    vals = np.full(keys.size, 1.0 / math.sqrt(keys.size), dtype=complex)
    return SparseState.from_arrays(n_sites, keys, vals)


def _as_operator(q) -> Operator:
    if isinstance(q, Operator):
        return q
    to_op = getattr(q, "operator", None)
    if to_op is None:
        raise TypeError("expected an Operator or a tower specification")
    return to_op()


def tower_states(q, p_max: int, n_sites: int) -> list[SparseState]:
    """``[|Q^0>, ..., |Q^p_max>]``, normalized after every application of Q+.

    Raises :class:`TowerTruncated` (carrying the top of the tower) if
    ``(Q+)^p |0>`` vanishes for some ``p <= p_max``.
    """
    qdag = _as_operator(q)
    psi = SparseState.vacuum(n_sites)
    states = [psi]
    for p in range(1, p_max + 1):
        nxt = apply(qdag, psi)
        nrm = nxt.norm()
        if nrm < 1e-12:
            raise TowerTruncated(p - 1, p_max)
        psi = SparseState.from_arrays(n_sites, nxt.keys, nxt.vals / nrm, prune=1e-15)
        states.append(psi)
    return states


def tower_state(q, p: int, n_sites: int) -> SparseState:
    if p < 0:
        raise InvalidParticleNumber("p must be non-negative")
    try:
        return tower_states(q, p, n_sites)[-1]
    except TowerTruncated as exc:
        raise TowerTruncated(exc.last_valid, p) from None


def tower_top(q, n_sites: int) -> int:
    """Largest ``p`` with ``(Q+)^p |0> != 0``."""
    try:
        tower_states(q, n_sites, n_sites)
    except TowerTruncated as exc:
        return exc.last_valid
    return n_sites


def schmidt_coeff(n_sites: int, x_size: int, p: int, l: int) -> float:
    """Schmidt weight of ``|W^l>_X (x) |W^{p-l}>_{X^c}`` inside ``|W^p>``."""
    if not (0 <= x_size <= n_sites and 0 <= p <= n_sites):
        raise InvalidParticleNumber("need 0 <= |X| <= N and 0 <= p <= N")
    if not (0 <= l <= min(x_size, p) and p - l <= n_sites - x_size):
        raise InvalidParticleNumber(f"l={l} not admissible for |X|={x_size}, p={p}, N={n_sites}")
    return math.sqrt(math.comb(x_size, l) * math.comb(n_sites - x_size, p - l) / math.comb(n_sites, p))


def _bipartite_matrix(psi: SparseState, subset: Iterable[int], cap: int) -> np.ndarray:
    subset = sorted(set(int(s) for s in subset))
    if any(not 0 <= s < psi.n_sites for s in subset):
        raise SiteOutOfGraph("cut contains sites outside the system")
    if len(subset) > cap:
        raise SubsetTooLarge(f"|subset|={len(subset)} exceeds cap {cap}")
    keys = psi.keys
    a_idx = np.zeros(keys.size, dtype=np.int64)
    for pos, s in enumerate(subset):
        a_idx |= ((keys >> s) & 1) << pos
    sub_mask = np.int64(sum(1 << s for s in subset))
    rest = keys & ~sub_mask
    cols, b_idx = np.unique(rest, return_inverse=True)
    mat = np.zeros((1 << len(subset), cols.size), dtype=complex)
    np.add.at(mat, (a_idx, b_idx), psi.vals)
    return mat


def schmidt_values(psi: SparseState, subset: Iterable[int], cap: int = DEFAULT_SUBSET_CAP) -> np.ndarray:
    """Singular values across the cut ``(subset, complement)``, descending."""
    mat = _bipartite_matrix(psi, subset, cap)
    if mat.size == 0:
        return np.zeros(0)
    return np.linalg.svd(mat, compute_uv=False)


def reduced_entropy(psi: SparseState, subset: Iterable[int], cap: int = DEFAULT_SUBSET_CAP) -> float:
    """Von Neumann entropy (nats) of the reduced state on ``subset``."""
    lam = schmidt_values(psi, subset, cap) ** 2
    lam = lam[lam > ENTROPY_CUTOFF]
    return float(-np.sum(lam * np.log(lam)))


class EigenCheck(NamedTuple):
    eigenvalue: complex
    residual: float

    def is_eigenstate(self, tol: float = EIGEN_TOL) -> bool:
        return self.residual < tol


def eigen_check(h: Operator, psi: SparseState) -> EigenCheck:
    """Rayleigh quotient and residual ``||H psi - E psi||``."""
    hpsi = apply(h, psi)
    nrm2 = psi.norm() ** 2
    e = psi.inner(hpsi) / nrm2
    res = (hpsi - e * psi).norm()
    return EigenCheck(complex(e), float(res))
