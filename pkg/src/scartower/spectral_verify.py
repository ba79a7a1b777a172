"""
Numerical checks of tower energies.

All checks act exactly on sparse tower states; nothing is diagonalized.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import NonRealEnergies, PackingInsufficient, TowerTruncated
from .fock_states import (EIGEN_TOL, SparseState, apply, bits_from_string, eigen_check,
                          reduced_entropy, tower_states)
from .graph_geom import SiteGraph
from .op_algebra import Operator, locality_metrics
from .parent_decomp import witness_state
from .tower_forge import TowerSpec, check_classes, tower_witness

SPACING_TOL = 1e-9
ZERO_TOL = 1e-10

EQUALLY_SPACED = "EquallySpaced"
NOT_EIGENSTATES = "NotEigenstates"
UNEQUAL = "Unequal"


def _c(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _spec(q, n_sites: int | None) -> TowerSpec:
    if isinstance(q, TowerSpec):
        if n_sites is not None and n_sites != q.n_sites:
            raise ValueError("n_sites disagrees with the tower specification")
        return q
    if n_sites is None:
        raise ValueError("n_sites is required when the tower is given as an operator")
    return TowerSpec.from_operator(q, n_sites)


def _is_dicke_like(q: TowerSpec) -> bool:
    return all(len(y) == 1 for y, _ in q.terms)


@dataclass
class SpacingReport:
    energies: list[complex]
    residuals: list[float]
    omega_0: complex
    omega: complex
    deviation: float
    verdict: str
    bad_p: list[int] = field(default_factory=list)
    truncated_at: int | None = None

    @property
    def equally_spaced(self) -> bool:
        return self.verdict == EQUALLY_SPACED

    def to_dict(self) -> dict:
        return {"energies": [_c(e) for e in self.energies], "residuals": list(self.residuals),
                "omega0": _c(self.omega_0), "omega": _c(self.omega), "deviation": self.deviation,
                "verdict": self.verdict, "bad_p": list(self.bad_p), "truncated_at": self.truncated_at}


def spacing_report(energies: Sequence[complex], residuals: Sequence[float], eigen_tol: float = EIGEN_TOL,
                   spacing_tol: float = SPACING_TOL) -> SpacingReport:
    """Verdict from per-``p`` energies; ``Omega = E_0`` and ``omega = E_1 - E_0``."""
    energies = [complex(e) for e in energies]
    residuals = [float(r) for r in residuals]
    omega_0 = energies[0] if energies else 0j
    omega = energies[1] - energies[0] if len(energies) > 1 else 0j
    dev = max((abs(e - (omega_0 + omega * p)) for p, e in enumerate(energies)), default=0.0)
    bad = [p for p, r in enumerate(residuals) if not r < eigen_tol]
    if bad:
        verdict = NOT_EIGENSTATES
    elif dev < spacing_tol:
        verdict = EQUALLY_SPACED
    else:
        verdict = UNEQUAL
    return SpacingReport(energies, residuals, omega_0, omega, float(dev), verdict, bad)


def tower_energies(h: Operator, q, p_max: int | None = None, n_sites: int | None = None,
                   eigen_tol: float = EIGEN_TOL, spacing_tol: float = SPACING_TOL) -> SpacingReport:
    """Energies of ``|Q^0> .. |Q^p_max>`` under ``h`` with an equal-spacing verdict.

    ``p_max`` defaults to the top of the tower.  Asking beyond the top raises
    :class:`TowerTruncated` with the report for the valid part attached.
    """
    spec = _spec(q, n_sites)
    n = spec.n_sites
    limit = n if p_max is None else p_max
    try:
        states = tower_states(spec, limit, n)
        truncated = None
    except TowerTruncated as exc:
        states = tower_states(spec, exc.last_valid, n)
        truncated = exc.last_valid
    checks = [eigen_check(h, psi) for psi in states]
    report = spacing_report([c.eigenvalue for c in checks], [c.residual for c in checks], eigen_tol, spacing_tol)
    report.truncated_at = truncated
    if truncated is not None and p_max is not None:
        raise TowerTruncated(truncated, p_max, report=report)
    return report


@dataclass
class InductionReport:
    k: int
    gamma: int
    top: int
    residuals: list[float]
    hypothesis_holds: bool
    hypothesis_failures: list[int]
    conclusion_holds: bool
    conclusion_failures: list[int]

    @property
    def consistent(self) -> bool:
        """False only for a passing hypothesis with a failing conclusion."""
        return not (self.hypothesis_holds and not self.conclusion_holds)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["consistent"] = self.consistent
        return out


def annihilation_induction_check(h: Operator, q, k: int | None = None, n_sites: int | None = None,
                                 tol: float = EIGEN_TOL) -> InductionReport:
    """Test ``h|Q^p> = 0`` for ``p <= gamma`` and then for every ``p`` up to the top.

    ``gamma`` is ``2k`` for single-site towers and ``2k + 1`` otherwise.
    """
    spec = _spec(q, n_sites)
    n = spec.n_sites
    k_local = max((len(m.sites) for m in h), default=0)
    k = k_local if k is None else k
    if k < k_local:
        raise ValueError(f"operator is {k_local}-local, larger than k={k}")
    gamma = 2 * k if _is_dicke_like(spec) else 2 * k + 1
    try:
        states = tower_states(spec, n, n)
    except TowerTruncated as exc:
        states = tower_states(spec, exc.last_valid, n)
    scale = max(1.0, h.max_abs())
    residuals = [apply(h, psi).norm() / scale for psi in states]
    hyp_fail = [p for p, r in enumerate(residuals) if p <= gamma and not r < tol]
    con_fail = [p for p, r in enumerate(residuals) if not r < tol]
    return InductionReport(k, gamma, len(states) - 1, residuals, not hyp_fail, hyp_fail,
                           not con_fail, con_fail)


@dataclass
class FiniteFractionReport:
    r_max: int
    range_ok: bool
    annihilates_base: bool
    theoretical_bound: int
    chain_bound: int | None
    checked_up_to: int
    eigen: list[bool]
    energies: list[complex]
    witness: list[str | None]
    witness_amplitude: list[float]
    witness_overlap: list[float]

    @property
    def passed(self) -> bool:
        for p in range(self.checked_up_to + 1):
            if self.witness[p] is None or self.witness_overlap[p] > ZERO_TOL:
                return False
            if self.eigen[p] and abs(self.energies[p]) > ZERO_TOL:
                return False
        return True

    def to_dict(self) -> dict:
        out = asdict(self)
        out["energies"] = [_c(e) for e in self.energies]
        out["passed"] = self.passed
        return out


def finite_fraction_check(annihilator_sum: Operator, q, g: SiteGraph, r_max: int,
                          tol: float = EIGEN_TOL) -> FiniteFractionReport:
    """Zero-energy check for a pure sum of local annihilators on a tower.

    For each ``p`` that admits a witness configuration (far-apart
    particles, or far-apart terms for composite towers), the amplitude of the
    witness in ``H'|Q^p>`` must vanish, and if ``|Q^p>`` is an eigenstate its
    energy must be zero.  This range always contains the guaranteed
    ``p <= N / beta`` range, reported as ``theoretical_bound``.
    """
    spec = q if isinstance(q, TowerSpec) else TowerSpec.from_operator(q, g.n_sites)
    n = g.n_sites
    metrics = locality_metrics(annihilator_sum, g)
    range_ok = metrics.range <= r_max
    w = tower_states(spec, 1, n)[1]
    vac = SparseState.vacuum(n)
    base_ok = apply(annihilator_sum, w).norm() < tol and apply(annihilator_sum, vac).norm() < tol

    dicke = _is_dicke_like(spec)
    delta = g.max_degree
    if dicke:
        theory = n // (delta ** (2 * r_max) + 1)
        chain_bound = n // r_max if delta <= 2 and g.is_connected() else None
    else:
        rep = check_classes(spec, g, r_max=r_max)
        theory = n // rep.beta if rep.q2.satisfied else 0
        chain_bound = None
    try:
        states = tower_states(spec, n, n)
    except TowerTruncated as exc:
        states = tower_states(spec, exc.last_valid, n)

    eigen, energies, wits, amps, overlaps = [], [], [], [], []
    checked = -1
    for p, psi in enumerate(states):
        chk = eigen_check(annihilator_sum, psi)
        eigen.append(chk.residual < tol)
        energies.append(chk.eigenvalue)
        try:
            wit = witness_state(g, r_max, p) if dicke else tower_witness(spec, g, r_max, p)
        except PackingInsufficient:
            wit = None
        wits.append(wit)
        if wit is None:
            amps.append(0.0)
            overlaps.append(0.0)
            continue
        bits = bits_from_string(wit)
        amps.append(abs(psi.amplitude(bits)))
        overlaps.append(abs(apply(annihilator_sum, psi).amplitude(bits)))
        if checked == p - 1:
            checked = p
    return FiniteFractionReport(r_max, range_ok, base_ok, theory, chain_bound, checked,
                                eigen, energies, wits, amps, overlaps)


def freeze_check(q, energies: Sequence[complex], amplitudes: Sequence[complex], cut: Iterable[int],
                 times: Sequence[float], n_sites: int | None = None, imag_tol: float = 1e-12) -> float:
    """Largest change of the cut entropy of ``sum_p c_p e^{-i E_p t} |Q^p>`` over ``times``."""
    energies = np.asarray(energies, dtype=complex)
    if np.any(np.abs(energies.imag) > imag_tol):
        raise NonRealEnergies("time evolution here needs real energies")
    amplitudes = np.asarray(amplitudes, dtype=complex)
    if amplitudes.shape != energies.shape:
        raise ValueError("one amplitude per energy required")
    spec = _spec(q, n_sites)
    states = tower_states(spec, len(energies) - 1, spec.n_sites)
    cut = list(cut)

    def entropy_at(t: float) -> float:
        phases = amplitudes * np.exp(-1j * energies.real * t)
        psi = SparseState(spec.n_sites)
        for c, st in zip(phases, states):
            if c != 0:
                psi = psi + c * st
        return reduced_entropy(psi.normalized(), cut)

    s0 = entropy_at(0.0)
    return max((abs(entropy_at(float(t)) - s0) for t in times), default=0.0)


def chain_min_size(k: int, R: int) -> int:
    return 4 * k * R


def graph_min_size(k: int, R: int, max_degree: int) -> int:
    return 2 * k * (max_degree ** (4 * R) + 1)


def general_min_size(beta: int, k: int) -> int:
    return beta * (2 * k + 1)


@dataclass
class PreconditionReport:
    n_sites: int
    k: int
    R: int
    max_degree: int
    chain_min: int
    chain_ok: bool
    graph_min: int
    graph_ok: bool
    general_min: int | None
    general_ok: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def theorem_precondition_check(h: Operator, g: SiteGraph, q=None) -> PreconditionReport:
    """Evaluate the system-size hypotheses of the three spacing theorems.

    The first is stated for chains; it is reported for any graph but flagged.
    The third needs a tower in the mapping and coverage classes.
    """
    m = locality_metrics(h, g)
    k, R, delta, n = m.k_local, max(1, m.range), g.max_degree, g.n_sites
    notes = []
    if delta > 2:
        notes.append("the chain size condition is evaluated on a non-chain graph")
    t1 = chain_min_size(k, R)
    t2 = graph_min_size(k, R, delta)
    t3 = None
    if q is not None:
        spec = q if isinstance(q, TowerSpec) else TowerSpec.from_operator(q, n)
        rep = check_classes(spec, g, R=R, k=k)
        if rep.beta is not None and rep.alpha is not None:
            t3 = general_min_size(rep.beta, k)
        else:
            notes.append("tower outside the mapping/coverage classes; general size condition unavailable")
    return PreconditionReport(n, k, R, delta, t1, n > t1, t2, n > t2, t3,
                              t3 is not None and n > t3, notes)
