import warnings

import pytest

from scartower.errors import DisconnectedGraph, NotParentOfW, PackingInsufficient
from scartower.fock_states import SparseState, apply, dicke_state, eigen_check
from scartower.graph_geom import SiteGraph, chain, square_grid
from scartower.op_algebra import (Operator, adjoint, annihilate, identity, locality_metrics, monomial,
                                  number, total_create, total_number)
from scartower.parent_decomp import (HERMITIAN_KINDS, KINDS, ROW_ANNIHILATE, ROW_CREATE, ROW_GROUPED,
                                     ROW_HOPPING, ROW_MULTI_ANNIHILATE, DecompositionCertificate,
                                     check_certificate, classify_terms, decompose, sample_annihilator,
                                     sample_parent, singlet_projector, witness_state)


def hopping(n):
    h = Operator()
    for i in range(n):
        j = (i + 1) % n
        h = h + monomial((i,), (j,)) + monomial((j,), (i,))
    return h


def quiet_decompose(h, g):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return decompose(h, g)


def test_classify_creation_violated():
    cls = classify_terms(total_create(range(6)))
    assert cls[ROW_CREATE].status == "violated"
    assert not cls.satisfied
    assert ROW_CREATE in cls.violations()


def test_classify_hopping_minus_number():
    h = sum((monomial((i,), (i + 1,)) - number(i) for i in range(5)), Operator())
    h = h + monomial((5,), (0,)) - number(5)
    cls = classify_terms(h)
    assert cls[ROW_HOPPING].status == "satisfied"
    assert cls.lam == pytest.approx(0)


def test_classify_multi_annihilate_unconditional():
    cls = classify_terms(monomial((), (0, 1)))
    assert cls[ROW_MULTI_ANNIHILATE].status == "none"
    assert cls.satisfied


def test_classify_grouped_and_single_annihilators():
    assert classify_terms(monomial((0, 1), (2,)) - monomial((0, 1), (3,))).satisfied
    assert not classify_terms(monomial((0, 1), (2,))).satisfied
    assert classify_terms(annihilate(0) - annihilate(3)).satisfied
    cls = classify_terms(annihilate(0))
    assert cls[ROW_ANNIHILATE].status == "violated"
    assert not classify_terms(monomial((0, 1), (2,)))[ROW_GROUPED].status == "satisfied"


def test_rejection_matches_eigen_check():
    n = 6
    w = dicke_state(n, 1)
    for h in [total_create(range(n)), annihilate(2), monomial((0, 1), (3,)), number(0)]:
        with pytest.raises(NotParentOfW):
            decompose(h, chain(n, periodic=True))
        assert not eigen_check(h, w).is_eigenstate()


def test_decompose_hopping_ring():
    h = hopping(8)
    cert = quiet_decompose(h, chain(8, periodic=True))
    assert cert.omega_0 == pytest.approx(0)
    assert cert.omega == pytest.approx(2)
    assert len(cert.annihilators) == 16
    expected = {frozenset({i, (i + 1) % 8}) for i in range(8)}
    assert {a.support for a in cert.annihilators} == expected
    pieces = [a.operator for a in cert.annihilators]
    for i in range(8):
        j = (i + 1) % 8
        assert any(p.isclose(monomial((i,), (j,)) - number(i)) for p in pieces)
        assert any(p.isclose(monomial((j,), (i,)) - number(j)) for p in pieces)
    for p in pieces:
        assert apply(p, dicke_state(8, 1)).norm() < 1e-12
    assert cert.reconstruct().distance(h) < 1e-12


def test_decompose_trivial_form():
    h = identity(3) + total_number(6)
    cert = quiet_decompose(h, chain(6, periodic=True))
    assert cert.omega_0 == pytest.approx(3)
    assert cert.omega == pytest.approx(1)
    assert cert.annihilators == []


def test_decompose_errors():
    with pytest.raises(NotParentOfW) as info:
        decompose(total_create(range(4)), chain(4))
    assert ROW_CREATE in info.value.violations
    with pytest.raises(DisconnectedGraph):
        decompose(monomial((), (0, 1)), SiteGraph(4, [(0, 1), (2, 3)]))


def test_decompose_tau_tree():
    g = square_grid(3, 3, periodic=True)
    h = 2 * annihilate(0) - 0.5 * annihilate(4) - 1.5 * annihilate(8)
    cert = quiet_decompose(h, g)
    assert check_certificate(cert, h, g).ok
    for a in cert.annihilators:
        assert len(a.support) == 2


def test_separation_warning():
    with pytest.warns(UserWarning):
        decompose(hopping(8), chain(8, periodic=True))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        decompose(hopping(12), chain(12, periodic=True))


def test_certificate_json_roundtrip():
    g = chain(12, periodic=True)
    h = sample_parent(g, 3, 6, 1.0, 2.0, rng_seed=3)
    cert = quiet_decompose(h, g)
    back = DecompositionCertificate.from_dict(cert.to_dict())
    assert check_certificate(back, h, g).ok
    bad = DecompositionCertificate.from_dict(cert.to_dict())
    bad.annihilators.append(bad.annihilators[0]._replace(operator=annihilate(0)))
    assert not check_certificate(bad, h, g).ok


@pytest.mark.parametrize("kind", KINDS)
def test_sample_annihilator_kills_w_and_vacuum(kind):
    g = chain(12, periodic=True)
    w, vac = dicke_state(12, 1), SparseState.vacuum(12)
    for seed in range(10):
        a = sample_annihilator(g, 3, seed, kind=kind)
        assert a
        assert apply(a, w).norm() < 1e-12
        assert apply(a, vac).norm() < 1e-12
        assert g.diameter_of(a.support) <= 3
        assert sample_annihilator(g, 3, seed, kind=kind) == a


@pytest.mark.parametrize("kind", HERMITIAN_KINDS)
def test_hermitian_annihilators(kind):
    g = square_grid(3, 4, periodic=True)
    for seed in range(5):
        a = sample_annihilator(g, 3, seed, kind=kind, hermitian=True)
        assert a.isclose(adjoint(a))
        assert apply(a, dicke_state(12, 1)).norm() < 1e-12


def test_specific_annihilators():
    w = dicke_state(6, 1)
    assert apply(monomial((), (2, 3)), w).norm() == 0
    assert apply(monomial((2,), (3,)) - number(2), w).norm() < 1e-15


def test_singlet_projector_kills_dicke():
    p = singlet_projector(1, 2)
    for k in range(5):
        assert apply(p, dicke_state(4, k)).norm() < 1e-14


def test_sample_parent_trivial():
    g = chain(12)
    h = sample_parent(g, 3, 0, 1.0, 2.0, rng_seed=9)
    for p in range(13):
        chk = eigen_check(h, dicke_state(12, p))
        assert chk.eigenvalue == pytest.approx(1 + 2 * p)
        assert chk.residual < 1e-12


def test_sample_parent_eigenvalues():
    g = chain(12, periodic=True)
    for seed in range(5):
        h = sample_parent(g, 3, 5, 0.5 + 1j, -0.25, rng_seed=seed)
        assert eigen_check(h, dicke_state(12, 1)).eigenvalue == pytest.approx(0.25 + 1j)
        assert eigen_check(h, SparseState.vacuum(12)).eigenvalue == pytest.approx(0.5 + 1j)


def test_witness_state_examples():
    g = chain(12, periodic=True)
    assert witness_state(g, 3, 3) == "100100100000"
    assert witness_state(g, 3, 0) == "0" * 12
    assert witness_state(g, 3, 1) == "1" + "0" * 11
    with pytest.raises(PackingInsufficient) as info:
        witness_state(g, 3, 5)
    assert info.value.achieved == 4


def test_decompose_diameter_bound():
    g = square_grid(3, 4, periodic=True)
    for seed in range(10):
        h = sample_parent(g, 3, 6, 0.0, 1.0, rng_seed=seed)
        cert = quiet_decompose(h, g)
        R = locality_metrics(h, g).range
        assert cert.R == max(1, R)
        assert all(g.diameter_of(a.support) <= 2 * cert.R for a in cert.annihilators)
