import json
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scartower.errors import DepthExceeded, DimensionCapExceeded, SiteOutOfGraph
from scartower.graph_geom import chain
from scartower.op_algebra import (Monomial, Operator, adjoint, annihilate, commutator, create, from_matrix,
                                  identity, iterated_commutator, locality_metrics, monomial, multiply,
                                  nilpotency_depth, number, random_operator, sz, to_matrix, total_create)

SD = np.array([[0, 0], [1, 0]], dtype=complex)
S = SD.T.copy()
NUM = SD @ S
I2 = np.eye(2)


def kron_site(local, i, n):
    """Independent oracle: bit i of the basis index is site i."""
    return reduce(np.kron, [local if k == i else I2 for k in reversed(range(n))])


def s2_op(sites):
    return sum((monomial((i, i + 1), ()) for i in sites), Operator())


def test_number_from_product():
    assert multiply(create(1), annihilate(1)) == number(1)


def test_hole_operator():
    # oracle: S @ SD = diag(1, 0)
    assert np.allclose(S @ SD, np.diag([1, 0]))
    assert multiply(annihilate(1), create(1)) == identity() - number(1)


def test_hard_core():
    assert not multiply(create(1), create(1))
    assert not multiply(annihilate(2), annihilate(2))


def test_commutator_sz():
    # oracle: [SD, S] = diag(-1, 1)
    assert np.allclose(SD @ S - S @ SD, np.diag([-1, 1]))
    assert commutator(create(1), annihilate(1)) == 2 * number(1) - identity()
    assert commutator(create(1), annihilate(1)) == 2 * sz(1)


def test_commutator_paired_raising_with_lowering():
    got = commutator(s2_op(range(0, 6)), annihilate(3))
    expected = 2 * multiply(create(2), sz(3)) + 2 * multiply(sz(3), create(4))
    assert got == expected


def test_creation_operators_commute():
    assert not commutator(create(1), create(2))


def test_iterated_commutator_single_site():
    sdag = total_create(range(6))
    assert not iterated_commutator(annihilate(3), sdag, 3)
    second = iterated_commutator(annihilate(3), sdag, 2)
    assert second
    assert set(second.terms) == {Monomial.from_sites((3,), ())}
    assert not iterated_commutator(number(3), sdag, 2)
    assert iterated_commutator(number(3), sdag, 0) == number(3)


def test_nilpotency_depths():
    # depths frozen from a kron-matrix oracle on 7 sites
    sdag = total_create(range(7))
    assert nilpotency_depth(monomial((), (2, 5)), sdag, 6) == 5
    assert nilpotency_depth(annihilate(3), s2_op(range(6)), 4) == 3
    assert nilpotency_depth(identity(), create(0), 1) == 1


def test_nilpotency_oracle_agrees():
    n = 7
    sdag = sum(kron_site(SD, i, n) for i in range(n))
    x = kron_site(S, 2, n) @ kron_site(S, 5, n)
    depth = 0
    while np.abs(x).max() > 1e-12:
        x = x @ sdag - sdag @ x
        depth += 1
    assert depth == 5


def test_nilpotency_exceeded():
    with pytest.raises(DepthExceeded):
        nilpotency_depth(monomial((), (2, 5)), total_create(range(7)), 3)


def test_adjoint_examples():
    assert adjoint(monomial((1,), (2,))) == monomial((2,), (1,))
    assert adjoint((1 + 1j) * create(1)) == (1 - 1j) * annihilate(1)
    assert adjoint(number(1)) == number(1)


def test_locality_metrics_examples():
    g = chain(12)
    m = locality_metrics(monomial((1, 2), ()), g)
    assert (m.range, m.k_local) == (2, 2)
    m = locality_metrics(monomial((1, 10), ()), g)
    assert (m.range, m.k_local) == (10, 2)
    m = locality_metrics(number(5), g)
    assert (m.range, m.k_local, m.support) == (1, 1, frozenset({5}))
    with pytest.raises(SiteOutOfGraph):
        locality_metrics(number(20), g)


def test_to_matrix_examples():
    assert np.array_equal(to_matrix(identity(), 2), np.eye(4))
    assert np.array_equal(to_matrix(create(0), 1), SD)
    assert np.array_equal(to_matrix(number(0), 1), np.diag([0, 1]))
    with pytest.raises(DimensionCapExceeded):
        to_matrix(identity(), 20)


def test_to_matrix_matches_kron_oracle():
    n = 4
    op = monomial((0, 2), (3,), 0.5) + monomial((1,), (1, 0), 2j)
    oracle = 0.5 * kron_site(SD, 0, n) @ kron_site(SD, 2, n) @ kron_site(S, 3, n)
    oracle = oracle + 2j * kron_site(NUM, 1, n) @ kron_site(S, 0, n)
    assert np.allclose(to_matrix(op, n), oracle)


def test_zero_coefficients_pruned():
    op = create(1) - create(1)
    assert len(op) == 0
    assert Operator({Monomial(1, 0): 1e-16}).is_zero()


def test_json_roundtrip():
    rng = np.random.default_rng(1)
    op = random_operator(range(5), 6, rng)
    text = json.dumps(op.to_dict())
    back = Operator.from_dict(json.loads(text))
    assert back.terms == op.terms


def test_from_matrix_roundtrip():
    rng = np.random.default_rng(2)
    op = random_operator([1, 3, 4], 5, rng)
    back = from_matrix(to_matrix(Operator({Monomial.from_sites([{1: 0, 3: 1, 4: 2}[s] for s in m.creates],
                                                               [{1: 0, 3: 1, 4: 2}[s] for s in m.annihilates]): c
                                           for m, c in op.items()}), 3), sites=[1, 3, 4])
    assert back.isclose(op)


ops = st.integers(0, 2**32 - 1).map(lambda seed: random_operator(range(5), 4, np.random.default_rng(seed)))


@settings(max_examples=60, deadline=None)
@given(ops, ops)
def test_oracle_equivalence(a, b):
    ma, mb = to_matrix(a, 5), to_matrix(b, 5)
    assert np.allclose(to_matrix(multiply(a, b), 5), ma @ mb, atol=1e-12)
    assert np.allclose(to_matrix(commutator(a, b), 5), ma @ mb - mb @ ma, atol=1e-12)
    assert np.allclose(to_matrix(adjoint(a), 5), ma.conj().T, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(ops, ops, ops)
def test_jacobi_identity(a, b, c):
    total = (commutator(a, commutator(b, c)) + commutator(b, commutator(c, a))
             + commutator(c, commutator(a, b)))
    scale = max(1.0, a.max_abs() * b.max_abs() * c.max_abs())
    assert total.max_abs() < 1e-12 * scale * 10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_nilpotency_bound(seed, k):
    rng = np.random.default_rng(seed)
    sites = sorted(rng.choice(8, size=k, replace=False).tolist())
    o = random_operator(sites, 3, rng, max_weight=k)
    qdag = Operator({Monomial.from_sites(sorted(rng.choice(8, size=int(rng.integers(1, 4)), replace=False)), ()):
                     complex(rng.normal(), rng.normal()) for _ in range(5)})
    assert nilpotency_depth(o, qdag, 2 * k + 1) <= 2 * k + 1


def test_range_at_least_one():
    rng = np.random.default_rng(3)
    g = chain(6)
    for _ in range(20):
        op = random_operator(range(6), 3, rng)
        if op:
            m = locality_metrics(op, g)
            assert m.range >= 1
            assert m.k_local <= len(m.support) or m.k_local == 0
