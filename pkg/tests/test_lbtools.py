import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlcc import lbtools as lb
from nlcc.ccproto import eq_deterministic
from nlcc.qstate import SeededRng

# Exact uniform-distribution discrepancies, from the best-response oracle below.
IP_DISC = {2: 5 / 16, 3: 11 / 64}
EQ_DISC_N2 = 1 / 2


def best_response_discrepancy(f, n):
    """For each row set A the best column set takes all positive or all negative column sums."""
    d = 2**n
    signed = np.array([[1 if f(x, y) else -1 for y in range(d)] for x in range(d)]) / d**2
    best = 0.0
    for mask in range(1, 2**d):
        cols = signed[[x for x in range(d) if mask >> x & 1]].sum(axis=0)
        best = max(best, cols[cols > 0].sum(), -cols[cols < 0].sum())
    return best


def test_comm_matrix_examples():
    assert np.array_equal(lb.comm_matrix(lb.eq_fn, 2), np.eye(4, dtype=int))
    assert np.all(lb.comm_matrix(lambda x, y: 1, 3) == 1)
    ip = lb.comm_matrix(lb.ip_fn, 2)
    for x in range(4):
        for y in range(4):
            xb, yb = ((x >> 1) & 1, x & 1), ((y >> 1) & 1, y & 1)
            assert ip[x, y] == (xb[0] * yb[0] + xb[1] * yb[1]) % 2
    with pytest.raises(lb.LowerBoundError):
        lb.comm_matrix(lb.eq_fn, 13)


@pytest.mark.parametrize("n", range(1, 9))
def test_rank_eq(n):
    assert lb.rank_exact(lb.comm_matrix(lb.eq_fn, n)) == 2**n


def test_rank_examples():
    assert lb.rank_exact(np.ones((8, 8), dtype=int)) == 1
    for n in (2, 3, 4):
        s = lb.ip_sign_matrix(n)
        assert np.array_equal(s @ s, 2**n * np.eye(2**n, dtype=int))
        assert lb.rank_exact(s) == 2**n


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 6), st.integers(1, 6))
def test_rank_matches_numpy_on_small_integer_matrices(seed, r, c):
    m = np.random.default_rng(seed).integers(-2, 3, size=(r, c))
    assert lb.rank_exact(m) == np.linalg.matrix_rank(m)


def test_rank_bounded_by_protocol_transcripts():
    n = 2
    c = eq_deterministic("00", "00").ledger.classical_bits
    assert lb.rank_exact(lb.comm_matrix(lb.eq_fn, n)) <= 2**c


@pytest.mark.parametrize("n", [2, 3])
def test_ip_discrepancy_exact(n):
    res = lb.discrepancy(lb.ip_fn, n)
    assert res.value == pytest.approx(IP_DISC[n], abs=1e-12)
    assert res.value == pytest.approx(best_response_discrepancy(lb.ip_fn, n), abs=1e-12)
    assert res.value <= 2 ** (-n / 2) + 1e-12
    signed = (2 * lb.comm_matrix(lb.ip_fn, n) - 1) / 4**n
    assert lb.rectangle_bias(signed, res.witness) == pytest.approx(res.value, abs=1e-12)


def test_constant_function_discrepancy():
    mu = SeededRng(1).normal((4, 4)) ** 2
    mu /= mu.sum()
    res = lb.discrepancy(lambda x, y: 1, 2, mu=mu)
    assert res.value == pytest.approx(1.0)
    assert res.witness.a_mask == res.witness.b_mask == 15


def test_eq_discrepancy_and_cost_bound():
    res = lb.discrepancy(lb.eq_fn, 2)
    assert res.value == pytest.approx(EQ_DISC_N2)
    assert res.value == pytest.approx(best_response_discrepancy(lb.eq_fn, 2))
    # Deterministic protocol: 3 bits, advantage 1/2. Always answering 0: 0 bits, advantage 1/4.
    assert lb.discrepancy_cost_bound(0.5, res.value) <= 3
    assert lb.discrepancy_cost_bound(0.25, res.value) <= 0 + 1e-12


def test_discrepancy_mode_errors():
    with pytest.raises(lb.LowerBoundError):
        lb.discrepancy(lb.ip_fn, 4)
    with pytest.raises(lb.LowerBoundError):
        lb.discrepancy(lb.ip_fn, 2, mode="magic")


def test_sampled_discrepancy_is_lower_bound_and_reaches_exact():
    for f in (lb.ip_fn, lb.eq_fn):
        exact = lb.discrepancy(f, 2).value
        sampled = lb.discrepancy(f, 2, mode="sampled", samples=200, rng=SeededRng(3))
        assert sampled.value <= exact + 1e-12
        assert sampled.value == pytest.approx(exact, abs=1e-12)
        assert "lower bound" in sampled.mode
    sampled = lb.discrepancy(lb.ip_fn, 5, mode="sampled", samples=50, rng=SeededRng(4))
    assert 0 < sampled.value <= 2 ** (-2.5) + 1e-12


def test_lindsey_examples():
    for n in (1, 3, 6):
        full = list(range(2**n))
        r = lb.lindsey_check(full, full, n)
        assert r.lhs == 2**n and r.rhs == pytest.approx(2 ** (1.5 * n)) and r.passed
    r = lb.lindsey_check([5], [3], 4)
    assert r.lhs == 1 and r.passed


def test_lindsey_random_rectangles():
    r = SeededRng(8)
    for _ in range(500):
        a, b = lb.random_rectangle(8, r)
        assert lb.lindsey_check(a, b, 8).passed


def _orthogonal_encodings():
    e0 = np.diag([1.0, 0.0]).astype(complex)
    e1 = np.diag([0.0, 1.0]).astype(complex)
    return [e0, e1], [e0, e1]


def test_nayak_saturation():
    enc, dec = _orthogonal_encodings()
    r = lb.nayak_check(enc, dec, 2)
    assert r.lhs == pytest.approx(1.0) and r.rhs == 1.0 and r.passed


def test_nayak_random_draws():
    r = SeededRng(10)
    for k in range(100):
        enc = [lb.random_density(2, r, rank=r.integer(1, 3)) for _ in range(4)]
        dec = lb.random_povm(2, 4, r) if k % 2 else lb.random_projective_decoder(2, 4, r)
        res = lb.nayak_check(enc, dec, 2)
        assert res.passed and res.lhs <= 0.5 + 1e-9


def test_nayak_maximally_mixed():
    r = SeededRng(11)
    enc = [np.eye(4) / 4] * 8
    res = lb.nayak_check(enc, lb.random_povm(4, 8, r), 4)
    assert res.lhs == pytest.approx(1 / 8, abs=1e-12)


def test_nayak_validation():
    enc, dec = _orthogonal_encodings()
    with pytest.raises(lb.LowerBoundError):
        lb.nayak_check([2 * enc[0], enc[1]], dec, 2)
    with pytest.raises(lb.LowerBoundError):
        lb.nayak_check(enc, [dec[0], dec[0]], 2)
    with pytest.raises(lb.LowerBoundError):
        lb.nayak_check(enc[:1] * 3, dec[:1] * 3, 2)


def test_projective_decoders_are_complete():
    r = SeededRng(12)
    for d, k in [(2, 4), (4, 2), (3, 3)]:
        dec = lb.random_projective_decoder(d, k, r)
        assert np.allclose(sum(dec), np.eye(d), atol=1e-9)
