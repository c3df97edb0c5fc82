import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlcc import detect
from nlcc.bell import correlation_from_quantum
from nlcc.detect import (
    NO_CLICK, DeterministicProtocol, IncompleteCatalog, Round, asym_lhv_to_oneway, instance_count,
    lhv_feasibility, protocol_to_lhv, toy_pr_lhv,
)
from nlcc.games import chsh_game, chsh_quantum
from nlcc.nlbox import pr_correlation_table
from nlcc.qstate import SeededRng, derive_seed

CHSH_TABLE = correlation_from_quantum(chsh_quantum(), chsh_game())


def strings(n):
    return tuple(itertools.product((0, 1), repeat=n))


def one_bit_protocol():
    # Alice sends x; Bob outputs it xor y.
    return DeterministicProtocol((Round("alice", 1, lambda x, bits: (x,)),),
                                 lambda x, bits: x, lambda y, bits: bits[0] ^ y, (0, 1), (0, 1))


def eq_protocol(n):
    return DeterministicProtocol(
        (Round("bob", n, lambda y, bits: tuple(y)),
         Round("alice", 1, lambda x, bits: (int(tuple(x) == bits[:n]),))),
        lambda x, bits: bits[n], lambda y, bits: bits[n], strings(n), strings(n))


def random_protocol(seed, n, rounds):
    """Alternating one-bit rounds with pseudorandom message tables."""
    def msg(k):
        return lambda inp, bits: (derive_seed(seed, k, inp, bits) & 1,)
    rs = tuple(Round("alice" if k % 2 == 0 else "bob", 1, msg(k)) for k in range(rounds))
    return DeterministicProtocol(rs,
                                 lambda x, bits: derive_seed(seed, "a", x, bits) & 1,
                                 lambda y, bits: derive_seed(seed, "b", y, bits) & 1,
                                 strings(n), strings(n))


def test_one_bit_protocol_lhv():
    lhv = protocol_to_lhv(one_bit_protocol())
    assert len(lhv.support) == 2
    for x in (0, 1):
        assert lhv.click_probability("alice", x) == Fraction(1, 2)
    for y in (0, 1):
        assert lhv.click_probability("bob", y) == 1


def test_zero_communication_protocol():
    p = DeterministicProtocol((), lambda x, b: x, lambda y, b: 1 - y, (0, 1), (0, 1))
    lhv = protocol_to_lhv(p)
    assert lhv.support == ((),)
    for x, y in itertools.product((0, 1), repeat=2):
        assert lhv.both_click_probability(x, y) == 1
        assert lhv.conditional(x, y) == {(x, 1 - y): 1}


def _check_reproduces(protocol):
    lhv = protocol_to_lhv(protocol)
    c = protocol.cost
    for x in protocol.x_inputs:
        for y in protocol.y_inputs:
            _, a, b = protocol.run(x, y)
            assert lhv.conditional(x, y) == {(a, b): 1}
            assert lhv.both_click_probability(x, y) >= Fraction(1, 2**c)
    # Alice's marginal (output or no click) does not depend on y.
    for x in protocol.x_inputs:
        margs = []
        for y in protocol.y_inputs:
            m = {}
            for (a, _), p in lhv.joint(x, y).items():
                m[a] = m.get(a, 0) + p
            margs.append(m)
        assert all(m == margs[0] for m in margs)
    for y in protocol.y_inputs:
        margs = []
        for x in protocol.x_inputs:
            m = {}
            for (_, b), p in lhv.joint(x, y).items():
                m[b] = m.get(b, 0) + p
            margs.append(m)
        assert all(m == margs[0] for m in margs)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_eq_protocol_reproduced(n):
    _check_reproduces(eq_protocol(n))


@pytest.mark.parametrize("seed", range(6))
def test_random_protocols_reproduced(seed):
    r = SeededRng(seed)
    _check_reproduces(random_protocol(seed, r.integer(1, 5), r.integer(1, 5)))


def test_incomplete_catalog_rejected():
    p = one_bit_protocol()
    cat = detect.conversation_catalog(p)
    with pytest.raises(IncompleteCatalog):
        protocol_to_lhv(p, cat[:1])


def test_instance_count_examples():
    assert instance_count(0.5, 0.25) == 2
    assert instance_count(1.0, 0.1) == 1
    assert instance_count(0.3, 0.1) == 7
    proto, _ = asym_lhv_to_oneway(toy_pr_lhv(0.5), 0.25)
    assert proto.bits == 1


@pytest.mark.parametrize("eta, eps", [(0.3, 0.1), (0.5, 0.25)])
def test_asym_construction_exact_distance(eta, eps):
    lhv = toy_pr_lhv(eta)
    assert detect.alice_efficiency(lhv) == pytest.approx(eta)
    assert detect.lhv_error(lhv, pr_correlation_table(1.0)) == pytest.approx(0.0, abs=1e-12)
    proto, rep = asym_lhv_to_oneway(lhv, eps, target=pr_correlation_table(1.0))
    k = instance_count(eta, eps)
    # Click branch reproduces the PR table; the fallback is uniform: distance (1 - eta)^k.
    assert rep.distance == pytest.approx((1 - eta) ** k, abs=1e-12)
    assert rep.distance <= 2 * eps


@pytest.mark.parametrize("eta, eps", [(0.3, 0.1), (0.5, 0.25)])
def test_asym_construction_sampled(eta, eps):
    _, rep = asym_lhv_to_oneway(toy_pr_lhv(eta), eps, target=pr_correlation_table(1.0),
                                trials=100_000, rng=SeededRng(13))
    assert rep.distance <= 2 * eps
    assert abs(rep.distance - rep.details["exact_distance"]) < 0.05


def test_one_way_run_matches_exact_distribution():
    proto, _ = asym_lhv_to_oneway(toy_pr_lhv(0.4), 0.2)
    exact = proto.exact_distribution()
    r = SeededRng(21)
    trials = 8000
    counts = {}
    for _ in range(trials):
        out = proto.run(1, 1, r)
        counts[out] = counts.get(out, 0) + 1
    for o, p in exact[(1, 1)].items():
        sigma = math.sqrt(p * (1 - p) / trials)
        assert abs(counts.get(o, 0) / trials - p) <= 4 * sigma + 1e-3


def test_lp_chsh_infeasible_at_full_efficiency():
    res = lhv_feasibility(CHSH_TABLE, 1.0, 1.0)
    assert not res.feasible
    assert res.violation > 1e-9
    # Every deterministic lossy strategy scores at most 0 on the certificate.
    assert detect.certificate_local_max(res.certificate, 2, 2) <= 1e-9


def test_lp_chsh_feasible_at_half():
    res = lhv_feasibility(CHSH_TABLE, 0.5, 0.5)
    assert res.feasible
    assert sum(res.weights.values()) == pytest.approx(1.0, abs=1e-9)
    target = detect.extended_table(CHSH_TABLE, 0.5, 0.5)
    for (x, y, a, b), v in target.items():
        got = sum(w for (sa, sb), w in res.weights.items() if sa[x] == a and sb[y] == b)
        assert got == pytest.approx(v, abs=1e-9)


def test_lp_monotone_in_eta():
    grid = [0.5 + 0.05 * k for k in range(11)]
    flags = [lhv_feasibility(CHSH_TABLE, e, e).feasible for e in grid]
    first_bad = flags.index(False)
    assert all(flags[:first_bad]) and not any(flags[first_bad:])


def test_chsh_threshold():
    eta, _ = detect.efficiency_threshold(CHSH_TABLE)
    assert eta == pytest.approx(2 / (math.sqrt(2) + 1), abs=0.01)


def test_pr_box_exact_threshold():
    t = pr_correlation_table(1)
    assert lhv_feasibility(t, Fraction(2, 3), Fraction(2, 3)).feasible
    res = lhv_feasibility(t, Fraction(67, 100), Fraction(67, 100))
    assert not res.feasible and res.violation > 0
    assert all(isinstance(v, Fraction) for v in res.certificate.values())


def test_alphabet_too_large():
    from nlcc.bell import CorrelationTable

    t = CorrelationTable(np.full((5, 2, 2, 2), 0.25))
    with pytest.raises(detect.AlphabetTooLarge):
        lhv_feasibility(t, 1, 1)


def test_simplex_dual_is_farkas_certificate():
    a = np.array([[1.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0])
    obj, _, y = detect.Simplex(a, b, exact=False).solve()
    assert obj > 0
    assert np.all(y @ a <= 1e-9) and y @ b > 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32))
def test_simplex_feasible_systems(seed):
    r = np.random.default_rng(seed)
    a = r.integers(0, 4, size=(3, 5)).astype(float)
    w = r.random(5)
    obj, primal, _ = detect.Simplex(a, a @ w, exact=False).solve()
    assert obj <= 1e-9
    assert np.all(np.asarray(primal, dtype=float) >= -1e-12)
    assert np.allclose(a @ np.asarray(primal, dtype=float), a @ w, atol=1e-9)
