from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlcc import bell
from nlcc.bell import (
    BellError, CorrelationTable, XorGame, chsh_expression, chsh_xor, correlation_from_quantum,
    evaluate, lhv_value, no_signalling_check, ns_value_xor, qm_value_xor,
)
from nlcc.games import chsh_game, chsh_quantum, CHSH_QUANTUM_VALUE
from nlcc.nlbox import pr_correlation_table
from nlcc.qstate import ProjectiveMeasurement, StateVector
from nlcc.games import QuantumStrategy


def test_chsh_values():
    assert lhv_value(chsh_expression()) == 2
    assert ns_value_xor(chsh_xor()) == 4
    res = qm_value_xor(chsh_xor())
    assert res.value == pytest.approx(2 * np.sqrt(2), abs=1e-6)
    assert res.iterations <= 1000


def test_chsh_dim_two():
    assert qm_value_xor(chsh_xor(), dim=2).value == pytest.approx(2 * np.sqrt(2), abs=1e-6)


def test_single_weight_game():
    g = XorGame(np.array([[0.0, 0.0], [0.0, -1.7]]))
    assert qm_value_xor(g).value == pytest.approx(1.7, abs=1e-9)
    assert ns_value_xor(g) == pytest.approx(1.7)


def test_pr_table_chsh_value_is_four():
    assert evaluate(chsh_expression(), pr_correlation_table(1)) == 4


def test_quantum_table_chsh_value():
    table = correlation_from_quantum(chsh_quantum(), chsh_game())
    assert evaluate(chsh_expression(), table) == pytest.approx(2 * np.sqrt(2), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=4, max_size=4))
def test_value_ordering(ws):
    g = XorGame(np.array(ws).reshape(2, 2))
    lhv = lhv_value(g.to_bell_expression())
    q = qm_value_xor(g).value
    assert lhv - 1e-6 <= q <= ns_value_xor(g) + 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 4), st.integers(2, 4))
def test_seesaw_monotone(seed, nx, ny):
    r = np.random.default_rng(seed)
    g = XorGame(r.normal(size=(nx, ny)))
    hist = qm_value_xor(g, seed=seed).history
    assert all(b >= a - 1e-12 for a, b in zip(hist, hist[1:]))


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1))
def test_evaluate_linear(lam):
    p1 = pr_correlation_table(1.0)
    p2 = correlation_from_quantum(chsh_quantum(), chsh_game())
    e = chsh_expression()
    mixed = p1.mix(p2, lam)
    assert evaluate(e, mixed) == pytest.approx(lam * evaluate(e, p1) + (1 - lam) * evaluate(e, p2), abs=1e-9)


def test_no_signalling_pr_box():
    t = pr_correlation_table(1)
    rep = no_signalling_check(t)
    assert rep.passed and rep.alice_deviation == 0 and rep.bob_deviation == 0
    assert all(v == Fraction(1, 2) for v in t.probs.sum(axis=3).reshape(-1))


def test_no_signalling_quantum_table():
    assert no_signalling_check(correlation_from_quantum(chsh_quantum(), chsh_game())).passed


def test_no_signalling_detects_violation():
    # P(a | x) shifts by 0.1 when y changes.
    p = np.full((2, 2, 2, 2), 0.25)
    p[0, 1] = [[0.35, 0.25], [0.15, 0.25]]
    rep = no_signalling_check(CorrelationTable(p))
    assert not rep.passed
    assert rep.alice_deviation == pytest.approx(0.1, abs=1e-12)


def test_product_state_gives_deterministic_table():
    comp = ProjectiveMeasurement.computational(1)
    strat = QuantumStrategy(StateVector.from_bits([1, 0]), ((0,), (1,)),
                            ({0: (comp,), 1: (comp,)}, {0: (comp,), 1: (comp,)}))
    t = correlation_from_quantum(strat, chsh_game())
    assert np.all(t.probs[:, :, 1, 0] == 1)


def test_singlet_equal_measurements_anticorrelated():
    singlet = StateVector(np.array([0, 1, -1, 0]) / np.sqrt(2))
    comp = ProjectiveMeasurement.computational(1)
    strat = QuantumStrategy(singlet, ((0,), (1,)), ({0: (comp,), 1: (comp,)}, {0: (comp,), 1: (comp,)}))
    t = correlation_from_quantum(strat, chsh_game())
    assert t.probs[0, 0, 0, 0] == pytest.approx(0) and t.probs[0, 0, 1, 1] == pytest.approx(0)


def test_quantum_chsh_table_win_probability():
    t = correlation_from_quantum(chsh_quantum(), chsh_game())
    for x in (0, 1):
        for y in (0, 1):
            win = sum(t.probs[x, y, a, b] for a in (0, 1) for b in (0, 1) if a ^ b == x & y)
            assert win == pytest.approx(CHSH_QUANTUM_VALUE, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_quantum_tables_are_no_signalling(a0, a1, b0, b1):
    t = correlation_from_quantum(chsh_quantum({0: a0, 1: a1}, {0: b0, 1: b1}), chsh_game())
    assert no_signalling_check(t).passed


def test_table_validation():
    with pytest.raises(BellError):
        CorrelationTable(np.full((2, 2, 2, 2), 0.3))
    with pytest.raises(BellError):
        CorrelationTable(np.zeros((2, 2, 2)))


def test_table_json_round_trip():
    t = correlation_from_quantum(chsh_quantum(), chsh_game())
    back = CorrelationTable.from_json(t.to_json())
    assert np.allclose(back.probs, t.probs)
    assert t.to_json()["index_order"] == ["x", "y", "a", "b"]
