import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlcc import nlbox
from nlcc.bell import chsh_expression, evaluate, no_signalling_check
from nlcc.nlbox import BooleanCircuit, BoxError, CircuitError, Gate, PRBox, vandam_eval
from nlcc.qstate import SeededRng

from conftest import within_sigmas

FIXTURES = __import__("pathlib").Path(__file__).parent / "fixtures"


def direct_eval(circuit_json, x, y):
    """Independent evaluator working straight from the JSON gate list."""
    wires = {f"x{i + 1}": b for i, b in enumerate(x)}
    wires.update({f"y{i + 1}": b for i, b in enumerate(y)})
    for k, g in enumerate(circuit_json["gates"]):
        vals = [wires[w] for w in g["in"]]
        wires[f"g{k}"] = (1 - vals[0]) if g["op"] == "NOT" else (vals[0] & vals[1])
    return wires[circuit_json["output"]]


def test_pr_box_perfect_parity(rng):
    for x, y in itertools.product((0, 1), repeat=2):
        for _ in range(50):
            a, b = PRBox().query(x, y, rng)
            assert a ^ b == x & y


def test_pr_box_one_shot(rng):
    box = PRBox()
    nlbox.pr_box_query(box, 0, 1, rng)
    with pytest.raises(BoxError):
        nlbox.pr_box_query(box, 0, 1, rng)
    with pytest.raises(BoxError):
        PRBox(0.4)


def test_pr_box_marginals(rng):
    n = 10_000
    for x, y in itertools.product((0, 1), repeat=2):
        ones_a = ones_b = 0
        for _ in range(n):
            a, b = PRBox().query(x, y, rng)
            ones_a += a
            ones_b += b
        assert within_sigmas(ones_a, n, 0.5) and within_sigmas(ones_b, n, 0.5)


def test_noisy_box_parity_rate(rng):
    n = 10_000
    good = 0
    for _ in range(n):
        a, b = PRBox(0.75).query(1, 1, rng)
        good += (a ^ b) == 1
    assert within_sigmas(good, n, 0.75)


def test_pr_table_exact_grid():
    for k in range(5, 11):
        p = Fraction(k, 10)
        t = nlbox.pr_correlation_table(p)
        assert t.exact
        rep = no_signalling_check(t)
        assert rep.passed and rep.alice_deviation == 0 and rep.bob_deviation == 0
        assert evaluate(chsh_expression(), t) == 4 * (2 * p - 1)


def test_pr_table_values():
    t = nlbox.pr_correlation_table(1)
    assert t.probs[1, 1, 0, 1] == Fraction(1, 2) and t.probs[1, 1, 0, 0] == 0
    assert evaluate(chsh_expression(), t) == 4
    q = nlbox.pr_correlation_table(float(np.cos(np.pi / 8) ** 2))
    assert evaluate(chsh_expression(), q) == pytest.approx(2 * np.sqrt(2), abs=1e-12)


def test_single_and_circuit_all_inputs(rng):
    c = BooleanCircuit(1, (Gate("AND", ("x1", "y1")),), "g0")
    for x, y in itertools.product((0, 1), repeat=2):
        r = vandam_eval(c, [x], [y], rng)
        assert r.output == x & y
        assert r.ledger.nl_boxes == 2 and r.ledger.classical_bits == 1


def test_not_only_circuit(rng):
    c = BooleanCircuit(1, (Gate("NOT", ("x1",)),), "g0")
    for x, y in itertools.product((0, 1), repeat=2):
        r = vandam_eval(c, [x], [y], rng)
        assert r.output == 1 - x and r.ledger.nl_boxes == 0


def test_share_invariant_after_every_gate():
    c = BooleanCircuit.from_json(FIXTURES / "circuit_majority.json")
    data = json.loads((FIXTURES / "circuit_majority.json").read_text())
    r = SeededRng(4)
    for bits in itertools.product((0, 1), repeat=2 * c.n):
        x, y = bits[:c.n], bits[c.n:]
        res = vandam_eval(c, x, y, r)
        for wire, a1, a2 in res.details["share_trace"]:
            sub = dict(data, output=wire)
            assert a1 ^ a2 == direct_eval(sub, x, y)


def test_random_circuits_exhaustive():
    r = SeededRng(50)
    for k in range(50):
        cr = r.split("c", k)
        n = cr.integer(1, 4)
        c = nlbox.random_circuit(n, cr.integer(0, 9), cr)
        data = c.to_json()
        for bits in itertools.product((0, 1), repeat=2 * n):
            x, y = bits[:n], bits[n:]
            res = vandam_eval(c, x, y, cr)
            assert res.output == direct_eval(data, x, y)
            assert res.ledger.nl_boxes == 2 * c.and_count and res.ledger.classical_bits == 1


def test_circuit_validation():
    with pytest.raises(CircuitError):
        BooleanCircuit(1, (Gate("AND", ("x1", "g0")),), "g0")
    with pytest.raises(CircuitError):
        BooleanCircuit(1, (Gate("XOR", ("x1", "y1")),), "g0")
    with pytest.raises(CircuitError):
        BooleanCircuit.from_json({"n": 1, "gates": [{"op": "AND"}], "output": "g0"})
    c = BooleanCircuit(2, (Gate("AND", ("x1", "y2")),), "g0")
    assert BooleanCircuit.from_json(json.dumps(c.to_json())) == c


def noisy_single_and_oracle(p):
    # Two boxes, each independently wrong with probability 1 - p; the output is right iff the errors cancel.
    total = 0.0
    for e1, e2 in itertools.product((0, 1), repeat=2):
        prob = (p if not e1 else 1 - p) * (p if not e2 else 1 - p)
        total += prob * (e1 == e2)
    return total


@pytest.mark.parametrize("p", [0.5, 0.7, 0.85, 0.908, 1.0])
def test_noisy_oracle_closed_form(p):
    assert noisy_single_and_oracle(p) == pytest.approx(p**2 + (1 - p) ** 2, abs=1e-15)


@pytest.mark.parametrize("p", [0.7, 0.85, 0.908])
def test_noisy_single_and_rate(p):
    c = BooleanCircuit(1, (Gate("AND", ("x1", "y1")),), "g0")
    rep = nlbox.noisy_vandam_success(c, p, 10_000, SeededRng(int(p * 1000)))
    assert within_sigmas(rep.successes, rep.trials, noisy_single_and_oracle(p))
    assert rep.reference_threshold == pytest.approx((3 + np.sqrt(6)) / 6)


def test_noisy_perfect_boxes():
    c = nlbox.random_circuit(3, 4, SeededRng(1))
    assert nlbox.noisy_vandam_success(c, 1.0, 300, SeededRng(2)).rate == 1.0


def test_noisy_rate_non_increasing_as_p_drops():
    c = BooleanCircuit(1, (Gate("AND", ("x1", "y1")),), "g0")
    rates = [nlbox.noisy_vandam_success(c, p, 4000, SeededRng(9)).rate for p in (1.0, 0.9, 0.8, 0.7, 0.6)]
    assert all(b <= a for a, b in zip(rates, rates[1:]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 3), st.integers(0, 4))
def test_vandam_matches_circuit_property(seed, n, ands):
    r = SeededRng(seed)
    c = nlbox.random_circuit(n, ands, r)
    x, y = r.bits(n), r.bits(n)
    assert vandam_eval(c, x, y, r).output == c.evaluate(x, y)
