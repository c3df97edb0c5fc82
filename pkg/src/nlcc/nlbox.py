"""Non-local (PR) boxes and share-based evaluation of Boolean circuits."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .bell import CorrelationTable
from .ccproto import Channel, ProtocolError, ProtocolResult, as_bits
from .qstate import SeededRng

# Box reliability above which noisy boxes are known to trivialize communication
# complexity; reported as a reference line only.
NOISE_THRESHOLD = (3 + math.sqrt(6)) / 6


class BoxError(RuntimeError):
    pass


class CircuitError(ValueError):
    pass


class PRBox:
    """One-shot box: a uniform, a xor b = x and y with probability p.

    Noise model: with probability 1 - p Bob's output is flipped.
    """

    _ids = itertools.count()

    def __init__(self, p: float = 1.0):
        if not 0.5 <= float(p) <= 1.0:
            raise BoxError(f"p = {p} outside [1/2, 1]")
        self.p = p
        self.consumed = False
        self.box_id = next(PRBox._ids)

    def query(self, x: int, y: int, rng: SeededRng) -> tuple[int, int]:
        if self.consumed:
            raise BoxError(f"box {self.box_id} already used")
        self.consumed = True
        # Always draw both numbers so runs at different p stay coupled.
        a = rng.bit()
        u = rng.random()
        b = a ^ (x & y)
        if u >= self.p:
            b ^= 1
        return a, b


def pr_box_query(box: PRBox, x: int, y: int, rng: SeededRng) -> tuple[int, int]:
    return box.query(x, y, rng)


def pr_correlation_table(p=1) -> CorrelationTable:
    """P(a,b|x,y) = p/2 if a xor b = x and y, (1-p)/2 otherwise. Exact for int/Fraction p."""
    if isinstance(p, (int, Fraction)):
        p = Fraction(p)
        half = Fraction(1, 2)
    else:
        p = float(p)
        half = 0.5
    if not 0.5 <= p <= 1:
        raise BoxError(f"p = {p} outside [1/2, 1]")
    probs = [[[[p * half if (a ^ b) == (x & y) else (1 - p) * half for b in (0, 1)]
               for a in (0, 1)] for y in (0, 1)] for x in (0, 1)]
    return CorrelationTable(probs)


# ---------------------------------------------------------------------------
# Circuits


@dataclass(frozen=True)
class Gate:
    op: str  # "AND" or "NOT"
    inputs: tuple


@dataclass(frozen=True)
class BooleanCircuit:
    """Gates over wires ``x1..xn``, ``y1..yn`` and earlier gate outputs ``g0, g1, ...``."""

    n: int
    gates: tuple
    output: str

    def __post_init__(self):
        if self.n < 1:
            raise CircuitError("n must be at least 1")
        known = {f"x{i}" for i in range(1, self.n + 1)} | {f"y{i}" for i in range(1, self.n + 1)}
        for k, g in enumerate(self.gates):
            arity = {"AND": 2, "NOT": 1}.get(g.op)
            if arity is None or len(g.inputs) != arity:
                raise CircuitError(f"gate g{k}: bad op or arity {g}")
            for ref in g.inputs:
                if ref not in known:
                    raise CircuitError(f"gate g{k} uses {ref!r} before it is defined")
            known.add(f"g{k}")
        if self.output not in known:
            raise CircuitError(f"unknown output wire {self.output!r}")

    @property
    def and_count(self) -> int:
        return sum(g.op == "AND" for g in self.gates)

    def evaluate(self, x, y) -> int:
        x, y = as_bits(x), as_bits(y)
        self._check_inputs(x, y)
        wires = {f"x{i + 1}": b for i, b in enumerate(x)} | {f"y{i + 1}": b for i, b in enumerate(y)}
        for k, g in enumerate(self.gates):
            v = [wires[r] for r in g.inputs]
            wires[f"g{k}"] = 1 - v[0] if g.op == "NOT" else v[0] & v[1]
        return wires[self.output]

    def _check_inputs(self, x, y):
        if len(x) != self.n or len(y) != self.n:
            raise CircuitError(f"circuit takes {self.n}-bit inputs")

    def to_json(self) -> dict:
        return {"n": self.n, "gates": [{"op": g.op, "in": list(g.inputs)} for g in self.gates],
                "output": self.output}

    @classmethod
    def from_json(cls, data) -> "BooleanCircuit":
        if isinstance(data, (str, Path)) and Path(data).exists():
            data = json.loads(Path(data).read_text())
        elif isinstance(data, str):
            data = json.loads(data)
        try:
            gates = tuple(Gate(g["op"].upper(), tuple(g["in"])) for g in data["gates"])
            return cls(int(data["n"]), gates, data["output"])
        except (KeyError, TypeError, AttributeError) as e:
            raise CircuitError(f"malformed circuit JSON: {e}") from e


def random_circuit(n: int, and_gates: int, rng: SeededRng, not_gates: int | None = None) -> BooleanCircuit:
    not_gates = rng.integer(0, and_gates + 2) if not_gates is None else not_gates
    ops = ["AND"] * and_gates + ["NOT"] * not_gates
    order = rng.sample_without_replacement(len(ops), len(ops))
    wires = [f"x{i}" for i in range(1, n + 1)] + [f"y{i}" for i in range(1, n + 1)]
    gates = []
    for k, idx in enumerate(order):
        op = ops[idx]
        ins = tuple(wires[rng.integer(0, len(wires))] for _ in range(2 if op == "AND" else 1))
        gates.append(Gate(op, ins))
        wires.append(f"g{k}")
    return BooleanCircuit(n, tuple(gates), wires[-1])


def vandam_eval(c: BooleanCircuit, x, y, rng: SeededRng, p: float = 1.0) -> ProtocolResult:
    """Evaluate c on shares using two boxes per AND and one final bit from Alice."""
    x, y = as_bits(x), as_bits(y)
    c._check_inputs(x, y)
    ch = Channel()
    alice = {f"x{i + 1}": b for i, b in enumerate(x)} | {f"y{i + 1}": 0 for i in range(c.n)}
    bob = {f"x{i + 1}": 0 for i in range(c.n)} | {f"y{i + 1}": b for i, b in enumerate(y)}
    trace = []
    for k, g in enumerate(c.gates):
        w = f"g{k}"
        if g.op == "NOT":
            alice[w] = 1 - alice[g.inputs[0]]
            bob[w] = bob[g.inputs[0]]
        else:
            u, v = g.inputs
            d1, d2 = PRBox(p).query(alice[u], bob[v], rng)
            e1, e2 = PRBox(p).query(alice[v], bob[u], rng)
            ch.use_boxes(2)
            alice[w] = (alice[u] & alice[v]) ^ d1 ^ e1
            bob[w] = (bob[u] & bob[v]) ^ d2 ^ e2
        trace.append((w, alice[w], bob[w]))
    ch.send("alice", alice[c.output], 1)
    out = alice[c.output] ^ bob[c.output]
    return ProtocolResult(out, ch.ledger, ch.transcript, correct=out == c.evaluate(x, y),
                          details={"share_trace": trace})


@dataclass
class NoisyReport:
    p: float
    trials: int
    successes: int
    rate: float
    std_error: float
    reference_threshold: float = field(default=NOISE_THRESHOLD)

    def to_json(self) -> dict:
        return dict(self.__dict__)


def noisy_vandam_success(c: BooleanCircuit, p: float, trials: int, rng: SeededRng) -> NoisyReport:
    """Success frequency over uniformly random inputs with noisy boxes."""
    wins = 0
    for t in range(trials):
        r = rng.split("trial", t)
        x, y = r.bits(c.n), r.bits(c.n)
        wins += vandam_eval(c, x, y, r.split("boxes"), p).correct
    rate = wins / trials
    return NoisyReport(p, trials, wins, rate, math.sqrt(rate * (1 - rate) / trials))
