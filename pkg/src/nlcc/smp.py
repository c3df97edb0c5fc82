"""Simultaneous message passing: classical and quantum fingerprints for equality."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import fields
from .ccproto import Channel, ProtocolError, ProtocolResult, _same_length, as_bits
from .qstate import MAX_QUBITS, H, SeededRng, StateVector, apply, inner

SWAP2 = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
# Fredkin gate on (control, a, b): swaps a and b when control is 1.
FREDKIN = np.eye(8, dtype=complex)
FREDKIN[[5, 6]] = FREDKIN[[6, 5]]


@dataclass(frozen=True)
class ClassicalFingerprint:
    points: tuple  # ((a, p_x(a)), ...)
    modulus: int

    def consistent_with(self, x) -> bool:
        x = as_bits(x)
        return all(fields.poly_eval(x, a, self.modulus) == v for a, v in self.points)


@dataclass(frozen=True)
class QuantumFingerprint:
    state: StateVector
    modulus: int
    width: int  # qubits per register; the state has 2 * width qubits


def quantum_fingerprint(x) -> QuantumFingerprint:
    """(1/sqrt m) sum_a |a>|p_x(a)> with both registers ceil(log2 m) qubits wide."""
    x = as_bits(x)
    m = fields.fingerprint_modulus(len(x))
    w = fields.field_bits(m)
    amps = np.zeros(2 ** (2 * w), dtype=complex)
    for a in range(m):
        amps[(a << w) | fields.poly_eval(x, a, m)] = 1 / math.sqrt(m)
    return QuantumFingerprint(StateVector(amps), m, w)


def fingerprint_overlap(x, y) -> Fraction:
    """<F_x|F_y> = |{a : p_x(a) = p_y(a)}| / m, exactly."""
    x, y = _same_length(x, y)
    m = fields.fingerprint_modulus(len(x))
    return Fraction(len(fields.agreement_points(x, y, m)), m)


def _swap_full(phi: StateVector, psi: StateVector) -> np.ndarray:
    """Run the circuit on one state vector; the ancilla is qubit 0."""
    k = phi.qubit_count
    s = StateVector(np.kron(np.array([1, 0], dtype=complex), np.kron(phi.amplitudes, psi.amplitudes)))
    s = apply(H, s, [0])
    for t in range(k):
        s = apply(FREDKIN, s, [0, 1 + t, 1 + k + t])
    s = apply(H, s, [0])
    half = 2 ** (2 * k)
    amps = s.amplitudes
    return np.array([np.vdot(amps[:half], amps[:half]).real, np.vdot(amps[half:], amps[half:]).real])


def _swap_branched(phi: StateVector, psi: StateVector) -> np.ndarray:
    """Same gates with the ancilla kept as two branches of the data register.

    Used when ancilla plus both registers exceed the dense-state cap: every
    Fredkin becomes a SWAP applied to the ancilla-1 branch only.
    """
    k = phi.qubit_count
    start = StateVector(np.kron(phi.amplitudes, psi.amplitudes))
    # After the first Hadamard both branches hold |phi>|psi> with weight 1/sqrt 2.
    b1 = start
    for t in range(k):
        b1 = apply(SWAP2, b1, [t, k + t])
    b0 = start.amplitudes / math.sqrt(2)
    b1 = b1.amplitudes / math.sqrt(2)
    out0 = (b0 + b1) / math.sqrt(2)
    out1 = (b0 - b1) / math.sqrt(2)
    return np.array([np.vdot(out0, out0).real, np.vdot(out1, out1).real])


def swap_test_distribution(phi: StateVector, psi: StateVector, route: str = "auto") -> np.ndarray:
    """Ancilla outcome probabilities [P(0), P(1)] of Hadamard, controlled-SWAP, Hadamard."""
    if phi.dim != psi.dim:
        raise ProtocolError(f"dimension mismatch: {phi.dim} vs {psi.dim}")
    total = 1 + 2 * phi.qubit_count
    if route == "auto":
        route = "full" if total <= MAX_QUBITS else "branched"
    if route == "full":
        return _swap_full(phi, psi)
    if route == "branched":
        return _swap_branched(phi, psi)
    raise ProtocolError(f"unknown route {route!r}")


def swap_test(phi: StateVector, psi: StateVector, rng: SeededRng) -> int:
    return rng.choice_index(swap_test_distribution(phi, psi))


def swap_test_shots(phi: StateVector, psi: StateVector, shots: int, rng: SeededRng) -> list[int]:
    """Outcomes of ``shots`` SWAP tests on fresh copies; the circuit is simulated once."""
    dist = swap_test_distribution(phi, psi)
    return [rng.choice_index(dist) for _ in range(shots)]


def smp_quantum_eq(x, y, reps: int, rng: SeededRng) -> ProtocolResult:
    """Referee runs ``reps`` SWAP tests on fresh fingerprints; outputs 1 ("equal") iff all give 0."""
    if reps < 1:
        raise ProtocolError("reps must be at least 1")
    x, y = _same_length(x, y)
    width = fields.field_bits(fields.fingerprint_modulus(len(x)))
    ch = Channel()
    ch.send("alice", "fingerprints", reps * 2 * width, "qubit")
    ch.send("bob", "fingerprints", reps * 2 * width, "qubit")
    p, overlap = _referee_distribution(x, y)
    outcomes = [rng.choice_index(p) for _ in range(reps)]
    out = int(not any(outcomes))
    p_accept = float(p[0]) ** reps
    truth = int(x == y)
    return ProtocolResult(out, ch.ledger, ch.transcript, correct=out == truth,
                          success_probability=p_accept if truth else 1 - p_accept,
                          details={"accept_probability": p_accept,
                                   "overlap": overlap})


@functools.lru_cache(maxsize=256)
def _referee_distribution(x: tuple, y: tuple):
    fx, fy = quantum_fingerprint(x), quantum_fingerprint(y)
    return swap_test_distribution(fx.state, fy.state), float(abs(inner(fx.state, fy.state)))


def default_sample_count(n: int) -> int:
    return math.ceil(2 * math.sqrt(n))


def classical_fingerprint(x, k: int, rng: SeededRng) -> ClassicalFingerprint:
    x = as_bits(x)
    p = fields.fingerprint_modulus(len(x))
    pts = tuple((a, fields.poly_eval(x, a, p)) for a in (rng.integer(0, p) for _ in range(k)))
    return ClassicalFingerprint(pts, p)


def smp_classical_eq(x, y, rng: SeededRng, k: int | None = None) -> ProtocolResult:
    """Both parties send k random points with evaluations; the referee compares at a shared point.

    Points are drawn independently with replacement. With no point in common
    the referee outputs 0; otherwise it uses the smallest common point.
    """
    x, y = _same_length(x, y)
    k = default_sample_count(len(x)) if k is None else k
    if k < 1:
        raise ProtocolError("k must be at least 1")
    fa = classical_fingerprint(x, k, rng.split("alice"))
    fb = classical_fingerprint(y, k, rng.split("bob"))
    bits = 2 * k * fields.field_bits(fa.modulus)
    ch = Channel()
    ch.send("alice", fa.points, bits)
    ch.send("bob", fb.points, bits)
    va, vb = dict(fa.points), dict(fb.points)
    common = sorted(set(va) & set(vb))
    out = 0 if not common else int(va[common[0]] == vb[common[0]])
    return ProtocolResult(out, ch.ledger, ch.transcript, correct=out == int(x == y),
                          details={"common_point": common[0] if common else None})
