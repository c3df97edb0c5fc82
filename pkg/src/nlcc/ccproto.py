"""Two-party communication protocols with cost accounting.

Bit strings are accepted as ``"0101"`` or any sequence of 0/1 ints. String
positions and matching indices are 1-based in every public result (x_1 is
the first bit), 0-based inside the simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from typing import Any, Sequence

import numpy as np

from . import fields
from .qstate import (
    ATOL,
    H,
    ProjectiveMeasurement,
    SeededRng,
    StateVector,
    apply,
    apply_diagonal,
    hadamard_on,
    is_unitary,
    marginal_probabilities,
    measure,
    phase_diagonal,
    sample,
)


class ProtocolError(ValueError):
    pass


class PromiseViolation(ProtocolError):
    pass


class InvalidMatching(ProtocolError):
    pass


def as_bits(x) -> tuple[int, ...]:
    if isinstance(x, str):
        if set(x) - {"0", "1"}:
            raise ProtocolError(f"not a bit string: {x!r}")
        return tuple(int(c) for c in x)
    bits = tuple(int(b) for b in x)
    if any(b not in (0, 1) for b in bits):
        raise ProtocolError(f"not a bit sequence: {x!r}")
    return bits


def bits_str(bits: Sequence[int]) -> str:
    return "".join(str(b) for b in bits)


def log2_exact(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise ProtocolError(f"n = {n} is not a power of two")
    return n.bit_length() - 1


def _dot(a: int, b: int) -> int:
    return bin(a & b).count("1") & 1


# ---------------------------------------------------------------------------
# Harness


@dataclass
class CostLedger:
    classical_bits: int = 0
    qubits: int = 0
    ebits: int = 0
    public_coin_bits: int = 0
    nl_boxes: int = 0
    rounds: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Message:
    sender: str
    payload: Any
    size: int
    kind: str  # "bit" or "qubit"


class Transcript(list):
    def total(self, kind: str) -> int:
        return sum(m.size for m in self if m.kind == kind)

    def to_json(self) -> list:
        return [
            {"sender": m.sender, "payload": _plain(m.payload), "size": m.size, "kind": m.kind}
            for m in self
        ]


def _plain(v):
    if isinstance(v, (list, tuple)):
        return [_plain(e) for e in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (int, float, str, bool)) or v is None:
        return v
    return str(v)


class Channel:
    """Collects messages and resource use for one protocol run.

    Each message adds its size to exactly one of ``classical_bits`` / ``qubits``
    and counts one round.
    """

    def __init__(self):
        self.ledger = CostLedger()
        self.transcript = Transcript()

    def send(self, sender: str, payload: Any, size: int, kind: str = "bit") -> None:
        if size < 0:
            raise ProtocolError("message size must be non-negative")
        if kind == "bit":
            self.ledger.classical_bits += size
        elif kind == "qubit":
            self.ledger.qubits += size
        else:
            raise ProtocolError(f"unknown message kind {kind!r}")
        self.transcript.append(Message(sender, payload, size, kind))
        self.ledger.rounds += 1

    def share_ebits(self, k: int) -> None:
        self.ledger.ebits += k

    def public_coins(self, k: int) -> None:
        self.ledger.public_coin_bits += k

    def use_boxes(self, k: int) -> None:
        self.ledger.nl_boxes += k


@dataclass
class ProtocolResult:
    output: Any
    ledger: CostLedger
    transcript: Transcript = field(default_factory=Transcript)
    correct: bool | None = None
    success_probability: float | None = None
    distribution: Any = None
    details: dict = field(default_factory=dict)

    def to_json(self, include_transcript: bool = False) -> dict:
        out = {
            "output": _plain(self.output),
            "ledger": self.ledger.to_json(),
            "correct": self.correct,
            "success_probability": self.success_probability,
        }
        if include_transcript:
            out["transcript"] = self.transcript.to_json()
        return out


def _finish(ch: Channel, output, **kw) -> ProtocolResult:
    return ProtocolResult(output, ch.ledger, ch.transcript, **kw)


# ---------------------------------------------------------------------------
# Equality


def _same_length(x, y):
    x, y = as_bits(x), as_bits(y)
    if len(x) != len(y):
        raise ProtocolError(f"input lengths differ: {len(x)} vs {len(y)}")
    return x, y


def eq_deterministic(x, y) -> ProtocolResult:
    """Bob sends y; Alice announces [x = y] with one more bit."""
    x, y = _same_length(x, y)
    ch = Channel()
    ch.send("bob", bits_str(y), len(y))
    out = int(x == y)
    ch.send("alice", out, 1)
    return _finish(ch, out, correct=True, success_probability=1.0)


def eq_public_coin(x, y, reps: int, rng: SeededRng) -> ProtocolResult:
    """k rounds of comparing x.r with y.r for shared random r."""
    x, y = _same_length(x, y)
    ch = Channel()
    out = 1
    for _ in range(reps):
        r = rng.bits(len(x))
        ch.public_coins(len(x))
        a = sum(xi & ri for xi, ri in zip(x, r)) & 1
        ch.send("alice", a, 1)
        b = sum(yi & ri for yi, ri in zip(y, r)) & 1
        if a != b:
            out = 0
    return _finish(ch, out, correct=out == int(x == y))


def eq_private_coin_poly(x, y, rng: SeededRng) -> ProtocolResult:
    """Alice sends (a, p_x(a)) for a uniform field element a."""
    x, y = _same_length(x, y)
    p = fields.fingerprint_modulus(len(x))
    ch = Channel()
    a = rng.integer(0, p)
    px = fields.poly_eval(x, a, p)
    ch.send("alice", (a, px), 2 * fields.field_bits(p))
    out = int(px == fields.poly_eval(y, a, p))
    return _finish(ch, out, correct=out == int(x == y), details={"modulus": p, "point": a})


# ---------------------------------------------------------------------------
# Distributed Deutsch-Jozsa


def check_dj_promise(x, y) -> tuple[tuple, tuple]:
    x, y = _same_length(x, y)
    n = len(x)
    log2_exact(n)
    if n < 2:
        raise PromiseViolation("the promise needs n >= 2")
    dist = sum(a != b for a, b in zip(x, y))
    if dist not in (0, n // 2):
        raise PromiseViolation(f"inputs differ in {dist} positions, expected 0 or {n // 2}")
    return x, y


def signed_index_state(x: Sequence[int]) -> StateVector:
    """(1/sqrt n) sum_i (-1)^{x_i} |i>."""
    q = log2_exact(len(x))
    return apply_diagonal(phase_diagonal(x), StateVector.uniform(q))


def dj_quantum(x, y, rng: SeededRng | None = None) -> ProtocolResult:
    x, y = check_dj_promise(x, y)
    n = len(x)
    q = log2_exact(n)
    ch = Channel()
    msg = signed_index_state(x)
    ch.send("alice", "signed index state", q, "qubit")
    s = apply_diagonal(phase_diagonal(y), msg)
    s = hadamard_on(s, range(q))
    probs = s.probabilities()
    p_zero = float(probs[0])
    label = rng.choice_index(probs) if rng is not None else int(np.argmax(probs))
    out = int(label == 0)
    truth = int(x == y)
    p_success = p_zero if truth else 1.0 - p_zero
    return _finish(ch, out, correct=out == truth, success_probability=p_success,
                   details={"amplitude_zero": complex(s.amplitudes[0])})


def max_entangled(q: int) -> StateVector:
    """(1/sqrt(2^q)) sum_i |i>|i> on 2q qubits, Alice high."""
    d = 2**q
    amps = np.zeros(d * d, dtype=complex)
    amps[np.arange(d) * d + np.arange(d)] = 1 / np.sqrt(d)
    return StateVector(amps)


def dj_nonlocal(x, y, rng: SeededRng | None = None) -> ProtocolResult:
    """Joint distribution P(a, b) of the entanglement-only DJ correlation."""
    x, y = check_dj_promise(x, y)
    q = log2_exact(len(x))
    ch = Channel()
    ch.share_ebits(q)
    s = max_entangled(q)
    s = apply_diagonal(phase_diagonal(x), s, range(q))
    s = apply_diagonal(phase_diagonal(y), s, range(q, 2 * q))
    s = hadamard_on(s, range(2 * q))
    joint = s.probabilities().reshape(2**q, 2**q)
    output = None
    if rng is not None:
        k = rng.choice_index(joint.reshape(-1))
        output = divmod(k, 2**q)
    p_equal = float(np.trace(joint))
    truth = x == y
    return _finish(ch, output, distribution=joint,
                   correct=None if output is None else (output[0] == output[1]) == truth,
                   success_probability=p_equal if truth else 1.0 - p_equal)


# ---------------------------------------------------------------------------
# Intersection via distributed Grover search


def grover_schedule(n: int) -> list[int]:
    """Iteration counts ceil(pi/4 sqrt(n / 2^j)) for j = 0..log n."""
    q = log2_exact(n)
    return [math.ceil(math.pi / 4 * math.sqrt(n / 2**j)) for j in range(q + 1)]


def intersection_grover(x, y, rng: SeededRng) -> ProtocolResult:
    """Find i with x_i = y_i = 1, or None.

    Every candidate is verified classically, so a returned index is always a
    genuine intersection.
    """
    x, y = _same_length(x, y)
    n = len(x)
    q = log2_exact(n)
    ch = Channel()
    dim = 2 ** (q + 1)
    # Alice's tagging map |i, b> -> |i, b xor x_i>; the tag is the lowest qubit.
    tag = np.zeros((dim, dim), dtype=complex)
    for i in range(n):
        for b in (0, 1):
            tag[2 * i + (b ^ x[i]), 2 * i + b] = 1
    bob_phase = np.array([(-1.0) ** (b & y[i]) for i in range(n) for b in (0, 1)], dtype=complex)
    zero_phase = np.ones(n, dtype=complex)
    zero_phase[0] = -1
    register = list(range(q))

    def oracle(s):
        s = apply(tag, s)
        ch.send("alice", "tagged state", q + 1, "qubit")
        s = apply_diagonal(bob_phase, s)
        ch.send("bob", "phased state", q + 1, "qubit")
        return apply(tag, s)

    schedule = grover_schedule(n)
    attempts = max(1, 3 * q)
    found = None
    oracle_calls = 0
    for attempt in range(attempts):
        r = schedule[attempt % len(schedule)]
        s = StateVector.basis(q + 1, 0)
        s = hadamard_on(s, register)
        for _ in range(r):
            s = oracle(s)
            oracle_calls += 1
            s = hadamard_on(s, register)
            s = apply_diagonal(zero_phase, s, register)
            s = hadamard_on(s, register)
        probs = marginal_probabilities(s, register)
        i = rng.choice_index(probs)
        if x[i] == 0:
            continue
        ch.send("alice", i + 1, q, "bit")
        ch.send("bob", y[i], 1, "bit")
        if y[i] == 1:
            found = i + 1
            break
    intersects = any(a & b for a, b in zip(x, y))
    correct = (found is None and not intersects) or (found is not None and x[found - 1] & y[found - 1] == 1)
    return _finish(ch, found, correct=correct, details={"oracle_calls": oracle_calls})


# ---------------------------------------------------------------------------
# Hidden matching


@dataclass(frozen=True)
class MatchingSpec:
    """Perfect matching on {1..n} given as 1-based pairs."""

    n: int
    pairs: tuple

    def __post_init__(self):
        pairs = tuple(tuple(sorted((int(i), int(j)))) for i, j in self.pairs)
        if self.n % 2 or self.n < 2:
            raise InvalidMatching("n must be even and positive")
        seen = [k for p in pairs for k in p]
        if sorted(seen) != list(range(1, self.n + 1)) or len(pairs) != self.n // 2:
            raise InvalidMatching(f"pairs {pairs} are not a perfect matching of 1..{self.n}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def random(cls, n: int, rng: SeededRng) -> "MatchingSpec":
        perm = [k + 1 for k in rng.sample_without_replacement(n, n)]
        return cls(n, tuple(zip(perm[0::2], perm[1::2])))

    @classmethod
    def adjacent(cls, n: int) -> "MatchingSpec":
        return cls(n, tuple((k, k + 1) for k in range(1, n, 2)))


def _matching_for(x, matching: MatchingSpec):
    x = as_bits(x)
    if matching.n != len(x):
        raise InvalidMatching(f"matching is on {matching.n} points but x has {len(x)} bits")
    return x


def hm_quantum(x, matching: MatchingSpec, rng: SeededRng | None = None) -> ProtocolResult:
    """One-way quantum protocol; always outputs a correct triple (i, j, x_i xor x_j)."""
    x = _matching_for(x, matching)
    n = len(x)
    q = log2_exact(n)
    ch = Channel()
    msg = signed_index_state(x)
    ch.send("alice", "signed index state", q, "qubit")
    d = 2**q
    pair_projs = []
    for i, j in matching.pairs:
        p = np.zeros((d, d), dtype=complex)
        p[i - 1, i - 1] = p[j - 1, j - 1] = 1
        pair_projs.append(p)
    split = ProjectiveMeasurement(tuple(pair_projs), matching.pairs)
    triples: dict = {}
    branches = []
    for o in measure(msg, split):
        if o.probability <= 1e-15:
            continue
        i, j = o.label
        plus = np.zeros(d, dtype=complex)
        minus = np.zeros(d, dtype=complex)
        plus[i - 1] = plus[j - 1] = 1 / np.sqrt(2)
        minus[i - 1], minus[j - 1] = 1 / np.sqrt(2), -1 / np.sqrt(2)
        pp, pm = np.outer(plus, plus.conj()), np.outer(minus, minus.conj())
        parity = ProjectiveMeasurement((pp, pm, np.eye(d) - pp - pm), (0, 1, None))
        inner_dist = measure(o.state, parity)
        for po in inner_dist:
            if po.probability > 1e-15:
                key = (i, j, po.label)
                triples[key] = triples.get(key, 0.0) + o.probability * po.probability
        branches.append((o.probability, (i, j), inner_dist))
    if rng is not None:
        b = rng.choice_index([p for p, _, _ in branches])
        _, (i, j), inner_dist = branches[b]
        bit, _ = sample(inner_dist, rng)
        output = (i, j, bit)
    else:
        output = max(triples, key=lambda k: (triples[k], [-v if v is not None else 1 for v in k]))
    p_ok = sum(p for (i, j, b), p in triples.items() if b == (x[i - 1] ^ x[j - 1]))
    return _finish(ch, output, correct=output[2] == (x[output[0] - 1] ^ x[output[1] - 1]),
                   success_probability=p_ok, distribution=triples)


def hm_constraint_holds(x, pair, k: int, l: int) -> bool:
    """i.(k xor l) + j.(k xor l) = x_i + x_j (mod 2), with i, j as 0-based m-bit strings."""
    x = as_bits(x)
    i, j = pair
    kl = k ^ l
    return (_dot(i - 1, kl) + _dot(j - 1, kl)) % 2 == (x[i - 1] + x[j - 1]) % 2


def hm_nonlocal(x, matching: MatchingSpec, rng: SeededRng | None = None) -> ProtocolResult:
    """Exact joint distribution over (k, (i, j), l) from m shared ebits."""
    x = _matching_for(x, matching)
    n = len(x)
    m = log2_exact(n)
    ch = Channel()
    ch.share_ebits(m)
    s = max_entangled(m)
    s = apply_diagonal(phase_diagonal(x), s, range(m))
    d = 2**m
    pair_projs = []
    for i, j in matching.pairs:
        p = np.zeros((d, d), dtype=complex)
        p[i - 1, i - 1] = p[j - 1, j - 1] = 1
        pair_projs.append(p)
    split = ProjectiveMeasurement(tuple(pair_projs), matching.pairs)
    dist: dict = {}
    worst_violation = 0.0
    for o in measure(s, split, range(m, 2 * m)):
        if o.probability <= 1e-15:
            continue
        post = hadamard_on(o.state, range(2 * m))
        amps = post.amplitudes.reshape(d, d) * np.sqrt(o.probability)
        for k in range(d):
            for l in range(d):
                a = abs(amps[k, l])
                if hm_constraint_holds(x, o.label, k, l):
                    if a * a > 0:
                        dist[(k, o.label, l)] = a * a
                else:
                    worst_violation = max(worst_violation, a)
    output = None
    if rng is not None:
        keys = list(dist)
        output = keys[rng.choice_index([dist[k] for k in keys])]
    return _finish(ch, output, distribution=dist,
                   correct=None if output is None else hm_constraint_holds(x, output[1], output[0], output[2]),
                   details={"max_violating_amplitude": worst_violation})


def hm_classical_oneway(x, matching: MatchingSpec, sample_size: int, rng: SeededRng) -> ProtocolResult:
    """Alice sends (i, x_i) for random distinct i; Bob needs both ends of a matched pair."""
    x = _matching_for(x, matching)
    n = len(x)
    if not 0 <= sample_size <= n:
        raise ProtocolError("sample_size must lie in [0, n]")
    ch = Channel()
    chosen = sorted(rng.sample_without_replacement(n, sample_size))
    known = {i + 1: x[i] for i in chosen}
    ch.send("alice", [(i, b) for i, b in known.items()], sample_size * (math.ceil(math.log2(n)) + 1))
    output = None
    for i, j in matching.pairs:
        if i in known and j in known:
            output = (i, j, known[i] ^ known[j])
            break
    return _finish(ch, output, correct=output is not None,
                   success_probability=hm_birthday_success(n, sample_size))


def hm_birthday_success(n: int, sample_size: int) -> float:
    """P(a uniform sample_size-subset of {1..n} contains some matched pair)."""
    h = n // 2
    if sample_size > h:
        return 1.0
    return 1.0 - comb(h, sample_size) * 2**sample_size / comb(n, sample_size)


# ---------------------------------------------------------------------------
# Raz's vector-in-subspace problem


def gram_schmidt(vectors: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of ``vectors`` (modified Gram-Schmidt)."""
    q = np.array(vectors, dtype=float)
    for k in range(q.shape[1]):
        for j in range(k):
            q[:, k] -= (q[:, j] @ q[:, k]) * q[:, j]
        nrm = np.linalg.norm(q[:, k])
        if nrm < 1e-12:
            raise ProtocolError("degenerate vectors in Gram-Schmidt")
        q[:, k] /= nrm
    return q


@dataclass(frozen=True)
class RazInstance:
    m: int
    v: np.ndarray
    p0: np.ndarray
    u: np.ndarray
    true_label: int

    def __post_init__(self):
        log2_exact(self.m)
        if abs(np.linalg.norm(self.v) - 1) > ATOL:
            raise ProtocolError("v is not a unit vector")
        if not is_unitary(self.u):
            raise ProtocolError("U is not unitary")
        p0 = self.p0
        if not np.allclose(p0 @ p0, p0, atol=ATOL) or not np.allclose(p0, p0.T.conj(), atol=ATOL):
            raise ProtocolError("P0 is not an orthogonal projector")
        if self.overlap < 2 / 3 - ATOL:
            raise ProtocolError(f"promise violated: overlap {self.overlap:.6f} < 2/3")

    @property
    def p1(self) -> np.ndarray:
        return np.eye(self.m) - self.p0

    @property
    def overlap(self) -> float:
        proj = self.p0 if self.true_label == 0 else self.p1
        w = proj @ (self.u @ self.v)
        return float(np.vdot(w, w).real)


def raz_instance_gen(m: int, target_overlap: float, rng: SeededRng, label: int | None = None) -> RazInstance:
    if not 2 / 3 - ATOL <= target_overlap <= 1 + ATOL:
        raise ProtocolError("target overlap must lie in [2/3, 1]")
    target_overlap = min(target_overlap, 1.0)
    u = gram_schmidt(rng.normal((m, m)))
    basis = gram_schmidt(rng.normal((m, m)))
    half = m // 2
    h0, h1 = basis[:, :half], basis[:, half:]
    p0 = h0 @ h0.T
    label = rng.bit() if label is None else int(label)
    inside, outside = (h0, h1) if label == 0 else (h1, h0)
    a = inside @ rng.normal(inside.shape[1])
    a /= np.linalg.norm(a)
    b = outside @ rng.normal(outside.shape[1])
    b /= np.linalg.norm(b)
    w = math.sqrt(target_overlap) * a + math.sqrt(1 - target_overlap) * b
    v = u.T @ w
    return RazInstance(m, v / np.linalg.norm(v), p0, u, label)


def raz_quantum(inst: RazInstance, rng: SeededRng | None = None) -> ProtocolResult:
    """Alice sends v, Bob applies U and returns it, Alice measures {P0, P1}."""
    q = log2_exact(inst.m)
    ch = Channel()
    s = StateVector(inst.v.astype(complex))
    ch.send("alice", "v as log m qubits", q, "qubit")
    s = apply(inst.u.astype(complex), s)
    ch.send("bob", "Uv", q, "qubit")
    dist = measure(s, ProjectiveMeasurement((inst.p0, inst.p1), (0, 1)))
    if rng is not None:
        label, _ = sample(dist, rng)
    else:
        label = max(dist, key=lambda o: o.probability).label
    p_true = dist.probability_of(inst.true_label)
    return _finish(ch, label, correct=label == inst.true_label, success_probability=p_true)


# ---------------------------------------------------------------------------
# Inner product: state-transfer demonstration


def ip_transfer_demo(x) -> ProtocolResult:
    """Apply |x>|y> -> (-1)^{x.y}|x>|y> to |x> (x) uniform, then Hadamard Bob's side.

    Bob ends up holding |x> exactly; the output is the string he measures.
    """
    x = as_bits(x)
    n = len(x)
    if not 1 <= n <= 10:
        raise ProtocolError("demo supports 1 <= n <= 10")
    alice = StateVector.from_bits(x)
    s = StateVector(np.kron(alice.amplitudes, StateVector.uniform(n).amplitudes))
    idx = np.arange(2 ** (2 * n))
    both = (idx >> n) & (idx & (2**n - 1))
    parity = np.zeros_like(both)
    for k in range(n):
        parity ^= (both >> k) & 1
    s = apply_diagonal(np.where(parity == 1, -1.0, 1.0), s)
    s = hadamard_on(s, range(n, 2 * n))
    probs = marginal_probabilities(s, range(n, 2 * n))
    k = int(np.argmax(probs))
    recovered = bits_str(((k >> (n - 1 - t)) & 1) for t in range(n))
    return ProtocolResult(recovered, CostLedger(), correct=recovered == bits_str(x),
                          success_probability=float(probs[k]))
