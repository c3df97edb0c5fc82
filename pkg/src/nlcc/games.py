"""Non-locality games: exact evaluation, brute-force classical optimum, GHZ/CHSH/magic square."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .qstate import (
    ATOL,
    H,
    PAULIS,
    ProjectiveMeasurement,
    SeededRng,
    StateVector,
    is_hermitian,
    max_eigenvalue,
    measure,
    permute_qubits,
    rotation,
    sample,
    tensor,
)

MAX_STRATEGY_SPACE = 10**8


class GameError(ValueError):
    pass


class StrategySpaceTooLarge(GameError):
    pass


@dataclass(frozen=True)
class GameSpec:
    name: str
    input_alphabets: tuple
    output_alphabets: tuple
    promise: Callable[[tuple], bool]
    win: Callable[[tuple, tuple], bool]
    distribution: Mapping[tuple, Fraction | float]

    def __post_init__(self):
        if len(self.input_alphabets) != len(self.output_alphabets):
            raise GameError("input and output alphabets disagree on party count")
        total = 0
        for inputs, w in self.distribution.items():
            if not self.promise(inputs):
                raise GameError(f"distribution puts weight on non-promise input {inputs}")
            total += w
        if abs(float(total) - 1.0) > 1e-12:
            raise GameError(f"input distribution sums to {total}")

    @property
    def parties(self) -> int:
        return len(self.input_alphabets)


@dataclass(frozen=True)
class DeterministicStrategy:
    """Per party, a total map from input to output."""

    tables: tuple

    def outputs(self, inputs: tuple) -> tuple:
        return tuple(t[i] for t, i in zip(self.tables, inputs))

    def encoding(self, game: GameSpec) -> tuple:
        """Output indices concatenated party by party in input order."""
        return tuple(
            list(outs).index(table[i])
            for table, ins, outs in zip(self.tables, game.input_alphabets, game.output_alphabets)
            for i in ins
        )


@dataclass(frozen=True)
class QuantumStrategy:
    """Shared state plus, per party and input, a sequence of local measurements.

    ``registers[p]`` lists the qubits party ``p`` owns. ``measurements[p][input]``
    is a tuple of :class:`ProjectiveMeasurement` applied left to right on that
    register. The party's output is its single outcome label, or the tuple of
    labels when several measurements are made, unless ``output_maps[p]`` is given.
    """

    shared_state: StateVector
    registers: tuple
    measurements: tuple
    output_maps: tuple | None = None
    description: str = ""

    def __post_init__(self):
        owned = [q for reg in self.registers for q in reg]
        if len(set(owned)) != len(owned):
            raise GameError("party registers overlap")
        for reg, table in zip(self.registers, self.measurements):
            for seq in table.values():
                for m in seq:
                    if m.dim != 2 ** len(reg):
                        raise GameError("measurement does not act on the owning register")

    @property
    def parties(self) -> int:
        return len(self.registers)

    def _party_output(self, p: int, labels: tuple):
        if self.output_maps is not None and self.output_maps[p] is not None:
            return self.output_maps[p](labels)
        return labels[0] if len(labels) == 1 else labels

    def joint_distribution(self, inputs: tuple) -> dict:
        """Exact distribution of the joint outputs for one input tuple."""
        steps = []
        for p, x in enumerate(inputs):
            for m in self.measurements[p][x]:
                steps.append((p, m))
        dist: dict = {}

        def walk(state, k, prob, labels):
            if prob <= 0:
                return
            if k == len(steps):
                outs = tuple(self._party_output(p, tuple(labels[p])) for p in range(self.parties))
                dist[outs] = dist.get(outs, 0.0) + prob
                return
            p, m = steps[k]
            for o in measure(state, m, self.registers[p]):
                if o.probability > 1e-15:
                    labels[p].append(o.label)
                    walk(o.state, k + 1, prob * o.probability, labels)
                    labels[p].pop()

        walk(self.shared_state, 0, 1.0, [[] for _ in range(self.parties)])
        return dist

    def play(self, inputs: tuple, rng: SeededRng) -> tuple:
        """Sample one run: parties measure in order, each sampling an outcome."""
        state = self.shared_state
        labels = [[] for _ in range(self.parties)]
        for p, x in enumerate(inputs):
            for m in self.measurements[p][x]:
                label, state = sample(measure(state, m, self.registers[p]), rng)
                labels[p].append(label)
        return tuple(self._party_output(p, tuple(labels[p])) for p in range(self.parties))


@dataclass
class GameReport:
    win_probability: float | Fraction
    per_input: dict = field(default_factory=dict)
    strategy: str = ""

    def to_json(self) -> dict:
        return {
            "win_probability": float(self.win_probability),
            "per_input": {"".join(map(str, k)): float(v) for k, v in self.per_input.items()},
            "strategy": self.strategy,
        }


def _check_alphabets(g: GameSpec, s) -> None:
    if isinstance(s, DeterministicStrategy):
        tables = s.tables
        if len(tables) != g.parties:
            raise GameError("strategy has the wrong number of parties")
        for table, ins, outs in zip(tables, g.input_alphabets, g.output_alphabets):
            for i in ins:
                if i not in table:
                    raise GameError(f"strategy undefined on input {i!r}")
                if table[i] not in outs:
                    raise GameError(f"output {table[i]!r} outside the output alphabet")
    elif isinstance(s, QuantumStrategy):
        if s.parties != g.parties:
            raise GameError("strategy has the wrong number of parties")
        for table, ins in zip(s.measurements, g.input_alphabets):
            missing = set(ins) - set(table)
            if missing:
                raise GameError(f"no measurement for inputs {sorted(missing)}")
    else:
        raise GameError(f"unsupported strategy type {type(s).__name__}")


def eval_exact(g: GameSpec, s: DeterministicStrategy | QuantumStrategy) -> GameReport:
    """Exact winning probability: no sampling."""
    _check_alphabets(g, s)
    per_input = {}
    total = 0
    for inputs, w in g.distribution.items():
        if isinstance(s, DeterministicStrategy):
            p_win = Fraction(1) if g.win(inputs, s.outputs(inputs)) else Fraction(0)
        else:
            p_win = 0.0
            for outs, prob in s.joint_distribution(inputs).items():
                for o, alphabet in zip(outs, g.output_alphabets):
                    if o not in alphabet:
                        raise GameError(f"quantum output {o!r} outside the output alphabet")
                if g.win(inputs, outs):
                    p_win += prob
        per_input[inputs] = p_win
        total += w * p_win
    desc = s.description if isinstance(s, QuantumStrategy) else f"deterministic {s.tables!r}"
    return GameReport(total, per_input, desc)


def strategy_space_size(g: GameSpec) -> int:
    size = 1
    for ins, outs in zip(g.input_alphabets, g.output_alphabets):
        size *= len(outs) ** len(ins)
    return size


def best_classical(g: GameSpec) -> tuple[Fraction | float, DeterministicStrategy]:
    """Exhaustive optimum over deterministic strategies.

    Ties go to the lexicographically smallest strategy encoding.
    """
    size = strategy_space_size(g)
    if size > MAX_STRATEGY_SPACE:
        raise StrategySpaceTooLarge(f"{size} deterministic strategies exceed {MAX_STRATEGY_SPACE}")
    ins = g.input_alphabets
    outs = g.output_alphabets
    # tables[p][s, i] = output index of party p's strategy s on its i-th input
    tables = [
        np.array(list(itertools.product(range(len(o)), repeat=len(i))), dtype=np.int64).reshape(-1, len(i))
        for i, o in zip(ins, outs)
    ]
    shape_out = tuple(len(o) for o in outs)
    weighted = []
    for inputs, w in g.distribution.items():
        if w == 0:
            continue
        win = np.zeros(shape_out)
        for idx in itertools.product(*(range(n) for n in shape_out)):
            if g.win(inputs, tuple(o[k] for o, k in zip(outs, idx))):
                win[idx] = float(w)
        pos = tuple(list(a).index(x) for a, x in zip(ins, inputs))
        weighted.append((pos, win))

    rest = int(np.prod([t.shape[0] for t in tables[1:]])) if len(tables) > 1 else 1
    chunk = max(1, 2_000_000 // rest)
    best_val, best_flat = -1.0, -1
    for start in range(0, tables[0].shape[0], chunk):
        t0 = tables[0][start : start + chunk]
        values = np.zeros((t0.shape[0],) + tuple(t.shape[0] for t in tables[1:]))
        for pos, win in weighted:
            cols = [t0[:, pos[0]]] + [t[:, pos[p]] for p, t in enumerate(tables) if p > 0]
            values += win[np.ix_(*cols)]
        flat = values.reshape(-1)
        cmax = float(flat.max())
        if cmax > best_val + 1e-12:
            first = int(np.argmax(flat >= cmax - 1e-12))
            best_val, best_flat = cmax, start * rest + first
    idx = np.unravel_index(best_flat, tuple(t.shape[0] for t in tables))
    strat = DeterministicStrategy(
        tuple(
            {x: o[int(k)] for x, k in zip(i, tables[p][s])}
            for p, (i, o, s) in enumerate(zip(ins, outs, idx))
        )
    )
    return eval_exact(g, strat).win_probability, strat


# ---------------------------------------------------------------------------
# GHZ


def ghz_game() -> GameSpec:
    def promise(stu):
        return (stu[0] ^ stu[1] ^ stu[2]) == 0

    def win(stu, abc):
        target = 0 if stu == (0, 0, 0) else 1
        return (abc[0] ^ abc[1] ^ abc[2]) == target

    support = [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]
    return GameSpec(
        "ghz",
        ((0, 1),) * 3,
        ((0, 1),) * 3,
        promise,
        win,
        {stu: Fraction(1, 4) for stu in support},
    )


def ghz_state() -> StateVector:
    amps = np.zeros(8, dtype=complex)
    amps[0b000] = 0.5
    amps[0b011] = amps[0b101] = amps[0b110] = -0.5
    return StateVector(amps)


def ghz_quantum() -> QuantumStrategy:
    comp = ProjectiveMeasurement.computational(1)
    had = ProjectiveMeasurement.from_basis(H)
    per_party = {0: (comp,), 1: (had,)}
    return QuantumStrategy(
        ghz_state(),
        ((0,), (1,), (2,)),
        (per_party,) * 3,
        description="each party measures Z on input 0 and the Hadamard basis on input 1",
    )


# ---------------------------------------------------------------------------
# CHSH

CHSH_ANGLES = {0: -np.pi / 16, 1: 3 * np.pi / 16}


def chsh_game() -> GameSpec:
    return GameSpec(
        "chsh",
        ((0, 1), (0, 1)),
        ((0, 1), (0, 1)),
        lambda st: True,
        lambda st, ab: (ab[0] ^ ab[1]) == (st[0] & st[1]),
        {st: Fraction(1, 4) for st in itertools.product((0, 1), repeat=2)},
    )


def rotated_measurement(theta: float) -> ProjectiveMeasurement:
    """Rotate by R(theta), then measure in the computational basis (outcome k -> bit k)."""
    # P_k = R^dag |k><k| R, i.e. projectors onto the rows of R.
    return ProjectiveMeasurement.from_basis(rotation(theta).conj().T)


def chsh_quantum(angles: Mapping[int, float] | None = None, bob_angles: Mapping[int, float] | None = None) -> QuantumStrategy:
    angles = dict(CHSH_ANGLES if angles is None else angles)
    bob_angles = angles if bob_angles is None else dict(bob_angles)
    state = StateVector(np.array([1, 0, 0, -1], dtype=complex) / np.sqrt(2))
    alice = {s: (rotated_measurement(th),) for s, th in angles.items()}
    bob = {t: (rotated_measurement(th),) for t, th in bob_angles.items()}
    return QuantumStrategy(
        state,
        ((0,), (1,)),
        (alice, bob),
        description=f"rotations {angles} / {bob_angles} on (|00>-|11>)/sqrt2",
    )


# ---------------------------------------------------------------------------
# Magic square

MAGIC_TABLE = (
    ("XX", "YZ", "ZY"),
    ("YY", "ZX", "XZ"),
    ("ZZ", "XY", "YX"),
)

# A deterministic 8/9 strategy: Alice answers rows, Bob answers columns.
MAGIC_CLASSICAL_ALICE = {1: (0, 0, 0), 2: (0, 0, 0), 3: (1, 1, 0)}
MAGIC_CLASSICAL_BOB = {1: (0, 0, 1), 2: (0, 0, 1), 3: (0, 0, 1)}


def magic_square_game() -> GameSpec:
    def win(st, ab):
        s, t = st
        a, b = ab
        return sum(a) % 2 == 0 and sum(b) % 2 == 1 and a[t - 1] == b[s - 1]

    triples = tuple(itertools.product((0, 1), repeat=3))
    return GameSpec(
        "magic-square",
        ((1, 2, 3), (1, 2, 3)),
        (triples, triples),
        lambda st: True,
        win,
        {st: Fraction(1, 9) for st in itertools.product((1, 2, 3), repeat=2)},
    )


def pauli_observable(label: str) -> np.ndarray:
    return tensor(PAULIS[label[0]], PAULIS[label[1]])


def _pm_bit(obs: np.ndarray) -> ProjectiveMeasurement:
    return ProjectiveMeasurement.from_observable(obs, {1: 0, -1: 1})


def magic_square_state() -> StateVector:
    """Two singlets: pair 1 on qubits (0, 2), pair 2 on qubits (1, 3).

    Alice owns qubits 0 and 1, Bob owns 2 and 3.
    """
    singlet = StateVector(np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2))
    pairs = tensor(singlet, singlet)  # order A1 B1 A2 B2
    return permute_qubits(pairs, [0, 2, 1, 3])


def magic_square_quantum() -> QuantumStrategy:
    alice = {s: tuple(_pm_bit(pauli_observable(MAGIC_TABLE[s - 1][k])) for k in range(3)) for s in (1, 2, 3)}
    bob = {t: tuple(_pm_bit(pauli_observable(MAGIC_TABLE[k][t - 1])) for k in range(3)) for t in (1, 2, 3)}
    return QuantumStrategy(
        magic_square_state(),
        ((0, 1), (2, 3)),
        (alice, bob),
        description="row/column Pauli observables on two singlets, measured left to right",
    )


# ---------------------------------------------------------------------------
# Tsirelson


def _check_pm1(obs: np.ndarray, name: str) -> np.ndarray:
    obs = np.asarray(obs, dtype=complex)
    if not is_hermitian(obs) or not np.allclose(obs @ obs, np.eye(obs.shape[0]), atol=ATOL, rtol=0):
        raise GameError(f"{name} is not a +-1-valued observable")
    return obs


def chsh_operator(a0, a1, b0, b1) -> np.ndarray:
    a0, a1 = _check_pm1(a0, "A0"), _check_pm1(a1, "A1")
    b0, b1 = _check_pm1(b0, "B0"), _check_pm1(b1, "B1")
    if a0.shape != a1.shape or b0.shape != b1.shape:
        raise GameError("each party's observables must share a dimension")
    return 0.25 * (np.kron(a0, b0) + np.kron(a0, b1) + np.kron(a1, b0) - np.kron(a1, b1))


def tsirelson_check(a0, a1, b0, b1) -> float:
    """Largest eigenvalue of the CHSH operator built from four +-1 observables."""
    return max_eigenvalue(chsh_operator(a0, a1, b0, b1))


TSIRELSON_BOUND = 1 / np.sqrt(2)
CHSH_QUANTUM_VALUE = float(np.cos(np.pi / 8) ** 2)


def saturating_observables() -> tuple:
    z, x = PAULIS["Z"], PAULIS["X"]
    return z, x, (z + x) / np.sqrt(2), (z - x) / np.sqrt(2)
