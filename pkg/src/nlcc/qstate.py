"""Dense state-vector core: states, gates, projective measurements, sampling.

Qubit 0 is the most significant bit of a basis index, so ``|01>`` is index 1
and a tensor product ``a (x) b`` puts ``a`` on the high-order qubits. When two
parties share a register, Alice holds the high qubits and Bob the low ones.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Any, Hashable, Sequence

import numpy as np

# Contract tolerance (norms, projector sums, hermiticity) and algebraic tolerance.
ATOL = 1e-9
ALG_TOL = 1e-12
MAX_QUBITS = 20
EXACT_EIG_DIM = 64


class QStateError(ValueError):
    """Raised on malformed states, operators or measurements."""


def _is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


def _log2_exact(k: int) -> int:
    if not _is_power_of_two(k):
        raise QStateError(f"dimension {k} is not a power of two")
    return k.bit_length() - 1


class StateVector:
    """Normalized complex amplitudes over ``2**q`` basis states (read-only)."""

    __slots__ = ("_amps", "qubit_count")

    def __init__(self, amplitudes: Any, normalize: bool = False):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        q = _log2_exact(amps.size)
        if q > MAX_QUBITS:
            raise QStateError(f"{q} qubits exceeds the cap of {MAX_QUBITS}")
        if not np.all(np.isfinite(amps)):
            raise QStateError("amplitudes must be finite")
        norm = np.linalg.norm(amps)
        if normalize:
            if norm < ALG_TOL:
                raise QStateError("cannot normalize the zero vector")
            amps = amps / norm
        elif abs(norm - 1.0) > ATOL:
            raise QStateError(f"state norm {norm!r} differs from 1")
        amps.setflags(write=False)
        self._amps = amps
        self.qubit_count = q

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amps

    @property
    def dim(self) -> int:
        return self._amps.size

    def probabilities(self) -> np.ndarray:
        return np.abs(self._amps) ** 2

    @classmethod
    def basis(cls, qubits: int, index: int) -> "StateVector":
        amps = np.zeros(2**qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "StateVector":
        index = 0
        for b in bits:
            index = (index << 1) | int(b)
        return cls.basis(len(bits), index)

    @classmethod
    def uniform(cls, qubits: int) -> "StateVector":
        d = 2**qubits
        return cls(np.full(d, 1 / np.sqrt(d), dtype=complex))

    def __repr__(self) -> str:
        return f"StateVector(qubits={self.qubit_count})"


# ---------------------------------------------------------------------------
# Standard operators

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


def rotation(theta: float) -> np.ndarray:
    """Real rotation R(theta) = [[cos, -sin], [sin, cos]]."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def hadamard_all(qubits: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for _ in range(qubits):
        out = np.kron(out, H)
    return out


def phase_diagonal(bits: Sequence[int]) -> np.ndarray:
    """Diagonal of |i> -> (-1)^{bits[i]} |i>."""
    return np.where(np.asarray(bits, dtype=int) % 2 == 1, -1.0, 1.0).astype(complex)


def is_unitary(u: np.ndarray, tol: float = ATOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(
        u.conj().T @ u, np.eye(u.shape[0]), atol=tol, rtol=0
    )


def is_hermitian(h: np.ndarray, tol: float = ATOL) -> bool:
    h = np.asarray(h)
    return h.ndim == 2 and h.shape[0] == h.shape[1] and np.allclose(h, h.conj().T, atol=tol, rtol=0)


def tensor(a, b):
    """Kronecker product of two states or two operators; ``a`` is high-order."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, StateVector) or isinstance(b, StateVector):
        raise QStateError("tensor operands must both be states or both be operators")
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def tensor_all(*factors):
    out = factors[0]
    for f in factors[1:]:
        out = tensor(out, f)
    return out


def _check_targets(targets: Sequence[int], q: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise QStateError(f"duplicate target index in {targets}")
    for t in targets:
        if not 0 <= t < q:
            raise QStateError(f"target {t} out of range for {q} qubits")
    return targets


def _embed_matrix(op: np.ndarray, amps: np.ndarray, q: int, targets: Sequence[int]) -> np.ndarray:
    """Apply ``op`` (dim 2**k) to qubits ``targets`` of a flat amplitude array."""
    k = len(targets)
    if op.shape != (2**k, 2**k):
        raise QStateError(f"operator of shape {op.shape} does not act on {k} qubits")
    if k == q and list(targets) == list(range(q)):
        return op @ amps
    psi = amps.reshape((2,) * q)
    rest = [i for i in range(q) if i not in targets]
    psi = np.transpose(psi, list(targets) + rest).reshape(2**k, -1)
    psi = op @ psi
    psi = psi.reshape((2,) * q)
    return np.transpose(psi, np.argsort(list(targets) + rest)).reshape(-1)


def apply(u: np.ndarray, s: StateVector, targets: Sequence[int] | None = None) -> StateVector:
    """Apply unitary ``u`` to the qubits ``targets`` (all qubits if omitted)."""
    u = np.asarray(u, dtype=complex)
    targets = list(range(s.qubit_count)) if targets is None else _check_targets(targets, s.qubit_count)
    if u.shape != (2 ** len(targets),) * 2:
        raise QStateError(
            f"operator dimension {u.shape[0]} does not match {len(targets)} target qubits"
        )
    return StateVector(_embed_matrix(u, s.amplitudes, s.qubit_count, targets))


def apply_diagonal(diag: Sequence[complex], s: StateVector, targets: Sequence[int] | None = None) -> StateVector:
    """Apply a diagonal unitary given by its diagonal entries."""
    diag = np.asarray(diag, dtype=complex)
    if not np.allclose(np.abs(diag), 1.0, atol=ATOL, rtol=0):
        raise QStateError("diagonal operator is not unitary")
    targets = list(range(s.qubit_count)) if targets is None else _check_targets(targets, s.qubit_count)
    if diag.size != 2 ** len(targets):
        raise QStateError("diagonal length does not match target qubits")
    if len(targets) == s.qubit_count and targets == sorted(targets):
        return StateVector(s.amplitudes * diag)
    q = s.qubit_count
    rest = [i for i in range(q) if i not in targets]
    psi = np.transpose(s.amplitudes.reshape((2,) * q), targets + rest).reshape(diag.size, -1)
    psi = (psi * diag[:, None]).reshape((2,) * q)
    return StateVector(np.transpose(psi, np.argsort(targets + rest)).reshape(-1))


def permute_qubits(s: StateVector, order: Sequence[int]) -> StateVector:
    """Reorder qubits: new qubit ``k`` is old qubit ``order[k]``."""
    order = _check_targets(order, s.qubit_count)
    if len(order) != s.qubit_count:
        raise QStateError("permutation must mention every qubit")
    psi = s.amplitudes.reshape((2,) * s.qubit_count)
    return StateVector(np.transpose(psi, order).reshape(-1))


def inner(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.dim != b.dim:
        raise QStateError(f"dimension mismatch {a.dim} vs {b.dim}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


# ---------------------------------------------------------------------------
# Measurements


@dataclass(frozen=True)
class ProjectiveMeasurement:
    projectors: tuple
    outcome_labels: tuple

    def __post_init__(self):
        if len(self.projectors) != len(self.outcome_labels):
            raise QStateError("one label per projector required")
        if not self.projectors:
            raise QStateError("measurement needs at least one projector")
        projs = tuple(np.asarray(p, dtype=complex) for p in self.projectors)
        d = projs[0].shape[0]
        total = np.zeros((d, d), dtype=complex)
        for p in projs:
            if p.shape != (d, d):
                raise QStateError("projectors must share one square shape")
            if not np.allclose(p @ p, p, atol=ATOL, rtol=0) or not is_hermitian(p):
                raise QStateError("operator is not an orthogonal projector")
            total += p
        if not np.allclose(total, np.eye(d), atol=ATOL, rtol=0):
            raise QStateError("projectors do not sum to the identity")
        object.__setattr__(self, "projectors", projs)
        object.__setattr__(self, "outcome_labels", tuple(self.outcome_labels))

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @classmethod
    def computational(cls, qubits: int, labels: Sequence[Hashable] | None = None) -> "ProjectiveMeasurement":
        d = 2**qubits
        projs = []
        for k in range(d):
            p = np.zeros((d, d), dtype=complex)
            p[k, k] = 1
            projs.append(p)
        return cls(tuple(projs), tuple(range(d)) if labels is None else tuple(labels))

    @classmethod
    def from_basis(cls, basis: np.ndarray, labels: Sequence[Hashable] | None = None) -> "ProjectiveMeasurement":
        """Rank-one projectors onto the columns of a unitary ``basis``."""
        basis = np.asarray(basis, dtype=complex)
        if not is_unitary(basis):
            raise QStateError("basis matrix is not unitary")
        projs = tuple(np.outer(basis[:, k], basis[:, k].conj()) for k in range(basis.shape[1]))
        return cls(projs, tuple(range(basis.shape[1])) if labels is None else tuple(labels))

    @classmethod
    def from_observable(cls, obs: np.ndarray, label_map: dict | None = None) -> "ProjectiveMeasurement":
        """Eigenspace projectors of a Hermitian observable, labelled by eigenvalue.

        ``label_map`` relabels rounded eigenvalues, e.g. ``{1: 0, -1: 1}``.
        """
        obs = np.asarray(obs, dtype=complex)
        if not is_hermitian(obs):
            raise QStateError("observable is not Hermitian")
        vals, vecs = np.linalg.eigh(obs)
        groups: list[tuple[float, list[int]]] = []
        for k, v in enumerate(vals):
            if groups and abs(groups[-1][0] - v) < 1e-6:
                groups[-1][1].append(k)
            else:
                groups.append((float(v), [k]))
        projs, labels = [], []
        for val, idx in sorted(groups, key=lambda g: -g[0]):
            vec = vecs[:, idx]
            projs.append(vec @ vec.conj().T)
            key = int(round(val)) if abs(val - round(val)) < 1e-6 else round(val, 9)
            labels.append(label_map[key] if label_map is not None else key)
        return cls(tuple(projs), tuple(labels))


@dataclass(frozen=True)
class Outcome:
    label: Hashable
    probability: float
    state: StateVector | None


class OutcomeDistribution(tuple):
    """Tuple of :class:`Outcome` entries; probabilities sum to one."""

    def probability_of(self, label) -> float:
        return sum(o.probability for o in self if o.label == label)

    def as_dict(self) -> dict:
        out: dict = {}
        for o in self:
            out[o.label] = out.get(o.label, 0.0) + o.probability
        return out


def measure(s: StateVector, m: ProjectiveMeasurement, targets: Sequence[int] | None = None) -> OutcomeDistribution:
    targets = list(range(s.qubit_count)) if targets is None else _check_targets(targets, s.qubit_count)
    if m.dim != 2 ** len(targets):
        raise QStateError(f"measurement of dimension {m.dim} does not fit {len(targets)} qubits")
    entries = []
    for proj, label in zip(m.projectors, m.outcome_labels):
        projected = _embed_matrix(proj, s.amplitudes, s.qubit_count, targets)
        prob = float(np.vdot(projected, projected).real)
        post = StateVector(projected, normalize=True) if prob > ALG_TOL else None
        entries.append(Outcome(label, prob, post))
    total = sum(e.probability for e in entries)
    if abs(total - 1.0) > ATOL:
        raise QStateError(f"outcome probabilities sum to {total}")
    return OutcomeDistribution(entries)


def measure_computational(s: StateVector, targets: Sequence[int] | None = None) -> OutcomeDistribution:
    """Computational-basis measurement of ``targets``; labels are integers (first target high)."""
    q = s.qubit_count
    targets = list(range(q)) if targets is None else _check_targets(targets, q)
    k = len(targets)
    rest = [i for i in range(q) if i not in targets]
    psi = np.transpose(s.amplitudes.reshape((2,) * q), targets + rest).reshape(2**k, -1)
    probs = np.sum(np.abs(psi) ** 2, axis=1)
    inv = np.argsort(targets + rest)
    entries = []
    for label in range(2**k):
        prob = float(probs[label])
        post = None
        if prob > ALG_TOL:
            proj = np.zeros_like(psi)
            proj[label] = psi[label]
            flat = np.transpose(proj.reshape((2,) * q), inv).reshape(-1)
            post = StateVector(flat, normalize=True)
        entries.append(Outcome(label, prob, post))
    return OutcomeDistribution(entries)


def marginal_probabilities(s: StateVector, targets: Sequence[int]) -> np.ndarray:
    """Born probabilities of the computational basis on ``targets`` (no post-states)."""
    q = s.qubit_count
    targets = _check_targets(targets, q)
    rest = [i for i in range(q) if i not in targets]
    psi = np.transpose(s.amplitudes.reshape((2,) * q), targets + rest).reshape(2 ** len(targets), -1)
    return np.sum(np.abs(psi) ** 2, axis=1)


def hadamard_on(s: StateVector, targets: Sequence[int]) -> StateVector:
    for t in targets:
        s = apply(H, s, [t])
    return s


# ---------------------------------------------------------------------------
# Randomness


def derive_seed(seed: int, *labels: Hashable) -> int:
    """64-bit seed derived from ``seed`` and arbitrary labels by hashing."""
    h = hashlib.blake2b(digest_size=8)
    h.update(repr((int(seed) & 0xFFFFFFFFFFFFFFFF,) + tuple(labels)).encode())
    return int.from_bytes(h.digest(), "little")


class SeededRng:
    """Counter-based (Philox) generator; identical seeds give identical streams."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def split(self, *labels: Hashable) -> "SeededRng":
        """Independent child stream, e.g. ``rng.split("alice", trial)``."""
        return SeededRng(derive_seed(self.seed, *labels))

    def random(self) -> float:
        return float(self._gen.random())

    def bit(self) -> int:
        return int(self._gen.integers(0, 2))

    def bits(self, n: int) -> tuple[int, ...]:
        return tuple(int(b) for b in self._gen.integers(0, 2, size=n))

    def integer(self, low: int, high: int) -> int:
        """Uniform integer in ``[low, high)``."""
        return int(self._gen.integers(low, high))

    def sample_without_replacement(self, population: int, k: int) -> list[int]:
        return [int(i) for i in self._gen.permutation(population)[:k]]

    def choice_index(self, probabilities: Sequence[float]) -> int:
        p = np.asarray(probabilities, dtype=float)
        p = np.where((p < 0) & (p >= -ALG_TOL), 0.0, p)
        if np.any(p < 0):
            raise QStateError("negative probability")
        cdf = np.cumsum(p)
        u = self.random() * cdf[-1]
        return int(min(np.searchsorted(cdf, u, side="right"), len(p) - 1))

    def normal(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def sample(d: OutcomeDistribution, rng: SeededRng) -> tuple[Hashable, StateVector | None]:
    k = rng.choice_index([o.probability for o in d])
    return d[k].label, d[k].state


# ---------------------------------------------------------------------------
# Spectra


def max_eigenvalue(h: np.ndarray, max_iters: int = 200_000) -> float:
    """Largest eigenvalue of a Hermitian matrix.

    Exact diagonalization up to dimension 64; shifted power iteration above.
    """
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise QStateError("max_eigenvalue needs a Hermitian operator")
    d = h.shape[0]
    if d <= EXACT_EIG_DIM:
        return float(np.linalg.eigvalsh(h)[-1])
    # Shift by a bound on the spectral radius so the top eigenvalue dominates.
    shift = float(np.max(np.sum(np.abs(h), axis=1)))
    a = h + shift * np.eye(d)
    v = np.ones(d, dtype=complex) / np.sqrt(d)
    v = v + 1e-3 * np.exp(1j * np.arange(d))
    v /= np.linalg.norm(v)
    lam = float(np.vdot(v, h @ v).real)
    for _ in range(max_iters):
        w = a @ v
        v = w / np.linalg.norm(w)
        hv = h @ v
        new = float(np.vdot(v, hv).real)
        resid = np.linalg.norm(hv - new * v)
        if abs(new - lam) < 1e-15 and resid < 1e-7:
            return new
        lam = new
    return lam


def random_unitary(d: int, rng: SeededRng) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    g = rng.normal((d, d)) + 1j * rng.normal((d, d))
    qmat, r = np.linalg.qr(g)
    return qmat * (np.diag(r) / np.abs(np.diag(r)))


def random_pm1_observable(d: int, rng: SeededRng) -> np.ndarray:
    """Random Hermitian observable whose eigenvalues are all +1 or -1."""
    u = random_unitary(d, rng)
    signs = np.array([1.0 if rng.bit() else -1.0 for _ in range(d)])
    obs = (u * signs) @ u.conj().T
    return (obs + obs.conj().T) / 2
