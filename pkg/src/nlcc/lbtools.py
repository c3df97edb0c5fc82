"""Lower-bound tooling: communication matrices, exact rank, discrepancy, Lindsey and Nayak checks.

Inputs x, y in {0,1}^n are encoded as integers 0..2^n - 1 with x_1 the most
significant bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .qstate import ATOL, SeededRng, random_unitary

MAX_COMM_N = 12
MAX_RANK_N = 10
MAX_EXACT_DISCREPANCY_N = 3


class LowerBoundError(ValueError):
    pass


def _popparity(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    while np.any(v):
        out ^= v & 1
        v = v >> 1
    return out


def _parity_table(n: int) -> np.ndarray:
    return _popparity(np.arange(2**n, dtype=np.int64))


# Standard functions on integer-encoded inputs.
def eq_fn(x: int, y: int) -> int:
    return int(x == y)


def ip_fn(x: int, y: int) -> int:
    return bin(x & y).count("1") & 1


def comm_matrix(f: Callable[[int, int], int], n: int) -> np.ndarray:
    """M[x, y] = f(x, y) over {0,1}^n x {0,1}^n."""
    if n > MAX_COMM_N:
        raise LowerBoundError(f"n = {n} exceeds {MAX_COMM_N}")
    d = 2**n
    return np.array([[int(f(x, y)) for y in range(d)] for x in range(d)], dtype=np.int64)


def ip_sign_matrix(n: int) -> np.ndarray:
    """(-1)^{x.y} as an integer matrix."""
    idx = np.arange(2**n)
    return 1 - 2 * _popparity(idx[:, None] & idx[None, :])


def rank_exact(m) -> int:
    """Rank over the rationals by fraction Gaussian elimination."""
    rows = [[Fraction(int(v)) if not isinstance(v, Fraction) else v for v in row] for row in np.asarray(m, dtype=object)]
    if rows and len(rows) > 2**MAX_RANK_N:
        raise LowerBoundError("matrix too large for exact rank")
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        piv = next((r for r in range(rank, len(rows)) if rows[r][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        p = rows[rank]
        for r in range(rank + 1, len(rows)):
            if rows[r][c] != 0:
                factor = rows[r][c] / p[c]
                rows[r] = [a - factor * b if b != 0 else a for a, b in zip(rows[r], p)]
        rank += 1
    return rank


# ---------------------------------------------------------------------------
# Rectangles and discrepancy


@dataclass(frozen=True)
class Rectangle:
    """A x B with A, B given as bitmasks over {0,1}^n (bit x set iff x in the set)."""

    a_mask: int
    b_mask: int
    n: int

    def __post_init__(self):
        full = (1 << 2**self.n) - 1
        if not (0 <= self.a_mask <= full and 0 <= self.b_mask <= full):
            raise LowerBoundError("subset mask outside {0,1}^n")

    @property
    def rows(self) -> list[int]:
        return [x for x in range(2**self.n) if self.a_mask >> x & 1]

    @property
    def cols(self) -> list[int]:
        return [y for y in range(2**self.n) if self.b_mask >> y & 1]

    def to_json(self) -> dict:
        return {"A": self.rows, "B": self.cols, "n": self.n}


def rectangle_bias(signed: np.ndarray, rect: Rectangle) -> float:
    """|mu(R and f=1) - mu(R and f=0)| given signed[x, y] = mu(x, y)(-1)^{f(x, y) + 1}."""
    return abs(float(signed[np.ix_(rect.rows, rect.cols)].sum())) if rect.rows and rect.cols else 0.0


@dataclass
class DiscrepancyResult:
    value: float
    witness: Rectangle
    mode: str  # "exact" or "sampled (lower bound)"
    rectangles_examined: int

    def to_json(self) -> dict:
        return {"value": self.value, "witness": self.witness.to_json(), "mode": self.mode,
                "rectangles_examined": self.rectangles_examined}


def _signed(f, mu, n) -> np.ndarray:
    m = comm_matrix(f, n)
    d = 2**n
    mu = np.full((d, d), 1 / d**2) if mu is None else np.asarray(mu, dtype=float)
    if mu.shape != (d, d) or np.any(mu < 0) or abs(mu.sum() - 1) > ATOL:
        raise LowerBoundError("mu must be a probability distribution on the 2^n x 2^n grid")
    return mu * (2 * m - 1)


def discrepancy(f, n: int, mu=None, mode: str = "exact", samples: int = 2000,
                rng: SeededRng | None = None) -> DiscrepancyResult:
    """max over rectangles of |mu(R and f^-1(1)) - mu(R and f^-1(0))|.

    Exact mode scores every pair (A, B) of subsets at once as the bilinear
    form mask_A . signed . mask_B. Sampled mode returns a lower bound from
    random rows plus alternating best responses.
    """
    signed = _signed(f, mu, n)
    d = 2**n
    if mode == "exact":
        if n > MAX_EXACT_DISCREPANCY_N:
            raise LowerBoundError(f"exact discrepancy needs n <= {MAX_EXACT_DISCREPANCY_N}")
        # Row k of ``masks`` is the indicator vector of the subset with bitmask k.
        masks = ((np.arange(2**d)[:, None] >> np.arange(d)[None, :]) & 1).astype(float)
        biases = np.abs(masks @ signed @ masks.T)
        ai, bi = np.unravel_index(int(np.argmax(biases)), biases.shape)
        return DiscrepancyResult(float(biases[ai, bi]), Rectangle(int(ai), int(bi), n), "exact", biases.size)
    if mode != "sampled":
        raise LowerBoundError(f"unknown mode {mode!r}")
    rng = rng or SeededRng(0)
    best, witness = 0.0, Rectangle(0, 0, n)
    for s in range(samples):
        a = np.array(rng.bits(d), dtype=float)
        for _ in range(2 * d):  # alternate best responses
            cs = a @ signed
            b = (cs > 0).astype(float) if cs[cs > 0].sum() >= -cs[cs < 0].sum() else (cs < 0).astype(float)
            rs = signed @ b
            a_new = (rs > 0).astype(float) if rs[rs > 0].sum() >= -rs[rs < 0].sum() else (rs < 0).astype(float)
            if np.array_equal(a_new, a):
                break
            a = a_new
        val = abs(float(a @ signed @ b))
        if val > best + 1e-15:
            best = val
            witness = Rectangle(sum(1 << x for x in range(d) if a[x]), sum(1 << y for y in range(d) if b[y]), n)
    return DiscrepancyResult(best, witness, "sampled (lower bound)", samples)


def discrepancy_cost_bound(eps: float, delta: float) -> float:
    """Communication lower bound log2(2 eps / delta) for advantage eps over 1/2."""
    if delta <= 0:
        return math.inf
    return math.log2(2 * eps / delta)


# ---------------------------------------------------------------------------
# Lindsey's lemma


@dataclass
class CheckResult:
    lhs: float
    rhs: float
    passed: bool

    def to_json(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "passed": self.passed}


def lindsey_check(a: Sequence[int], b: Sequence[int], n: int) -> CheckResult:
    """|sum_{a in A, b in B} (-1)^{a.b}| <= sqrt(|A| |B| 2^n)."""
    if n > MAX_COMM_N:
        raise LowerBoundError(f"n = {n} exceeds {MAX_COMM_N}")
    a = np.asarray(sorted(set(a)), dtype=np.int64)
    b = np.asarray(sorted(set(b)), dtype=np.int64)
    if len(a) and (a.min() < 0 or a.max() >= 2**n) or len(b) and (b.min() < 0 or b.max() >= 2**n):
        raise LowerBoundError("elements outside {0,1}^n")
    signs = 1 - 2 * _parity_table(n)[a[:, None] & b[None, :]] if len(a) and len(b) else np.zeros(0)
    lhs = float(abs(signs.sum()))
    rhs = math.sqrt(len(a) * len(b) * 2**n)
    return CheckResult(lhs, rhs, lhs <= rhs + 1e-9)


def random_rectangle(n: int, rng: SeededRng) -> tuple[list[int], list[int]]:
    d = 2**n
    ka, kb = rng.integer(1, d + 1), rng.integer(1, d + 1)
    return rng.sample_without_replacement(d, ka), rng.sample_without_replacement(d, kb)


# ---------------------------------------------------------------------------
# Nayak's bound


def is_density(rho: np.ndarray, tol: float = ATOL) -> bool:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or not np.allclose(rho, rho.conj().T, atol=tol):
        return False
    return abs(np.trace(rho) - 1) <= tol and np.linalg.eigvalsh(rho).min() >= -tol


def nayak_check(encodings: Sequence[np.ndarray], decoders: Sequence[np.ndarray], d: int) -> CheckResult:
    """Average decoding success (1/2^n) sum_x Tr(E_x rho_x) against d / 2^n."""
    k = len(encodings)
    if k == 0 or k & (k - 1) or len(decoders) != k:
        raise LowerBoundError("need 2^n encodings and as many decoder elements")
    for rho in encodings:
        if np.shape(rho) != (d, d) or not is_density(rho):
            raise LowerBoundError("encoding is not a d x d density matrix")
    total = np.zeros((d, d), dtype=complex)
    for e in decoders:
        e = np.asarray(e)
        if e.shape != (d, d) or not np.allclose(e, e.conj().T, atol=ATOL) or np.linalg.eigvalsh(e).min() < -ATOL:
            raise LowerBoundError("decoder element is not a positive operator")
        total += e
    if not np.allclose(total, np.eye(d), atol=ATOL):
        raise LowerBoundError("decoder elements do not sum to the identity")
    avg = float(np.mean([np.trace(e @ r).real for e, r in zip(decoders, encodings)]))
    bound = d / k
    return CheckResult(avg, bound, avg <= bound + 1e-9)


def random_density(d: int, rng: SeededRng, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    g = rng.normal((d, rank)) + 1j * rng.normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_povm(d: int, k: int, rng: SeededRng) -> list[np.ndarray]:
    """k positive operators summing to I: G_i = S^-1/2 A_i S^-1/2 with S = sum A_i."""
    parts = []
    for _ in range(k):
        g = rng.normal((d, d)) + 1j * rng.normal((d, d))
        parts.append(g @ g.conj().T)
    s = sum(parts)
    w, v = np.linalg.eigh(s)
    inv_sqrt = v @ np.diag(w ** -0.5) @ v.conj().T
    return [inv_sqrt @ a @ inv_sqrt for a in parts]


def random_projective_decoder(d: int, k: int, rng: SeededRng) -> list[np.ndarray]:
    """Rank-one projectors of a random basis assigned to the first d of k labels; the rest are zero."""
    u = random_unitary(d, rng)
    out = [np.outer(u[:, i], u[:, i].conj()) for i in range(min(d, k))]
    out += [np.zeros((d, d), dtype=complex)] * (k - len(out))
    if k < d:
        out[-1] = out[-1] + sum(np.outer(u[:, i], u[:, i].conj()) for i in range(k, d))
    return out
