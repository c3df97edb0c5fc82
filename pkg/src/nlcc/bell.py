"""Bell expressions, XOR games and their LHV / quantum / no-signalling values.

Correlation tables and Bell coefficients are arrays indexed ``[x, y, a, b]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .games import GameSpec, QuantumStrategy
from .qstate import ATOL, ALG_TOL, SeededRng

MAX_LHV_SPACE = 10**8


class BellError(ValueError):
    pass


class CorrelationTable:
    """P(a,b|x,y) as an array ``[x, y, a, b]``; float or exact (Fraction object) entries."""

    def __init__(self, probs, input_labels=None, output_labels=None, check: bool = True):
        arr = np.array(probs, dtype=object if _has_fractions(probs) else float)
        if arr.ndim != 4:
            raise BellError("correlation table must be 4-dimensional [x, y, a, b]")
        self.probs = arr
        nx, ny, na, nb = arr.shape
        self.input_labels = input_labels or (tuple(range(nx)), tuple(range(ny)))
        self.output_labels = output_labels or (tuple(range(na)), tuple(range(nb)))
        if check:
            if any(float(v) < -ALG_TOL for v in arr.reshape(-1)):
                raise BellError("negative probability in table")
            sums = arr.sum(axis=(2, 3))
            for v in np.asarray(sums).reshape(-1):
                if abs(float(v) - 1.0) > ATOL:
                    raise BellError(f"table not normalized: an input pair sums to {v}")

    @property
    def shape(self) -> tuple:
        return self.probs.shape

    @property
    def exact(self) -> bool:
        return self.probs.dtype == object

    def to_json(self) -> dict:
        return {
            "index_order": ["x", "y", "a", "b"],
            "inputs": [list(map(_jsonable, l)) for l in self.input_labels],
            "outputs": [list(map(_jsonable, l)) for l in self.output_labels],
            "probabilities": [[[[float(v) for v in row] for row in m] for m in xs] for xs in self.probs.tolist()],
        }

    @classmethod
    def from_json(cls, data: dict) -> "CorrelationTable":
        return cls(np.array(data["probabilities"], dtype=float))

    def mix(self, other: "CorrelationTable", lam: float) -> "CorrelationTable":
        return CorrelationTable(lam * self.probs + (1 - lam) * other.probs)


def _has_fractions(obj) -> bool:
    from fractions import Fraction

    if isinstance(obj, np.ndarray):
        return obj.dtype == object
    if isinstance(obj, Fraction):
        return True
    if isinstance(obj, (list, tuple)) and obj:
        return _has_fractions(obj[0])
    return False


def _jsonable(v):
    return list(v) if isinstance(v, tuple) else v


@dataclass(frozen=True)
class BellExpression:
    coefficients: np.ndarray  # c[x, y, a, b]

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.ndim != 4 or not np.all(np.isfinite(c)):
            raise BellError("Bell coefficients must be a finite 4-d array")
        object.__setattr__(self, "coefficients", c)


@dataclass(frozen=True)
class XorGame:
    """Signed weights m[x, y] = w_xy (-1)^f(x,y)."""

    m: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.m, dtype=float))
        if not np.all(np.isfinite(m)):
            raise BellError("XOR weights must be finite")
        object.__setattr__(self, "m", m)

    def to_bell_expression(self) -> BellExpression:
        nx, ny = self.m.shape
        c = np.zeros((nx, ny, 2, 2))
        for a, b in itertools.product((0, 1), repeat=2):
            c[:, :, a, b] = self.m * (-1) ** (a ^ b)
        return BellExpression(c)


def chsh_xor() -> XorGame:
    return XorGame(np.array([[1.0, 1.0], [1.0, -1.0]]))


def chsh_expression() -> BellExpression:
    return chsh_xor().to_bell_expression()


def evaluate(expr: BellExpression, table: CorrelationTable):
    if expr.coefficients.shape != table.shape:
        raise BellError(f"shape mismatch {expr.coefficients.shape} vs {table.shape}")
    if table.exact:
        from fractions import Fraction

        c = expr.coefficients.reshape(-1)
        p = table.probs.reshape(-1)
        return sum((Fraction(float(ci)) * pi for ci, pi in zip(c, p)), Fraction(0))
    return float(np.sum(expr.coefficients * table.probs))


def lhv_value(expr: BellExpression) -> float:
    """max over deterministic a(x), b(y) of sum_xy c[x, y, a(x), b(y)]."""
    c = expr.coefficients
    nx, ny, na, nb = c.shape
    space = na**nx * nb**ny
    if space > MAX_LHV_SPACE:
        raise BellError(f"{space} deterministic strategies exceed {MAX_LHV_SPACE}")
    best = -np.inf
    # For fixed a(.), Bob's best response decouples over y.
    for a_fn in itertools.product(range(na), repeat=nx):
        per_y = sum(c[x, :, a_fn[x], :] for x in range(nx))  # shape (ny, nb)
        best = max(best, float(per_y.max(axis=1).sum()))
    return best


def ns_value_xor(g: XorGame) -> float:
    return float(np.abs(g.m).sum())


class XorQuantumResult(NamedTuple):
    value: float  # certified lower bound on the quantum value
    alpha: np.ndarray
    beta: np.ndarray
    iterations: int
    history: tuple


def _normalize_or_keep(v: np.ndarray, prev: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=1, keepdims=True)
    out = prev.copy()
    ok = n[:, 0] > ALG_TOL
    out[ok] = v[ok] / n[ok]
    return out


def _seesaw(m: np.ndarray, beta: np.ndarray, max_iters: int, tol: float):
    alpha = _normalize_or_keep(m @ beta, np.eye(m.shape[0], beta.shape[1]))
    value = float(np.sum(m * (alpha @ beta.T)))
    history = [value]
    it = 0
    for it in range(1, max_iters + 1):
        beta = _normalize_or_keep(m.T @ alpha, beta)
        alpha = _normalize_or_keep(m @ beta, alpha)
        new = float(np.sum(m * (alpha @ beta.T)))
        history.append(new)
        if new - value < tol:
            break
        value = new
    value = float(np.sum(m * (alpha @ beta.T)))
    return value, alpha, beta, it, history


def qm_value_xor(
    g: XorGame,
    dim: int | None = None,
    max_iters: int = 1000,
    tol: float = 1e-13,
    seed: int = 0,
    restarts: int = 8,
) -> XorQuantumResult:
    """Seesaw lower bound on sum_xy m_xy alpha(x).beta(y) over real unit vectors.

    Each half-step sets one side's vectors to the normalized optimal response,
    so the objective never decreases. The best of ``restarts`` random starts is kept.
    """
    m = g.m
    nx, ny = m.shape
    dim = min(nx + ny, 8) if dim is None else dim
    if dim < 2:
        raise BellError("vector dimension must be at least 2")
    best = None
    master = SeededRng(seed)
    for r in range(restarts):
        rng = master.split("restart", r)
        beta = rng.normal((ny, dim))
        beta /= np.linalg.norm(beta, axis=1, keepdims=True)
        res = _seesaw(m, beta, max_iters, tol)
        if best is None or res[0] > best[0] + 1e-15:
            best = res
    value, alpha, beta, it, history = best
    return XorQuantumResult(value, alpha, beta, it, tuple(history))


@dataclass
class NoSignallingReport:
    alice_deviation: float
    bob_deviation: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "alice_deviation": float(self.alice_deviation),
            "bob_deviation": float(self.bob_deviation),
            "passed": self.passed,
        }


def no_signalling_check(table: CorrelationTable, tol: float = ATOL) -> NoSignallingReport:
    """Largest change of a party's marginal when the other party's input changes."""
    p = table.probs
    pa = p.sum(axis=3)  # [x, y, a]
    pb = p.sum(axis=2)  # [x, y, b]
    nx, ny = p.shape[:2]
    dev_a = max(
        (abs(pa[x, y, a] - pa[x, y2, a]) for x in range(nx) for a in range(p.shape[2])
         for y in range(ny) for y2 in range(ny)),
        default=0,
    )
    dev_b = max(
        (abs(pb[x, y, b] - pb[x2, y, b]) for y in range(ny) for b in range(p.shape[3])
         for x in range(nx) for x2 in range(nx)),
        default=0,
    )
    passed = float(dev_a) < tol and float(dev_b) < tol
    return NoSignallingReport(dev_a, dev_b, passed)


def correlation_from_quantum(strategy: QuantumStrategy, game: GameSpec) -> CorrelationTable:
    """Exact Born-rule table for a two-party strategy over the game's alphabets."""
    if strategy.parties != 2 or game.parties != 2:
        raise BellError("correlation tables need exactly two parties")
    xs, ys = game.input_alphabets
    as_, bs = game.output_alphabets
    probs = np.zeros((len(xs), len(ys), len(as_), len(bs)))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            for (a, b), pr in strategy.joint_distribution((x, y)).items():
                probs[i, j, as_.index(a), bs.index(b)] += pr
    return CorrelationTable(probs, (tuple(xs), tuple(ys)), (tuple(as_), tuple(bs)))


def table_from_function(fn, shape) -> CorrelationTable:
    """Build a table from ``fn(x, y, a, b)``."""
    nx, ny, na, nb = shape
    probs = [[[[fn(x, y, a, b) for b in range(nb)] for a in range(na)] for y in range(ny)] for x in range(nx)]
    return CorrelationTable(probs)
