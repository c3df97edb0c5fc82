"""Inefficient detectors: protocol-to-LHV conversion, asymmetric one-way simulation, LP feasibility.

A response of ``None`` (``NO_CLICK``) means the party's detector gave no output.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from .bell import CorrelationTable
from .qstate import SeededRng

NO_CLICK = None
CHSH_EFFICIENCY_THRESHOLD = 2 / (math.sqrt(2) + 1)


class DetectError(ValueError):
    pass


class IncompleteCatalog(DetectError):
    pass


class AlphabetTooLarge(DetectError):
    pass


# ---------------------------------------------------------------------------
# LHV models


@dataclass
class LHVModel:
    """Finite hidden variable with weights and deterministic responses (output or NO_CLICK)."""

    support: tuple
    weights: tuple
    alice: Callable[[Any, Any], Any]
    bob: Callable[[Any, Any], Any]
    x_inputs: tuple
    y_inputs: tuple
    a_outputs: tuple = (0, 1)
    b_outputs: tuple = (0, 1)

    def __post_init__(self):
        if len(self.support) != len(self.weights) or not self.support:
            raise DetectError("support and weights must be non-empty and of equal length")
        if any(w < 0 for w in self.weights):
            raise DetectError("negative hidden-variable weight")
        if abs(float(sum(self.weights)) - 1) > 1e-9:
            raise DetectError("hidden-variable weights do not sum to 1")
        for lam in self.support:
            for x in self.x_inputs:
                if self.alice(lam, x) not in self.a_outputs + (NO_CLICK,):
                    raise DetectError(f"Alice's response at {lam!r}, {x!r} is outside her alphabet")
            for y in self.y_inputs:
                if self.bob(lam, y) not in self.b_outputs + (NO_CLICK,):
                    raise DetectError(f"Bob's response at {lam!r}, {y!r} is outside his alphabet")

    def joint(self, x, y) -> dict:
        """P(a, b | x, y) including NO_CLICK outcomes."""
        out: dict = {}
        for lam, w in zip(self.support, self.weights):
            key = (self.alice(lam, x), self.bob(lam, y))
            out[key] = out.get(key, 0) + w
        return out

    def click_probability(self, party: str, inp) -> Any:
        resp = self.alice if party == "alice" else self.bob
        return sum((w for lam, w in zip(self.support, self.weights) if resp(lam, inp) is not NO_CLICK), 0)

    def both_click_probability(self, x, y):
        return sum((p for (a, b), p in self.joint(x, y).items() if a is not NO_CLICK and b is not NO_CLICK), 0)

    def conditional(self, x, y) -> dict:
        """Outputs conditioned on both detectors clicking."""
        joint = self.joint(x, y)
        total = self.both_click_probability(x, y)
        if total == 0:
            raise DetectError(f"no joint click at inputs {x!r}, {y!r}")
        return {k: p / total for k, p in joint.items() if k[0] is not NO_CLICK and k[1] is not NO_CLICK}


@dataclass
class EfficiencyReport:
    click_probabilities: dict
    conditional_table: dict
    distance: float
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "click_probabilities": {str(k): float(v) for k, v in self.click_probabilities.items()},
            "conditional_table": {str(k): {str(o): float(p) for o, p in v.items()}
                                  for k, v in self.conditional_table.items()},
            "distance": float(self.distance),
            "details": {k: (float(v) if isinstance(v, (Fraction, np.floating)) else v)
                        for k, v in self.details.items()},
        }


# ---------------------------------------------------------------------------
# Deterministic protocols and their conversation catalogs


@dataclass(frozen=True)
class Round:
    sender: str  # "alice" or "bob"
    nbits: int
    message: Callable[[Any, tuple], tuple]  # (own input, bits so far) -> nbits bits


@dataclass(frozen=True)
class DeterministicProtocol:
    rounds: tuple
    alice_output: Callable[[Any, tuple], int]
    bob_output: Callable[[Any, tuple], int]
    x_inputs: tuple
    y_inputs: tuple

    @property
    def cost(self) -> int:
        return sum(r.nbits for r in self.rounds)

    def run(self, x, y) -> tuple[tuple, int, int]:
        bits: tuple = ()
        for r in self.rounds:
            msg = tuple(r.message(x if r.sender == "alice" else y, bits))
            if len(msg) != r.nbits:
                raise DetectError(f"round sent {len(msg)} bits, expected {r.nbits}")
            bits += msg
        return bits, self.alice_output(x, bits), self.bob_output(y, bits)

    def consistent(self, party: str, inp, conversation: tuple) -> bool:
        """Do the party's own messages in ``conversation`` match what it would send?"""
        pos = 0
        for r in self.rounds:
            if r.sender == party:
                if tuple(r.message(inp, conversation[:pos])) != conversation[pos:pos + r.nbits]:
                    return False
            pos += r.nbits
        return True


@dataclass(frozen=True)
class CatalogEntry:
    conversation: tuple
    alice_consistent: frozenset
    bob_consistent: frozenset


def conversation_catalog(protocol: DeterministicProtocol) -> tuple:
    """One entry per c-bit string, with the inputs of each party consistent with it."""
    out = []
    for conv in itertools.product((0, 1), repeat=protocol.cost):
        out.append(CatalogEntry(
            conv,
            frozenset(x for x in protocol.x_inputs if protocol.consistent("alice", x, conv)),
            frozenset(y for y in protocol.y_inputs if protocol.consistent("bob", y, conv)),
        ))
    return tuple(out)


def protocol_to_lhv(protocol: DeterministicProtocol, catalog: Sequence[CatalogEntry] | None = None) -> LHVModel:
    """Hidden variable uniform over all 2^c conversations; a party clicks iff consistent.

    Conditioned on both clicking, the only surviving conversation is the real
    one, so the protocol's outputs are reproduced; both click w.p. >= 2^-c.
    """
    c = protocol.cost
    catalog = conversation_catalog(protocol) if catalog is None else tuple(catalog)
    if len(catalog) != 2**c or len({e.conversation for e in catalog}) != 2**c:
        raise IncompleteCatalog(f"catalog has {len(catalog)} distinct entries, expected {2**c}")
    for x in protocol.x_inputs:
        for y in protocol.y_inputs:
            if not any(x in e.alice_consistent and y in e.bob_consistent for e in catalog):
                raise IncompleteCatalog(f"no conversation consistent with inputs {x!r}, {y!r}")
    entries = {e.conversation: e for e in catalog}

    def alice(conv, x):
        return protocol.alice_output(x, conv) if x in entries[conv].alice_consistent else NO_CLICK

    def bob(conv, y):
        return protocol.bob_output(y, conv) if y in entries[conv].bob_consistent else NO_CLICK

    support = tuple(e.conversation for e in catalog)
    weight = Fraction(1, 2**c)
    return LHVModel(support, (weight,) * len(support), alice, bob,
                    tuple(protocol.x_inputs), tuple(protocol.y_inputs))


# ---------------------------------------------------------------------------
# Asymmetric efficiency: LHV with lossy Alice -> one-way protocol


def instance_count(eta: float, eps: float) -> int:
    """k = ceil(ln eps / ln(1 - eta)), at least 1."""
    if not 0 < eta <= 1 or not 0 < eps < 1:
        raise DetectError("need eta in (0, 1] and eps in (0, 1)")
    if eta == 1:
        return 1
    k = math.log(eps) / math.log(1 - eta)
    return max(1, math.ceil(k - 1e-9))


def table_distance(p: dict, q: dict) -> float:
    """max over inputs of sum_ab |p(ab|xy) - q(ab|xy)|; both map (x, y) -> {(a, b): prob}."""
    worst = 0.0
    for key in set(p) | set(q):
        pk, qk = p.get(key, {}), q.get(key, {})
        worst = max(worst, sum(abs(float(pk.get(o, 0)) - float(qk.get(o, 0))) for o in set(pk) | set(qk)))
    return worst


def _table_dict(target) -> dict:
    if isinstance(target, CorrelationTable):
        xs, ys = target.input_labels
        as_, bs = target.output_labels
        return {(x, y): {(a, b): target.probs[i, j, k, l]
                         for k, a in enumerate(as_) for l, b in enumerate(bs)}
                for i, x in enumerate(xs) for j, y in enumerate(ys)}
    return target


def alice_efficiency(lhv: LHVModel):
    """Alice's click probability; it must not depend on x. Bob must always click."""
    etas = {x: lhv.click_probability("alice", x) for x in lhv.x_inputs}
    vals = list(etas.values())
    if any(abs(float(v) - float(vals[0])) > 1e-12 for v in vals):
        raise DetectError(f"Alice's click probability depends on her input: {etas}")
    for y in lhv.y_inputs:
        if abs(float(lhv.click_probability("bob", y)) - 1) > 1e-12:
            raise DetectError("Bob's detector must be perfect")
    return vals[0]


def lhv_error(lhv: LHVModel, target) -> float:
    """max_xy sum_ab |P_LHV(ab|xy)/eta - P_target(ab|xy)| over Alice-click events."""
    eta = alice_efficiency(lhv)
    target = _table_dict(target)
    scaled = {}
    for x in lhv.x_inputs:
        for y in lhv.y_inputs:
            scaled[(x, y)] = {k: p / eta for k, p in lhv.joint(x, y).items() if k[0] is not NO_CLICK}
    return table_distance(scaled, target)


@dataclass
class OneWayFromLHV:
    """k shared LHV instances; Alice sends the index of the first one where she clicks."""

    lhv: LHVModel
    k: int
    eta: Any

    @property
    def bits(self) -> int:
        return math.ceil(math.log2(self.k)) if self.k > 1 else 0

    def run(self, x, y, rng: SeededRng) -> tuple[int, int]:
        lams = [self.lhv.support[rng.choice_index([float(w) for w in self.lhv.weights])] for _ in range(self.k)]
        for lam in lams:
            a = self.lhv.alice(lam, x)
            if a is not NO_CLICK:
                return a, self.lhv.bob(lam, y)
        j = rng.integer(0, self.k)
        a = self.lhv.a_outputs[rng.integer(0, len(self.lhv.a_outputs))]
        return a, self.lhv.bob(lams[j], y)

    def exact_distribution(self) -> dict:
        """P_class(ab|xy) = (1 - (1-eta)^k) P(ab|xy, click) + (1-eta)^k P_fallback(ab|xy)."""
        eta = float(self.eta)
        miss = (1 - eta) ** self.k
        na = len(self.lhv.a_outputs)
        out = {}
        for x in self.lhv.x_inputs:
            for y in self.lhv.y_inputs:
                dist: dict = {}
                joint = self.lhv.joint(x, y)
                for (a, b), p in joint.items():
                    if a is not NO_CLICK:
                        dist[(a, b)] = dist.get((a, b), 0.0) + (1 - miss) * float(p) / eta
                    elif eta < 1:
                        for a2 in self.lhv.a_outputs:
                            dist[(a2, b)] = dist.get((a2, b), 0.0) + miss * float(p) / (1 - eta) / na
                out[(x, y)] = dist
        return out

    def sample_distribution(self, trials: int, rng: SeededRng) -> dict:
        """Empirical P_class with ``trials`` split evenly over input pairs (vectorized)."""
        lhv = self.lhv
        w = np.array([float(v) for v in lhv.weights])
        w = w / w.sum()
        code_a = {o: i for i, o in enumerate(lhv.a_outputs)}
        code_b = {o: i for i, o in enumerate(lhv.b_outputs)}
        pairs = [(x, y) for x in lhv.x_inputs for y in lhv.y_inputs]
        per = max(1, trials // len(pairs))
        out = {}
        for idx, (x, y) in enumerate(pairs):
            g = rng.split("pair", idx).generator
            A = np.array([-1 if lhv.alice(l, x) is NO_CLICK else code_a[lhv.alice(l, x)] for l in lhv.support])
            B = np.array([code_b[lhv.bob(l, y)] for l in lhv.support])
            lam = g.choice(len(w), size=(per, self.k), p=w)
            clicks = A[lam] >= 0
            hit = clicks.any(axis=1)
            first = np.argmax(clicks, axis=1)
            fallback_j = g.integers(0, self.k, size=per)
            fallback_a = g.integers(0, len(lhv.a_outputs), size=per)
            j = np.where(hit, first, fallback_j)
            chosen = lam[np.arange(per), j]
            a = np.where(hit, A[chosen], fallback_a)
            b = B[chosen]
            counts = np.zeros((len(lhv.a_outputs), len(lhv.b_outputs)))
            np.add.at(counts, (a, b), 1)
            out[(x, y)] = {(ao, bo): counts[i, k] / per
                           for ao, i in code_a.items() for bo, k in code_b.items()}
        return out


def asym_lhv_to_oneway(lhv: LHVModel, eps: float, target=None, trials: int = 0,
                       rng: SeededRng | None = None) -> tuple[OneWayFromLHV, EfficiencyReport]:
    """Build the k-instance one-way protocol and measure its distance to ``target``.

    ``target`` defaults to the LHV's own click-conditioned table. With
    ``trials > 0`` the reported distance is the Monte Carlo one.
    """
    eta = alice_efficiency(lhv)
    k = instance_count(float(eta), eps)
    proto = OneWayFromLHV(lhv, k, eta)
    if target is None:
        target = {(x, y): {kk: float(p) / float(eta) for kk, p in lhv.joint(x, y).items() if kk[0] is not NO_CLICK}
                  for x in lhv.x_inputs for y in lhv.y_inputs}
    target = _table_dict(target)
    exact = proto.exact_distribution()
    exact_err = table_distance(exact, target)
    details = {"k": k, "bits": proto.bits, "eta": float(eta), "eps": eps, "bound": 2 * eps,
               "exact_distance": exact_err, "lhv_distance": lhv_error(lhv, target),
               "failure_probability": (1 - float(eta)) ** k}
    shown, dist = exact, exact_err
    if trials > 0:
        if rng is None:
            raise DetectError("sampling needs an rng")
        shown = proto.sample_distribution(trials, rng)
        dist = table_distance(shown, target)
        details["trials"] = trials
    clicks = {("alice", x): lhv.click_probability("alice", x) for x in lhv.x_inputs}
    return proto, EfficiencyReport(clicks, {str(k_): v for k_, v in shown.items()}, dist, details)


def toy_pr_lhv(eta: float) -> LHVModel:
    """LHV for the PR box when Alice clicks w.p. eta <= 1/2 and Bob always clicks.

    lambda = (u, r, f): Alice clicks iff u = x and f = 1, then outputs r;
    Bob outputs r xor (u and y). Given a click, a xor b = x and y exactly.
    """
    if not 0 < eta <= 0.5:
        raise DetectError("toy model needs 0 < eta <= 1/2")
    q = 2 * eta
    support, weights = [], []
    for u, r, f in itertools.product((0, 1), repeat=3):
        support.append((u, r, f))
        weights.append(0.25 * (q if f else 1 - q))
    return LHVModel(tuple(support), tuple(weights),
                    lambda lam, x: lam[1] if (lam[0] == x and lam[2]) else NO_CLICK,
                    lambda lam, y: lam[1] ^ (lam[0] & y),
                    (0, 1), (0, 1))


# ---------------------------------------------------------------------------
# LP feasibility of lossy LHV models


class Simplex:
    """Dense phase-one simplex with Bland's rule for A w = b, w >= 0.

    Works over Fractions (object arrays, exact pivots) or floats.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray, exact: bool, pivot_tol: float = 1e-9):
        self.exact = exact
        self.tol = 0 if exact else pivot_tol
        m, n = a.shape
        a = a.copy()
        b = b.copy()
        for i in range(m):
            if b[i] < 0:
                a[i] = -a[i]
                b[i] = -b[i]
        one = Fraction(1) if exact else 1.0
        zero = Fraction(0) if exact else 0.0
        dtype = object if exact else float
        eye = np.array([[one if i == j else zero for j in range(m)] for i in range(m)], dtype=dtype)
        self.tab = np.concatenate([a.astype(dtype), eye, b.reshape(-1, 1).astype(dtype)], axis=1)
        self.m, self.n = m, n
        self.cost = np.array([zero] * n + [one] * m, dtype=dtype)
        self.basis = list(range(n, n + m))

    def _reduced(self):
        cb = self.cost[self.basis]
        return self.cost - cb @ self.tab[:, :-1]

    def solve(self, max_pivots: int = 100_000):
        for _ in range(max_pivots):
            red = self._reduced()
            entering = next((j for j in range(self.n + self.m) if red[j] < -self.tol), None)
            if entering is None:
                break
            col = self.tab[:, entering]
            best, leave = None, None
            for i in range(self.m):
                if col[i] > self.tol:
                    ratio = self.tab[i, -1] / col[i]
                    if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[leave]):
                        best, leave = ratio, i
            if leave is None:
                raise DetectError("phase-one problem unbounded (should not happen)")
            self.tab[leave] = self.tab[leave] / self.tab[leave, entering]
            for i in range(self.m):
                if i != leave and self.tab[i, entering] != 0:
                    self.tab[i] = self.tab[i] - self.tab[i, entering] * self.tab[leave]
            self.basis[leave] = entering
        else:
            raise DetectError("simplex pivot limit reached")
        objective = sum(self.cost[j] * self.tab[i, -1] for i, j in enumerate(self.basis))
        primal = [0] * self.n
        for i, j in enumerate(self.basis):
            if j < self.n:
                primal[j] = self.tab[i, -1]
        # Phase-one duals y = c_B B^-1, read off the artificial columns.
        cb = self.cost[self.basis]
        y = cb @ self.tab[:, self.n:self.n + self.m]
        return objective, primal, y


@dataclass
class FeasibilityResult:
    feasible: bool
    eta_a: float
    eta_b: float
    residual: float
    weights: dict | None = None  # deterministic strategy -> weight
    certificate: dict | None = None  # Bell-type coefficients on the extended table
    violation: float | None = None

    def to_json(self) -> dict:
        out = {"feasible": self.feasible, "eta_a": float(self.eta_a), "eta_b": float(self.eta_b),
               "residual": float(self.residual)}
        if self.weights is not None:
            out["weights"] = {str(k): float(v) for k, v in self.weights.items()}
        if self.certificate is not None:
            out["certificate"] = {str(k): float(v) for k, v in self.certificate.items()}
            out["violation"] = float(self.violation)
        return out


def extended_table(table: CorrelationTable, eta_a, eta_b) -> dict:
    """Target with independent losses: P(a,b|x,y) over a, b in outputs + NO_CLICK."""
    p = table.probs
    nx, ny, na, nb = p.shape
    out = {}
    for x in range(nx):
        for y in range(ny):
            pa = [sum(p[x, y, a, b] for b in range(nb)) for a in range(na)]
            pb = [sum(p[x, y, a, b] for a in range(na)) for b in range(nb)]
            for a in list(range(na)) + [NO_CLICK]:
                for b in list(range(nb)) + [NO_CLICK]:
                    if a is not NO_CLICK and b is not NO_CLICK:
                        v = eta_a * eta_b * p[x, y, a, b]
                    elif a is not NO_CLICK:
                        v = eta_a * (1 - eta_b) * pa[a]
                    elif b is not NO_CLICK:
                        v = (1 - eta_a) * eta_b * pb[b]
                    else:
                        v = (1 - eta_a) * (1 - eta_b)
                    out[(x, y, a, b)] = v
    return out


def lhv_feasibility(table: CorrelationTable, eta_a, eta_b, tol: float = 1e-7) -> FeasibilityResult:
    """Can local deterministic {0, 1, NO_CLICK} strategies reproduce the lossy table?"""
    nx, ny, na, nb = table.shape
    if nx > 4 or ny > 4 or na + 1 > 3 or nb + 1 > 3:
        raise AlphabetTooLarge(f"table shape {table.shape} exceeds the supported alphabets")
    exact = table.exact and all(isinstance(e, (int, Fraction)) for e in (eta_a, eta_b))
    if exact:
        eta_a, eta_b = Fraction(eta_a), Fraction(eta_b)
    else:
        eta_a, eta_b = float(eta_a), float(eta_b)
        table = CorrelationTable(np.array(table.probs, dtype=float), check=False)
    a_out = list(range(na)) + [NO_CLICK]
    b_out = list(range(nb)) + [NO_CLICK]
    strategies = [(sa, sb) for sa in itertools.product(a_out, repeat=nx)
                  for sb in itertools.product(b_out, repeat=ny)]
    target = extended_table(table, eta_a, eta_b)
    rows = list(target)
    zero, one = (Fraction(0), Fraction(1)) if exact else (0.0, 1.0)
    a_mat = np.array([[one if (sa[r[0]], sb[r[1]]) == (r[2], r[3]) else zero for sa, sb in strategies]
                      for r in rows], dtype=object if exact else float)
    b_vec = np.array([target[r] for r in rows], dtype=object if exact else float)
    obj, primal, y = Simplex(a_mat, b_vec, exact).solve()
    feasible = float(obj) <= tol
    if feasible:
        weights = {s: w for s, w in zip(strategies, primal) if w != 0}
        return FeasibilityResult(True, eta_a, eta_b, float(obj), weights=weights)
    cert = {r: yi for r, yi in zip(rows, y) if yi != 0}
    violation = sum(yi * target[r] for r, yi in cert.items())
    return FeasibilityResult(False, eta_a, eta_b, float(obj), certificate=cert, violation=float(violation))


def certificate_local_max(cert: dict, nx: int, ny: int, na: int = 2, nb: int = 2) -> float:
    """Largest value of the certificate functional over deterministic lossy strategies."""
    a_out = list(range(na)) + [NO_CLICK]
    b_out = list(range(nb)) + [NO_CLICK]
    best = -math.inf
    for sa in itertools.product(a_out, repeat=nx):
        for sb in itertools.product(b_out, repeat=ny):
            val = sum(float(c) for (x, y, a, b), c in cert.items() if sa[x] == a and sb[y] == b)
            best = max(best, val)
    return best


def efficiency_threshold(table: CorrelationTable, lo: float = 0.5, hi: float = 1.0,
                         iters: int = 20) -> tuple[float, list]:
    """Binary search on symmetric eta for the largest feasible efficiency."""
    if not lhv_feasibility(table, lo, lo).feasible:
        raise DetectError(f"table is not LHV-explainable even at eta = {lo}")
    history = []
    for _ in range(iters):
        mid = (lo + hi) / 2
        ok = lhv_feasibility(table, mid, mid).feasible
        history.append((mid, ok))
        if ok:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2, history
