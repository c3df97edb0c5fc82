"""Command-line experiment runner.

    python3 -m nlcc list
    python3 -m nlcc run --config cfg.json [--seed S] [--trials T] [--out report.json] [--format json|csv]
    python3 -m nlcc target chsh --mode sampled --trials 2000 --param n=8
    python3 -m nlcc schema

Everything in a report except the ``meta`` block is a deterministic function
of the config and seed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from importlib import resources
from typing import Any, Callable

import numpy as np

from . import __version__, bell, ccproto, detect, games, lbtools, nlbox, smp
from .qstate import SeededRng, StateVector, random_pm1_observable

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3
SIGMAS = 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Parameter schemas


@dataclass(frozen=True)
class Param:
    kind: str  # int, float, bits, str, pairs, json
    default: Any = None
    check: Callable[[Any], bool] | None = None
    hint: str = ""

    def coerce(self, name: str, value):
        try:
            if value is None:
                return None
            if self.kind == "int":
                if isinstance(value, bool) or float(value) != int(float(value)):
                    raise ValueError
                value = int(float(value))
            elif self.kind == "float":
                value = float(value)
            elif self.kind == "bits":
                value = ccproto.bits_str(ccproto.as_bits(str(value)))
            elif self.kind == "pairs":
                value = json.loads(value) if isinstance(value, str) else value
                value = [[int(i), int(j)] for i, j in value]
            elif self.kind == "json":
                value = json.loads(value) if isinstance(value, str) else value
            elif self.kind == "str":
                value = str(value)
        except (ValueError, TypeError, ccproto.ProtocolError) as e:
            raise ConfigError(f"parameter {name!r}: expected {self.kind}, got {value!r}") from e
        if self.check is not None and not self.check(value):
            raise ConfigError(f"parameter {name!r}: {value!r} violates {self.hint or 'its constraint'}")
        return value

    def to_json(self) -> dict:
        return {"type": self.kind, "default": self.default, "constraint": self.hint}


def _pow2(v) -> bool:
    return v >= 2 and v & (v - 1) == 0


N_POW2 = Param("int", 4, _pow2, "power of two >= 2")


@dataclass
class Outcome:
    """What a target handler returns."""

    results: dict
    value: float | None = None  # exact value (exact mode) or sample mean (sampled mode)
    successes: int | None = None  # sampled mode: number of successful trials
    radius: float | None = None  # sampled mode without a success count
    rows: list = field(default_factory=list)
    ledger: dict | None = None
    reference: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)


@dataclass(frozen=True)
class Target:
    name: str
    description: str
    params: dict
    modes: tuple
    handler: Callable[..., Outcome]
    default_trials: int = 1000

    def to_json(self) -> dict:
        return {"name": self.name, "description": self.description, "modes": list(self.modes),
                "params": {k: p.to_json() for k, p in self.params.items()},
                "default_trials": self.default_trials}


CATALOG: dict[str, Target] = {}


def target(name, description, params=None, modes=("exact",), default_trials=1000):
    def deco(fn):
        CATALOG[name] = Target(name, description, params or {}, tuple(modes), fn, default_trials)
        return fn
    return deco


def _check(name: str, passed: bool, **info) -> dict:
    return {"name": name, "passed": bool(passed), **{k: _jsonable(v) for k, v in info.items()}}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating, Fraction)):
        return float(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _rate(successes: int, trials: int) -> tuple[float, float]:
    mean = successes / trials
    return mean, SIGMAS * math.sqrt(max(mean * (1 - mean), 0.0) / trials)


# ---------------------------------------------------------------------------
# Games


def _game_target(game_fn, strategy_fn, reference):
    def handler(p, mode, trials, rng):
        g, s = game_fn(), strategy_fn()
        if mode == "exact":
            rep = games.eval_exact(g, s)
            classical, best = games.best_classical(g)
            return Outcome(
                {"quantum_value": float(rep.win_probability),
                 "per_input": {str(k): float(v) for k, v in rep.per_input.items()},
                 "classical_value": str(classical), "classical_strategy": str(best.tables)},
                value=float(rep.win_probability), reference=reference)
        inputs = list(g.distribution)
        weights = [float(g.distribution[i]) for i in inputs]
        wins, rows = 0, []
        for t in range(trials):
            r = rng.split("trial", t)
            inp = inputs[r.choice_index(weights)]
            out = s.play(inp, r)
            ok = bool(g.win(inp, out))
            wins += ok
            rows.append({"trial": t, "inputs": str(inp), "outputs": str(out), "win": ok})
        return Outcome({"wins": wins}, successes=wins, rows=rows, reference=reference)
    return handler


target("ghz", "GHZ game: exact quantum/classical values or sampled play", modes=("exact", "sampled"))(
    _game_target(games.ghz_game, games.ghz_quantum, {"quantum": 1.0, "classical": 0.75}))
target("chsh", "CHSH game with the optimal rotated-basis strategy", modes=("exact", "sampled"))(
    _game_target(games.chsh_game, games.chsh_quantum,
                 {"quantum": games.CHSH_QUANTUM_VALUE, "classical": 0.75}))
target("magic-square", "Magic square game with the two-singlet Pauli strategy", modes=("exact", "sampled"))(
    _game_target(games.magic_square_game, games.magic_square_quantum, {"quantum": 1.0, "classical": 8 / 9}))


@target("tsirelson", "Max eigenvalue of the CHSH operator for random +-1 observables",
        {"d": Param("int", 2, lambda v: v in (2, 4, 8), "d in {2, 4, 8}"),
         "samples": Param("int", 200, lambda v: v >= 1, ">= 1")})
def _tsirelson(p, mode, trials, rng):
    worst = 0.0
    for k in range(p["samples"]):
        r = rng.split("draw", k)
        obs = [random_pm1_observable(p["d"], r.split(i)) for i in range(4)]
        worst = max(worst, games.tsirelson_check(*obs))
    sat = games.tsirelson_check(*games.saturating_observables())
    bound = games.TSIRELSON_BOUND
    return Outcome({"max_over_samples": worst, "saturating_value": sat}, value=worst,
                   reference={"bound": bound},
                   checks=[_check("below_bound", worst <= bound + 1e-9, value=worst),
                           _check("saturates", abs(sat - bound) <= 1e-9, value=sat)])


@target("xor-values", "LHV, quantum (seesaw) and no-signalling values of an XOR game",
        {"m": Param("json", [[1, 1], [1, -1]], hint="2-d list of weights"),
         "max_iters": Param("int", 1000, lambda v: v >= 1, ">= 1")})
def _xor_values(p, mode, trials, rng):
    g = bell.XorGame(np.array(p["m"], dtype=float))
    q = bell.qm_value_xor(g, max_iters=p["max_iters"], seed=rng.split("seesaw").integer(0, 2**31))
    res = {"lhv": bell.lhv_value(g.to_bell_expression()), "qm_lower_bound": q.value,
           "ns": bell.ns_value_xor(g), "seesaw_iterations": q.iterations}
    return Outcome(res, value=q.value, reference={"chsh_qm": 2 * math.sqrt(2)})


# ---------------------------------------------------------------------------
# Communication protocols


def _random_bits(n, rng):
    return ccproto.bits_str(rng.bits(n))


def _dj_pair(n, rng):
    x = list(rng.bits(n))
    if rng.bit():
        return ccproto.bits_str(x), ccproto.bits_str(x)
    y = list(x)
    for i in rng.sample_without_replacement(n, n // 2):
        y[i] ^= 1
    return ccproto.bits_str(x), ccproto.bits_str(y)


def _protocol_trials(run, trials, rng, exact_value=None, reference=None):
    """Sampled-mode loop: ``run(rng)`` returns (ProtocolResult, row dict)."""
    wins, rows, ledger = 0, [], None
    for t in range(trials):
        res, row = run(rng.split("trial", t))
        ok = bool(res.correct)
        wins += ok
        rows.append({"trial": t, **row, "correct": ok})
        ledger = res.ledger.to_json()
    return Outcome({"successes": wins}, successes=wins, rows=rows, ledger=ledger,
                   reference=reference or {})


def _exact_protocol(res, reference=None, **extra):
    return Outcome({"output": _jsonable(res.output), "correct": res.correct,
                    "success_probability": res.success_probability, **extra},
                   value=res.success_probability, ledger=res.ledger.to_json(), reference=reference or {})


@target("dj", "Distributed Deutsch-Jozsa (exact on x, y or random promise pairs)",
        {"n": N_POW2, "x": Param("bits"), "y": Param("bits")}, modes=("exact", "sampled"))
def _dj(p, mode, trials, rng):
    if mode == "exact":
        x, y = (p["x"], p["y"]) if p["x"] else _dj_pair(p["n"], rng)
        return _exact_protocol(ccproto.dj_quantum(x, y), {"success": 1.0}, x=x, y=y)

    def run(r):
        x, y = _dj_pair(p["n"], r)
        return ccproto.dj_quantum(x, y, r), {"x": x, "y": y}
    return _protocol_trials(run, trials, rng, reference={"success": 1.0})


@target("dj-nonlocal", "Entanglement-only DJ joint distribution",
        {"n": N_POW2, "x": Param("bits"), "y": Param("bits")})
def _dj_nonlocal(p, mode, trials, rng):
    x, y = (p["x"], p["y"]) if p["x"] else _dj_pair(p["n"], rng)
    res = ccproto.dj_nonlocal(x, y)
    p_eq = float(np.trace(res.distribution))
    ok = p_eq > 1 - 1e-9 if x == y else p_eq < 1e-9
    return Outcome({"x": x, "y": y, "p_equal_outputs": p_eq,
                    "distribution": res.distribution.tolist()}, value=p_eq,
                   ledger=res.ledger.to_json(), checks=[_check("support", ok)])


def _matching(p, rng):
    n = len(p["x"]) if p.get("x") else p["n"]
    if p.get("matching"):
        return ccproto.MatchingSpec(n, tuple(map(tuple, p["matching"])))
    return ccproto.MatchingSpec.random(n, rng.split("matching"))


HM_PARAMS = {"n": N_POW2, "x": Param("bits"), "matching": Param("pairs")}


@target("hm", "Hidden matching, one-way quantum protocol", HM_PARAMS, modes=("exact", "sampled"))
def _hm(p, mode, trials, rng):
    m = _matching(p, rng)
    if mode == "exact":
        x = p["x"] or _random_bits(m.n, rng.split("x"))
        res = ccproto.hm_quantum(x, m)
        return _exact_protocol(res, {"success": 1.0}, x=x, matching=m.pairs)

    def run(r):
        x = p["x"] or _random_bits(m.n, r.split("x"))
        res = ccproto.hm_quantum(x, m, r)
        return res, {"x": x, "output": str(res.output)}
    return _protocol_trials(run, trials, rng, reference={"success": 1.0})


@target("hm-nonlocal", "Hidden matching with shared entanglement only", HM_PARAMS)
def _hm_nonlocal(p, mode, trials, rng):
    m = _matching(p, rng)
    x = p["x"] or _random_bits(m.n, rng.split("x"))
    res = ccproto.hm_nonlocal(x, m)
    ok = all(ccproto.hm_constraint_holds(x, pair, k, l) for (k, pair, l) in res.distribution)
    amp = res.details["max_violating_amplitude"]
    return Outcome({"x": x, "matching": m.pairs, "support_size": len(res.distribution),
                    "max_violating_amplitude": amp}, value=float(sum(res.distribution.values())),
                   ledger=res.ledger.to_json(),
                   checks=[_check("support_constraint", ok), _check("zero_violation", amp <= 1e-12, value=amp)])


@target("hm-classical", "Hidden matching, classical birthday protocol",
        {"n": Param("int", 16, lambda v: v >= 2 and v % 2 == 0, "even >= 2"),
         "sample_size": Param("int", 8, lambda v: v >= 0, ">= 0")}, modes=("sampled",), default_trials=10000)
def _hm_classical(p, mode, trials, rng):
    if p["sample_size"] > p["n"]:
        raise ConfigError("parameter 'sample_size': must not exceed n")
    m = ccproto.MatchingSpec.adjacent(p["n"])

    def run(r):
        res = ccproto.hm_classical_oneway(_random_bits(p["n"], r.split("x")), m, p["sample_size"], r)
        return res, {}
    out = _protocol_trials(run, trials, rng)
    out.reference = {"success": ccproto.hm_birthday_success(p["n"], p["sample_size"])}
    return out


def _unique_intersection(n, rng):
    x, y = list(rng.bits(n)), list(rng.bits(n))
    for i in range(n):
        if x[i] and y[i]:
            y[i] = 0
    i = rng.integer(0, n)
    x[i] = y[i] = 1
    return ccproto.bits_str(x), ccproto.bits_str(y)


@target("intersection", "Distributed Grover search for x_i = y_i = 1",
        {"n": Param("int", 16, _pow2, "power of two >= 2"), "x": Param("bits"), "y": Param("bits")},
        modes=("sampled",), default_trials=500)
def _intersection(p, mode, trials, rng):
    false_pos = 0

    def run(r):
        nonlocal false_pos
        x, y = (p["x"], p["y"]) if p["x"] else _unique_intersection(p["n"], r.split("inputs"))
        res = ccproto.intersection_grover(x, y, r)
        if res.output is not None and not (int(x[res.output - 1]) & int(y[res.output - 1])):
            false_pos += 1
        return res, {"output": res.output, "oracle_calls": res.details["oracle_calls"]}
    out = _protocol_trials(run, trials, rng, reference={"min_success": 2 / 3})
    out.checks.append(_check("no_false_positives", false_pos == 0, count=false_pos))
    return out


@target("raz", "Raz's vector-in-subspace problem",
        {"m": Param("int", 8, _pow2, "power of two >= 2"),
         "overlap": Param("float", 0.9, lambda v: 2 / 3 <= v <= 1, "2/3 <= overlap <= 1")},
        modes=("exact", "sampled"))
def _raz(p, mode, trials, rng):
    inst = ccproto.raz_instance_gen(p["m"], p["overlap"], rng.split("instance"))
    if mode == "exact":
        return _exact_protocol(ccproto.raz_quantum(inst), {"success": p["overlap"]})
    return _protocol_trials(lambda r: (ccproto.raz_quantum(inst, r), {}), trials, rng,
                            reference={"success": p["overlap"]})


def _eq_target(name, desc, run_fn, extra_params=None, n_default=8):
    params = {"n": Param("int", n_default, lambda v: v >= 1, ">= 1"), "x": Param("bits"), "y": Param("bits"),
              **(extra_params or {})}

    @target(name, desc, params, modes=("sampled",))
    def handler(p, mode, trials, rng):
        def run(r):
            if p["x"]:
                x, y = p["x"], p["y"] or p["x"]
            else:
                x = _random_bits(p["n"], r.split("x"))
                y = x if r.split("same").bit() else _random_bits(p["n"], r.split("y"))
            return run_fn(x, y, p, r), {"x": x, "y": y}
        return _protocol_trials(run, trials, rng)
    return handler


_eq_target("eq-deterministic", "Equality: Bob sends y", lambda x, y, p, r: ccproto.eq_deterministic(x, y))
_eq_target("eq-public-coin", "Equality with public inner-product coins",
           lambda x, y, p, r: ccproto.eq_public_coin(x, y, p["reps"], r),
           {"reps": Param("int", 5, lambda v: v >= 0, ">= 0")})
_eq_target("eq-poly", "Equality via one polynomial evaluation over F_p",
           lambda x, y, p, r: ccproto.eq_private_coin_poly(x, y, r))
_eq_target("smp-quantum", "SMP equality with quantum fingerprints and SWAP tests",
           lambda x, y, p, r: smp.smp_quantum_eq(x, y, p["reps"], r),
           {"reps": Param("int", 5, lambda v: v >= 1, ">= 1")}, n_default=4)
_eq_target("smp-classical", "SMP equality with classical point fingerprints",
           lambda x, y, p, r: smp.smp_classical_eq(x, y, r, p["k"]),
           {"k": Param("int", None, lambda v: v >= 1, ">= 1")})


@target("swap-test", "SWAP test on two random states",
        {"qubits": Param("int", 2, lambda v: 1 <= v <= 9, "1..9")}, modes=("exact", "sampled"),
        default_trials=10000)
def _swap_test(p, mode, trials, rng):
    r = rng.split("states")
    d = 2 ** p["qubits"]
    phi = StateVector(r.normal(d) + 1j * r.normal(d), normalize=True)
    psi = StateVector(r.normal(d) + 1j * r.normal(d), normalize=True)
    overlap = abs(np.vdot(phi.amplitudes, psi.amplitudes)) ** 2
    ref = {"p_one": (1 - overlap) / 2}
    if mode == "exact":
        dist = smp.swap_test_distribution(phi, psi)
        return Outcome({"p_one": float(dist[1]), "overlap_squared": overlap}, value=float(dist[1]), reference=ref)
    ones = sum(smp.swap_test(phi, psi, rng.split("trial", t)) for t in range(trials))
    return Outcome({"ones": ones}, successes=ones, reference=ref)


@target("ip-transfer", "Phase map plus Hadamards moves |x> to Bob", {"x": Param("bits", "101")})
def _ip_transfer(p, mode, trials, rng):
    res = ccproto.ip_transfer_demo(p["x"])
    return Outcome({"recovered": res.output, "probability": res.success_probability},
                   value=res.success_probability, checks=[_check("recovered", res.correct)])


# ---------------------------------------------------------------------------
# Non-local boxes


def _load_circuit(p, rng):
    if p.get("circuit"):
        try:
            return nlbox.BooleanCircuit.from_json(p["circuit"])
        except nlbox.CircuitError as e:
            raise ConfigError(f"parameter 'circuit': {e}") from e
    return nlbox.random_circuit(p["n"], p["ands"], rng.split("circuit"))


@target("vandam", "Circuit evaluation with PR boxes and one bit",
        {"circuit": Param("json", hint="circuit JSON object or path"),
         "n": Param("int", 2, lambda v: 1 <= v <= 6, "1..6"),
         "ands": Param("int", 2, lambda v: 0 <= v <= 16, "0..16"),
         "p": Param("float", 1.0, lambda v: 0.5 <= v <= 1, "1/2 <= p <= 1")},
        modes=("exact", "sampled"))
def _vandam(p, mode, trials, rng):
    c = _load_circuit(p, rng)
    if mode == "exact":
        if p["p"] != 1.0:
            raise ConfigError("parameter 'p': exact mode is exhaustive and needs p = 1")
        ok, ledger = True, None
        count = 0
        for xs in range(2**c.n):
            for ys in range(2**c.n):
                x = [(xs >> (c.n - 1 - i)) & 1 for i in range(c.n)]
                y = [(ys >> (c.n - 1 - i)) & 1 for i in range(c.n)]
                res = nlbox.vandam_eval(c, x, y, rng.split(xs, ys))
                ok &= bool(res.correct)
                count += 1
                ledger = res.ledger.to_json()
        return Outcome({"inputs_checked": count, "and_gates": c.and_count, "circuit": c.to_json()},
                       value=1.0 if ok else 0.0, ledger=ledger, reference={"success": 1.0},
                       checks=[_check("matches_direct_evaluation", ok),
                               _check("boxes", ledger["nl_boxes"] == 2 * c.and_count, boxes=ledger["nl_boxes"]),
                               _check("one_bit", ledger["classical_bits"] == 1)])
    rep = nlbox.noisy_vandam_success(c, p["p"], trials, rng)
    ref = {"threshold": nlbox.NOISE_THRESHOLD}
    if c.and_count == 1:
        ref["single_and_success"] = p["p"] ** 2 + (1 - p["p"]) ** 2
    return Outcome({"successes": rep.successes, "and_gates": c.and_count}, successes=rep.successes,
                   reference=ref)


@target("pr-table", "PR-box correlation table: CHSH value and no-signalling",
        {"p": Param("str", "1", hint="probability, e.g. 1, 0.85 or 3/4")}, modes=("exact", "sampled"),
        default_trials=10000)
def _pr_table(p, mode, trials, rng):
    try:
        prob = Fraction(p["p"]) if "/" in p["p"] or "." not in p["p"] else float(p["p"])
        table = nlbox.pr_correlation_table(prob)
    except (ValueError, ZeroDivisionError, nlbox.BoxError) as e:
        raise ConfigError(f"parameter 'p': {e}") from e
    chsh_ref = 4 * (2 * float(prob) - 1)
    ref = {"chsh": chsh_ref, "parity_success": float(prob)}
    if mode == "exact":
        val = bell.evaluate(bell.chsh_expression(), table)
        ns = bell.no_signalling_check(table)
        return Outcome({"chsh": float(val), "chsh_exact": str(val), "no_signalling": ns.to_json()},
                       value=float(val), reference=ref,
                       checks=[_check("no_signalling", ns.passed)])
    # Sampled: parity success a xor b = x and y over fresh boxes with uniform inputs.
    hits = 0
    for t in range(trials):
        r = rng.split("trial", t)
        x, y = r.bit(), r.bit()
        a, b = nlbox.PRBox(prob).query(x, y, r)
        hits += (a ^ b) == (x & y)
    return Outcome({"parity_hits": hits}, successes=hits, reference=ref)


# ---------------------------------------------------------------------------
# Detection efficiency


@target("detect-threshold", "Binary search for the CHSH detection-efficiency threshold",
        {"iters": Param("int", 16, lambda v: 1 <= v <= 40, "1..40")})
def _detect_threshold(p, mode, trials, rng):
    table = bell.correlation_from_quantum(games.chsh_quantum(), games.chsh_game())
    eta, hist = detect.efficiency_threshold(table, iters=p["iters"])
    ref = detect.CHSH_EFFICIENCY_THRESHOLD
    return Outcome({"threshold": eta, "history": [[m, ok] for m, ok in hist]}, value=eta,
                   reference={"threshold": ref},
                   checks=[_check("threshold", abs(eta - ref) <= 0.01, value=eta)])


@target("detect-asym", "Lossy-Alice LHV to one-way protocol (toy PR-box model)",
        {"eta": Param("float", 0.3, lambda v: 0 < v <= 0.5, "0 < eta <= 1/2"),
         "eps": Param("float", 0.1, lambda v: 0 < v < 1, "0 < eps < 1")},
        modes=("exact", "sampled"), default_trials=100000)
def _detect_asym(p, mode, trials, rng):
    lhv = detect.toy_pr_lhv(p["eta"])
    _, rep = detect.asym_lhv_to_oneway(lhv, p["eps"], target=nlbox.pr_correlation_table(1.0),
                                       trials=trials if mode == "sampled" else 0, rng=rng)
    res = rep.to_json()
    radius = None
    if mode == "sampled":
        # Per input pair, sum of SIGMAS-sigma radii of the cell frequencies.
        per = trials // 4
        radius = max(sum(SIGMAS * math.sqrt(v * (1 - v) / per) for v in cells.values())
                     for cells in res["conditional_table"].values())
    return Outcome(res, value=rep.distance, radius=radius, ledger={"classical_bits": rep.details["bits"]},
                   reference={"bound": 2 * p["eps"]},
                   checks=[_check("within_bound", rep.distance <= 2 * p["eps"] + (radius or 0.0),
                                  value=rep.distance, slack=radius or 0.0)])


# ---------------------------------------------------------------------------
# Lower-bound tools

FUNCS = {"eq": lbtools.eq_fn, "ip": lbtools.ip_fn}
FN_PARAM = Param("str", "eq", lambda v: v in FUNCS, "one of eq, ip")


@target("lb-rank", "Exact rank of a communication matrix",
        {"fn": FN_PARAM, "n": Param("int", 4, lambda v: 1 <= v <= 8, "1..8")})
def _lb_rank(p, mode, trials, rng):
    r = lbtools.rank_exact(lbtools.comm_matrix(FUNCS[p["fn"]], p["n"]))
    res = {"rank": r, "log2_rank": math.log2(r) if r else 0.0}
    checks = [_check("full_rank", r == 2 ** p["n"])] if p["fn"] == "eq" else []
    return Outcome(res, value=float(r), checks=checks)


@target("lb-discrepancy", "Discrepancy under the uniform distribution",
        {"fn": FN_PARAM, "n": Param("int", 2, lambda v: 1 <= v <= 3, "1..3")}, modes=("exact", "sampled"),
        default_trials=2000)
def _lb_discrepancy(p, mode, trials, rng):
    r = lbtools.discrepancy(FUNCS[p["fn"]], p["n"], mode=mode, samples=trials, rng=rng)
    ref = {"ip_bound": 2 ** (-p["n"] / 2)} if p["fn"] == "ip" else {}
    checks = [_check("ip_bound", r.value <= ref["ip_bound"] + 1e-12)] if ref else []
    # A sampled value is the exact bias of the best rectangle found: a lower bound, radius 0.
    return Outcome(r.to_json(), value=r.value, radius=0.0, reference=ref, checks=checks)


@target("lb-lindsey", "Lindsey's lemma on random rectangles",
        {"n": Param("int", 8, lambda v: 1 <= v <= 12, "1..12"),
         "samples": Param("int", 10000, lambda v: v >= 1, ">= 1")})
def _lb_lindsey(p, mode, trials, rng):
    worst, ok = 0.0, True
    for k in range(p["samples"]):
        a, b = lbtools.random_rectangle(p["n"], rng.split(k))
        c = lbtools.lindsey_check(a, b, p["n"])
        ok &= c.passed
        worst = max(worst, c.lhs / c.rhs)
    return Outcome({"max_ratio": worst}, value=worst, checks=[_check("all_pass", ok)])


@target("lb-nayak", "Nayak's bound for random encodings and decoders",
        {"n": Param("int", 2, lambda v: 1 <= v <= 6, "1..6"), "d": Param("int", 2, lambda v: v >= 1, ">= 1"),
         "draws": Param("int", 100, lambda v: v >= 1, ">= 1")})
def _lb_nayak(p, mode, trials, rng):
    k = 2 ** p["n"]
    worst, ok = 0.0, True
    for t in range(p["draws"]):
        r = rng.split(t)
        c = lbtools.nayak_check([lbtools.random_density(p["d"], r.split("rho", i)) for i in range(k)],
                                lbtools.random_povm(p["d"], k, r.split("povm")), p["d"])
        ok &= c.passed
        worst = max(worst, c.lhs)
    bound = min(1.0, p["d"] / k)
    return Outcome({"max_average_success": worst}, value=worst, reference={"bound": p["d"] / k},
                   checks=[_check("all_pass", ok and worst <= bound + 1e-9)])


# ---------------------------------------------------------------------------
# Config, report, entry point


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - {"id", "target", "mode", "params", "seed", "trials", "out", "format"}
    if unknown:
        raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
    name = cfg.get("target")
    if name not in CATALOG:
        raise ConfigError(f"field 'target': unknown target {name!r}")
    t = CATALOG[name]
    mode = cfg.get("mode", t.modes[0])
    if mode not in t.modes:
        raise ConfigError(f"field 'mode': target {name!r} supports {list(t.modes)}, not {mode!r}")
    params = cfg.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError("field 'params' must be an object")
    extra = set(params) - set(t.params)
    if extra:
        raise ConfigError(f"field 'params': unknown parameter(s) {sorted(extra)} for {name!r}")
    clean = {k: spec.coerce(k, params.get(k, spec.default)) for k, spec in t.params.items()}
    seed = cfg.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("field 'seed': must be an integer in [0, 2^64)")
    trials = cfg.get("trials", t.default_trials)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ConfigError("field 'trials': must be a positive integer")
    return {"id": str(cfg.get("id", name)), "target": name, "mode": mode, "params": clean,
            "seed": seed, "trials": trials if mode == "sampled" else None}


def run(cfg: dict) -> dict:
    """Validate ``cfg``, run the target and assemble the report."""
    cfg = validate_config(cfg)
    t = CATALOG[cfg["target"]]
    start = time.perf_counter()
    out = t.handler(cfg["params"], cfg["mode"], cfg["trials"], SeededRng(cfg["seed"]).split(cfg["target"]))
    if cfg["mode"] == "sampled":
        if out.successes is not None:
            mean, radius = _rate(out.successes, cfg["trials"])
        else:
            mean, radius = out.value, out.radius
        aggregate = {"mean": mean, "radius": radius, "radius_sigmas": SIGMAS, "trials": cfg["trials"]}
    else:
        aggregate = {"value": out.value}
    report = {
        "config": cfg,
        "target": cfg["target"],
        "mode": cfg["mode"],
        "results": _jsonable(out.results),
        "aggregate": _jsonable(aggregate),
        "reference": _jsonable(out.reference),
        "ledger": _jsonable(out.ledger),
        "checks": out.checks,
        "passed": all(c["passed"] for c in out.checks),
        "rows": _jsonable(out.rows),
        "meta": {"version": __version__,
                 "timestamp": datetime.now(timezone.utc).isoformat(),
                 "wall_time": time.perf_counter() - start},
    }
    return report


def payload(report: dict) -> str:
    """Canonical serialization of the deterministic part of a report."""
    return json.dumps({k: v for k, v in report.items() if k != "meta"}, sort_keys=True)


def load_schema() -> dict:
    return json.loads(resources.files("nlcc").joinpath("report_schema.json").read_text())


def to_csv(report: dict) -> str:
    rows = report["rows"] or [{**report["aggregate"], **{f"result.{k}": v for k, v in report["results"].items()
                                                         if not isinstance(v, (dict, list))}}]
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(v) if isinstance(v, (dict, list)) else v for k, v in r.items()})
    return buf.getvalue()


def _emit(report: dict, out: str | None, fmt: str) -> None:
    text = to_csv(report) if fmt == "csv" else json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_param(items) -> dict:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        params[k] = v
    return params


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlcc", description="Non-locality and communication complexity experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="print the target catalog")
    sub.add_parser("schema", help="print the report JSON schema")
    for name, helptext in (("run", "run a JSON config"), ("target", "run one target by name")):
        p = sub.add_parser(name, help=helptext)
        if name == "run":
            p.add_argument("--config", required=True)
        else:
            p.add_argument("name")
            p.add_argument("--mode")
            p.add_argument("--param", action="append", metavar="KEY=VALUE")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--out")
        p.add_argument("--format", choices=("json", "csv"), default="json")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print(json.dumps({k: t.to_json() for k, t in CATALOG.items()}, indent=2, sort_keys=True))
        return EXIT_OK
    if args.command == "schema":
        print(json.dumps(load_schema(), indent=2))
        return EXIT_OK
    try:
        if args.command == "run":
            try:
                with open(args.config) as fh:
                    cfg = json.load(fh)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read config: {e}") from e
        else:
            cfg = {"target": args.name, "params": _parse_param(args.param)}
            if args.mode:
                cfg["mode"] = args.mode
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.trials is not None:
            cfg["trials"] = args.trials
        report = run(cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(report, args.out, args.format)
    if not report["passed"]:
        print("check failed: " + ", ".join(c["name"] for c in report["checks"] if not c["passed"]), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
