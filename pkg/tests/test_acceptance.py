"""Acceptance criteria, each reported on one PASS/FAIL line in the summary.

Golden values live in tests/golden/.  Set DENSELTC_REGEN_GOLDEN=1 to rewrite
the CLI golden files after an intentional output change.
"""

from __future__ import annotations

import json
import os
import random
import shutil
import statistics
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from denseltc.cli import main
from denseltc.constructions import duplicate, hadamard, repetition, weighted_pad, zero_pad
from denseltc.experiments import AlgOverrides, ExperimentConfig, make_params, sweep_rows
from denseltc.fixing import (
    AlgParamsGenQ,
    _engine_for,
    estimate_entry_probability,
    heavy_set_A,
    prepare_state,
    replay_propagate,
    run_general_q,
    run_q3,
    vstar,
    with_seed,
)
from denseltc.gf2 import LinearCode, determined_by, equivalence_classes, min_distance
from denseltc.hypergraph import Parity, TestHypergraph, density, induced_graph
from denseltc.tester_eval import exact_profile, extract_dual_tester, reject_prob

import oracles

GOLDEN = Path(__file__).parent / "golden"
ARTIFACTS = Path(os.environ.get("DENSELTC_ARTIFACTS", Path(__file__).parent.parent / "artifacts"))


def record(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
    print(ACCEPTANCE_LINES[-1])


def random_codewords(code: LinearCode, count: int, seed: int) -> list[int]:
    rng = np.random.Generator(np.random.PCG64(seed))
    return [code.encode(int(m)) for m in rng.integers(0, 1 << code.k, size=count)]


# -- 1 ----------------------------------------------------------------------


def _bound_witness(code, H, report, state, seed) -> str | None:
    if not report.halted:
        return f"seed {seed} did not halt"
    if report.F_size < code.k:
        return f"seed {seed}: |F|={report.F_size} < k={code.k}"
    for w in random_codewords(code, 50, 1000 + seed):
        if replay_propagate(state, H, code, [(w >> v) & 1 for v in state.F]) != w:
            return f"seed {seed}: replay differs from the codeword"
    return None


def test_criterion_1_bound_witness():
    problems = []
    runs = 0
    for k in range(3, 9):
        code, H = hadamard(k)
        base, _ = make_params(code, H, AlgOverrides(algorithm="q3"), 0)
        for seed in range(10):
            rep, st = run_q3(code, H, with_seed(base, seed))
            runs += 1
            if (msg := _bound_witness(code, H, rep, st, seed)) is not None:
                problems.append(f"hadamard k={k} {msg}")
    code, H = repetition(32, 4)
    d = density(H) / 32**2
    for seed in range(10):
        params = AlgParamsGenQ(
            delta=Fraction(1), eps=Fraction(1, 2), p=0.05, beta=4 / d, rng_seed=seed
        )
        rep, st = run_general_q(code, H, params)
        runs += 1
        assert rep.params["threshold"] == 4.0
        if (msg := _bound_witness(code, H, rep, st, seed)) is not None:
            problems.append(f"repetition {msg}")
    ok = not problems
    record(1, ok, f"{runs} halted runs replay 50 codewords each" if ok else problems[0])
    assert ok, problems


# -- 2 ----------------------------------------------------------------------


def test_criterion_2_hadamard_soundness():
    golden = json.loads((GOLDEN / "hadamard_soundness.json").read_text())
    details = []
    ok = True
    for k in (3, 4):
        g = golden[str(k)]
        tau = Fraction(g["tau"])
        code, H = hadamard(k)
        point = exact_profile(code, H, [tau]).points[0]
        eps_oracle, w_oracle = oracles.hadamard_soundness(k, tau)
        witness_oracle = oracles.bitstring(w_oracle, code.n)
        agree = (
            point.epsilon == eps_oracle == Fraction(g["eps0"])
            and point.witness == witness_oracle == g["witness"]
            and point.epsilon > 0
        )
        ok &= agree
        details.append(f"k={k} eps0={point.epsilon} witness={point.witness}")
    record(2, ok, "; ".join(details))
    assert ok


# -- 3 ----------------------------------------------------------------------


def test_criterion_3_transform_arithmetic():
    code, H = hadamard(3)
    c, h, r = duplicate(code, H, 2)
    checks = {
        "duplicate": (len(h.edges), c.n, density(h), c.rate)
        == (56, 16, Fraction(7, 2), Fraction(3, 16))
        and density(h) == Fraction(7, 8) * 4
        and r.ok,
    }
    c, h, r = zero_pad(code, H, 1)
    checks["zero_pad"] = (len(h.edges), density(h), c.rate, min_distance(c)) == (
        56,
        Fraction(7, 2),
        Fraction(3, 16),
        Fraction(1, 4),
    ) and r.ok
    c, h, r = weighted_pad(code, H)
    checks["weighted_pad"] = (
        density(h) == Fraction(63, 16)
        and all(reject_prob(h, w) == 0 for w in oracles.span(c.rows))
        and r.ok
    )
    ok = all(checks.values())
    record(3, ok, ", ".join(f"{k} {'ok' if v else 'wrong'}" for k, v in checks.items()))
    assert ok, checks


# -- 4 (soft) ---------------------------------------------------------------


def test_criterion_4_entry_probability_soft():
    code, H = hadamard(7)
    params, _ = make_params(code, H, AlgOverrides(algorithm="q3"), 0)
    cfg = _engine_for(code, H, params).cfg
    Vs = vstar(equivalence_classes(code), cfg.threshold)
    A = heavy_set_A(H, Vs, cfg.alpha, cfg.d)
    state, t = None, None
    for t in range(1, 65):
        state = prepare_state(code, H, params, t)
        if any(not state.in_b[v] for v in A):
            break
    else:
        pytest.skip("A stays inside B")
    v = min(u for u in A if not state.in_b[u])
    freq = estimate_entry_probability(code, H, params, v, state, 200)
    ok = freq >= 0.40
    result = {
        "alpha": str(cfg.alpha),
        "d": cfg.d,
        "frequency": freq,
        "iteration": t,
        "size_A": len(A),
        "trials": 200,
        "vertex": v,
    }
    ARTIFACTS.mkdir(parents=True, exist_ok=True)
    (ARTIFACTS / "entry_probability.json").write_text(json.dumps(result, sort_keys=True, indent=2) + "\n")
    detail = f"v={v} at iteration {t}, |A|={len(A)}, frequency {freq:.3f} over 200 trials"
    if not ok:
        warnings.warn(f"soft check below 0.40: {detail}")
        detail += " (soft: warning only)"
    record(4, ok, detail)


# -- 5 ----------------------------------------------------------------------


def test_criterion_5_trend():
    cfg = ExperimentConfig(family="hadamard", sweep="k", values=list(range(4, 10)), seeds=list(range(10)))
    rows = sweep_rows(cfg)
    frac, scaled = {}, {}
    for k in cfg.values:
        group = [r for r in rows if r["value"] == k]
        assert all(r["halted"] for r in group)
        frac[k] = statistics.median(float(Fraction(r["F_frac"])) for r in group)
        scaled[k] = statistics.median(float(r["scaled"]) for r in group)
    c_cal = scaled[4]
    monotone = all(frac[a] >= frac[b] for a, b in zip(cfg.values, cfg.values[1:]))
    bounded = all(scaled[k] <= 1.25 * c_cal for k in cfg.values[1:])
    ok = monotone and bounded
    record(
        5,
        ok,
        f"median F/n {[round(frac[k], 4) for k in cfg.values]}, "
        f"median scaled {[round(scaled[k], 3) for k in cfg.values]}, C_cal={c_cal:.3f}",
    )
    assert ok


# -- 6 ----------------------------------------------------------------------


def _random_code(rng: random.Random, n: int, k: int) -> LinearCode:
    while True:
        rows = [rng.getrandbits(n) for _ in range(k)]
        if oracles.gf2_rank(rows) == k:
            return LinearCode(n, tuple(rows))


def _random_hypergraph(rng: random.Random) -> TestHypergraph:
    n = rng.randint(4, 40)
    q = rng.randint(2, 4)
    edges = {}
    for _ in range(rng.randint(0, 120)):
        vs = tuple(sorted(rng.sample(range(n), rng.randint(1, q))))
        edges[vs] = Parity(rng.randint(0, 1))
    return TestHypergraph.build(n, q, edges.items())


def test_criterion_6_oracle_equivalence():
    rng = random.Random(2024)
    failures = []
    for trial in range(30):
        k = rng.randint(1, 12)
        n = rng.randint(k, 16)
        code = _random_code(rng, n, k)
        ec = equivalence_classes(code)
        pairs = {(u, v) for c in ec.classes for u in c for v in c if u < v}
        if pairs != oracles.equivalent_pairs(code.rows, n):
            failures.append(f"equivalence_classes n={n} k={k}")
        for _ in range(5):
            coords = rng.sample(range(n), rng.randint(0, n))
            if bool(determined_by(code, coords)) != oracles.determines(code.rows, coords):
                failures.append(f"determined_by n={n} k={k}")
    for k in range(2, 6):
        code, _ = hadamard(k)
        if {e.vars for e in extract_dual_tester(code, 3).edges} != oracles.blr_triples(k):
            failures.append(f"extract_dual_tester k={k}")
    for _ in range(20):
        H = _random_hypergraph(rng)
        B = {v for v in range(H.n) if rng.random() < 0.5}
        if induced_graph(H, B).preimages != oracles.induced_pairs(H, B):
            failures.append(f"induced_graph n={H.n}")
    ok = not failures
    record(6, ok, "all oracle comparisons agree" if ok else failures[0])
    assert ok, failures


# -- 7 ----------------------------------------------------------------------


def _invocations(work: Path, workers: int) -> list[tuple[str, list]]:
    h3 = work / "inputs" / "h3"
    h4 = work / "inputs" / "h4"
    h5 = work / "inputs" / "h5"

    def pair(d):
        return ["--code", d / "code.json", "--hypergraph", d / "hypergraph.json"]

    w = ["--workers", workers]
    return [
        ("construct_hadamard3", ["construct", "hadamard", "--k", 3]),
        ("transform_duplicate", ["transform", "duplicate", *pair(h3), "--t", 2]),
        ("fix_hadamard4", ["fix", *pair(h4), "--seeds", "0-9", *w]),
        ("soundness_exhaustive", ["soundness", *pair(h3), "--taus", "0,1/6,1/4,1/2"]),
        ("soundness_sampled", ["soundness", *pair(h5), "--mode", "sampled", "--trials", 2000, "--seed", 7]),
        ("sweep_hadamard", ["sweep", "--values", "4-6", "--seeds", "0-2", *w]),
    ]


def _run_all(work: Path, workers: int) -> dict[str, dict[str, bytes]]:
    for k in (3, 4, 5):
        assert main(["construct", "hadamard", "--k", str(k), "--out", str(work / "inputs" / f"h{k}")]) == 0
    out = {}
    for name, argv in _invocations(work, workers):
        dest = work / name
        assert main([str(a) for a in argv] + ["--out", str(dest)]) == 0, name
        out[name] = {p.name: p.read_bytes() for p in sorted(dest.iterdir())}
    return out


def test_criterion_7_determinism(tmp_path):
    first = _run_all(tmp_path / "a", 1)
    second = _run_all(tmp_path / "b", 1)
    parallel = _run_all(tmp_path / "c", 4)
    gold_dir = GOLDEN / "cli"
    if os.environ.get("DENSELTC_REGEN_GOLDEN") == "1" or not gold_dir.exists():
        if gold_dir.exists():
            shutil.rmtree(gold_dir)
        for name, files in first.items():
            (gold_dir / name).mkdir(parents=True)
            for fname, data in files.items():
                (gold_dir / name / fname).write_bytes(data)
    golden = {
        d.name: {p.name: p.read_bytes() for p in sorted(d.iterdir())}
        for d in sorted(gold_dir.iterdir())
    }
    mismatches = [
        name
        for name in first
        if not (first[name] == second[name] == parallel[name] == golden.get(name))
    ]
    ok = not mismatches and len(first) == 6
    record(7, ok, "6 invocations byte-identical across runs, workers {1,4} and golden files" if ok else f"differs: {mismatches}")
    assert ok, mismatches
