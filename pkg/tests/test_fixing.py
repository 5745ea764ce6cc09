from __future__ import annotations

import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from denseltc.constructions import hadamard, repetition
from denseltc.fixing import (
    EDGE_FORCED,
    INIT_FIXED,
    AlgParamsGenQ,
    AlgParamsQ3,
    Contradiction,
    FixState,
    _engine_for,
    _rng,
    check_clean_fixpoint,
    compute_Ev,
    estimate_entry_probability,
    heavy_set_A,
    ni_cascade_diagnostic,
    prepare_state,
    replay_propagate,
    run_general_q,
    run_q3,
    vstar,
)
from denseltc.gf2 import determined_by, distance_to_code, equivalence_classes
from denseltc.hypergraph import ArityMismatch, Equality, Parity, TestHypergraph

import oracles

HALF = Fraction(1, 2)
THIRD = Fraction(1, 3)


def q3_params(**kw):
    return AlgParamsQ3(delta=HALF, eps=THIRD, **kw)


def replay_all(code, H, st):
    for w in oracles.span(code.rows):
        assert replay_propagate(st, H, code, [(w >> v) & 1 for v in st.F]) == w


def test_distance_of_single_point_indicator():
    code, _ = hadamard(3)
    x = 1 << 5
    assert distance_to_code(code, x) == Fraction(oracles.dist_to_span(x, code.rows), 8) == Fraction(1, 8)


@pytest.mark.parametrize("k", [3, 4, 5])
def test_run_q3_halts_and_replays(k):
    code, H = hadamard(k)
    rep, st = run_q3(code, H, q3_params(rng_seed=7))
    assert rep.halted
    assert rep.F_size >= k
    assert determined_by(code, st.B)
    assert len(st.derivations) == int(st.in_b.sum()) == rep.B_size
    replay_all(code, H, st)


def test_run_q3_deterministic():
    code, H = hadamard(5)
    a, sa = run_q3(code, H, q3_params(rng_seed=3))
    b, sb = run_q3(code, H, q3_params(rng_seed=3))
    assert a.dumps(sa) == b.dumps(sb)


def test_run_q3_repetition_halts():
    code, H = repetition(8, 3)
    rep, st = run_q3(code, H, q3_params(rng_seed=1))
    assert rep.halted and rep.F_size >= 1
    replay_all(code, H, st)


def test_run_q3_needs_three_edges():
    code, H = repetition(6, 4)
    with pytest.raises(ArityMismatch):
        run_q3(code, H, q3_params())


def test_zero_iterations_is_not_halted():
    code, H = hadamard(3)
    rep, _ = run_q3(code, H, q3_params(max_outer_iterations=0))
    assert not rep.halted
    assert any(w.startswith("NotHalted") for w in rep.warnings)


def test_report_records_provenance():
    code, H = hadamard(4)
    rep, _ = run_q3(code, H, q3_params())
    p = rep.params
    assert p["alpha"] == "2" and p["beta"] == "1/8"
    assert p["generator"] == "numpy.PCG64"
    assert p["threshold"] == 2.0 and p["clamps"]


def test_general_q_repetition_gentle():
    code, H = repetition(16, 4)
    params = AlgParamsGenQ(delta=Fraction(1), eps=HALF, p=0.05, threshold=4, rng_seed=2)
    rep, st = run_general_q(code, H, params)
    assert rep.halted and rep.F_size >= 1
    replay_all(code, H, st)


def test_general_q_with_p_one_takes_everything():
    code, H = hadamard(4)
    params = AlgParamsGenQ(delta=HALF, eps=THIRD, p=1.0, rng_seed=0)
    rep, st = run_general_q(code, H, params)
    assert rep.halted and rep.outer_iterations == 1
    assert rep.F_size >= code.k
    assert st.B == set(range(code.n))


def test_default_general_params_clamp_p():
    code, H = repetition(12, 4)
    rep, _ = run_general_q(code, H, AlgParamsGenQ(delta=Fraction(1), eps=HALF))
    assert any(w.startswith("DegenerateParams") for w in rep.warnings)


def test_clean_reaches_fixpoint():
    code, H = hadamard(6)
    for t in (1, 2):
        st = prepare_state(code, H, q3_params(rng_seed=4), t)
        assert check_clean_fixpoint(code, H, q3_params(), st) == []


def test_edge_forced_derivations_use_their_edge():
    code, H = hadamard(6)
    _, st = run_q3(code, H, q3_params(rng_seed=5))
    seen = set()
    for der in st.derivations:
        if der.tag == EDGE_FORCED:
            others = set(H.edges[der.edge].vars) - {der.vertex}
            assert others <= seen
        seen.add(der.vertex)


def test_ev_on_hadamard():
    code, H = hadamard(3)
    Vs = set(range(1, 8))
    for x in range(1, 8):
        Ev = compute_Ev(H, Vs, x)
        assert len(Ev) == 3
        assert all(a ^ b == x for a, b in Ev)
    assert compute_Ev(H, set(), 3) == set()
    assert compute_Ev(H, Vs, 0) == set()


def test_heavy_set():
    code, H = hadamard(3)
    Vs = vstar(equivalence_classes(code), math.inf)
    assert heavy_set_A(H, Vs, Fraction(4), Fraction(1)) == set()
    assert heavy_set_A(H, Vs, Fraction(3), Fraction(1)) == set(range(1, 8))
    assert heavy_set_A(H, Vs, 0, Fraction(7, 8)) == set(range(8))


def test_s_step_size_within_three_sigma():
    code, H = hadamard(7)
    params = q3_params(rng_seed=11)
    engine = _engine_for(code, H, params)
    st0 = engine.init_state()
    free = int((~st0.in_b).sum())
    p = engine.cfg.enter_prob
    rng = _rng(11)
    trials = 400
    sizes = [sum(len(s) for s in engine.draw(st0, rng)) for _ in range(trials)]
    mean = free * p
    sigma = math.sqrt(free * p * (1 - p) / trials)
    assert abs(np.mean(sizes) - mean) <= 3 * sigma


def test_entry_probability_edge_cases():
    code, H = hadamard(5)
    st = prepare_state(code, H, q3_params(), 1)
    v = next(u for u in range(code.n) if not st.in_b[u])
    assert estimate_entry_probability(code, H, q3_params(s_prob=1.0), v, st, 5) == 1.0
    assert estimate_entry_probability(code, H, q3_params(s_prob=0.0), v, st, 5) == 0.0
    before = st.in_b.copy()
    a = estimate_entry_probability(code, H, q3_params(), v, st, 40, workers=1)
    b = estimate_entry_probability(code, H, q3_params(), v, st, 40, workers=2)
    assert a == b
    assert (st.in_b == before).all()


def _cascade_oracle(H, v, S, q):
    n_top = {tuple(sorted(set(e.vars) - {v})) for e in H.edges if v in e.vars and e.arity == q}
    sizes = {q - 1: len(n_top)}
    cur = n_top
    for i in range(q - 2, 0, -1):
        coin = S[q - 2 - i]
        cur = {t[:i] for t in cur if t[i] in coin}
        sizes[i] = len(cur)
    return sizes


@pytest.mark.parametrize("seed", [3, 4])
def test_ni_cascade_matches_oracle(seed):
    _, H = repetition(16, 4)
    rng = np.random.Generator(np.random.PCG64(seed))
    S = [set(np.flatnonzero(rng.random(16) < 0.5).tolist()) for _ in range(2)]
    for v in (0, 7, 15):
        got = ni_cascade_diagnostic(H, v, S)
        assert got["N"] == _cascade_oracle(H, v, S, 4)


def test_ni_cascade_extremes():
    _, H = repetition(10, 4)
    everything = [set(range(10))] * 2
    got = ni_cascade_diagnostic(H, 0, everything)
    assert got["N"] == {3: 84, 2: 28, 1: 7}
    empty = ni_cascade_diagnostic(H, 0, [set(), set()])
    assert empty["N"][2] == 0 and empty["N"][1] == 0


def test_ni_cascade_heavy_counts():
    _, H = repetition(10, 4)
    got = ni_cascade_diagnostic(H, 0, [set(range(10))] * 2, thresholds=[1, 1])
    assert got["H"] == {2: 28, 1: 7}


def test_replay_detects_flipped_fixed_value():
    code, H = hadamard(3)
    _, st = run_q3(code, H, q3_params(rng_seed=0))
    w = code.rows[0]
    vals = [(w >> v) & 1 for v in st.F]
    bad = st.copy()
    bad.derivations = [
        replace(d, value=1) if d.tag == INIT_FIXED else d for d in st.derivations
    ]
    with pytest.raises(Contradiction):
        replay_propagate(bad, H, code, vals)


def test_replay_reports_step_of_broken_edge():
    code, H = hadamard(4)
    _, st = run_q3(code, H, q3_params(rng_seed=1))
    vals = [0] * len(st.F)
    vals[-1] = 1
    with pytest.raises(Contradiction) as exc:
        replay_propagate(st, H, code, vals)
    assert 0 <= exc.value.step <= len(st.derivations)


def test_state_roundtrip_through_report():
    import json

    code, H = hadamard(4)
    rep, st = run_q3(code, H, q3_params(rng_seed=2))
    again = FixState.from_report(json.loads(rep.dumps(st)), code.n)
    assert again.F == st.F and again.derivations == st.derivations
    replay_all(code, H, again)


def test_small_parity_tester_with_equalities():
    # a general-q run on mixed arities still replays exactly
    from denseltc.gf2 import LinearCode

    code = LinearCode.from_bitstrings(["110000", "001100", "000011"])
    H = TestHypergraph.build(
        6, 3, [((0, 1), Equality()), ((2, 3), Equality()), ((4, 5), Parity(0))]
    )
    rep, st = run_general_q(code, H, AlgParamsGenQ(delta=THIRD, eps=THIRD, p=0.3, rng_seed=9))
    assert rep.halted
    replay_all(code, H, st)
