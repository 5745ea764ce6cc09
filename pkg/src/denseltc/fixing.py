"""Randomized coordinate fixing: grow a determining set B while recording, for
every coordinate, how its value follows from the free set F.

Two drivers share one engine: ``run_q3`` (3-query testers, with multiplicity
handling) and ``run_general_q`` (q-query testers, q-2 coins per vertex).
Every coordinate entering B gets exactly one derivation; replaying the log
from values on F rebuilds the codeword, which is the constructive form of
|C| <= 2^|F|.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .gf2 import (
    EquivClasses,
    LinearCode,
    complete_codeword,
    equivalence_classes,
    restricted_rank,
    support_mask,
)
from .hypergraph import (
    ArityMismatch,
    TestHypergraph,
    connected_components,
    density,
    evaluate_edge,
    forced_value,
    induced_graph,
)

GENERATOR = "numpy.PCG64"
MAX_REDRAWS = 1000

# derivation tags
INIT_FIXED = "init_fixed"
INIT_CLASS_REP = "init_class_rep"
INIT_CLASS_MEMBER = "init_class_member"
EDGE_FORCED = "edge_forced"
COMPONENT_REP = "component_rep"
COMPONENT_MEMBER = "component_member"
EQUIVALENT_TO = "equivalent_to"
SAMPLED = "sampled"

FREE_TAGS = frozenset({INIT_CLASS_REP, COMPONENT_REP, SAMPLED})


class NotHalted(RuntimeError):
    pass


class Contradiction(ValueError):
    def __init__(self, step: int, message: str) -> None:
        super().__init__(f"step {step}: {message}")
        self.step = step


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & (2**64 - 1)))


# -- parameters -------------------------------------------------------------


@dataclass(frozen=True)
class AlgParamsQ3:
    """Parameters of the 3-query algorithm.  ``None`` means the default:
    alpha = 3*eps/delta, beta = alpha/16, s_prob = d^(-1/2) clamped to (0, 1],
    threshold = max(2, ceil(beta*sqrt(d))) unless ``raw_thresholds``."""

    delta: Fraction
    eps: Fraction
    alpha: Fraction | None = None
    beta: Fraction | None = None
    s_prob: float | None = None
    threshold: float | None = None
    raw_thresholds: bool = False
    max_outer_iterations: int = 64
    rng_seed: int = 0
    oversize_slack: float = 1.0


@dataclass(frozen=True)
class AlgParamsGenQ:
    """Parameters of the general-q algorithm.  Defaults: alpha = eps/(delta/2),
    beta = alpha/6^q, p = min(1, 6^q/(alpha*d)), threshold = max(2, ceil(beta*d))."""

    delta: Fraction
    eps: Fraction
    q: int | None = None
    alpha: Fraction | None = None
    beta: Fraction | None = None
    p: float | None = None
    threshold: float | None = None
    raw_thresholds: bool = False
    max_outer_iterations: int = 64
    rng_seed: int = 0
    oversize_slack: float = 1.0


@dataclass(frozen=True)
class _Resolved:
    kind: str  # "q3" or "general"
    q: int
    Delta: Fraction  # |E|/n
    d: float  # density used by the formulas
    alpha: Fraction
    beta: Fraction
    coin_p: float  # per-coin head probability
    coins: int
    threshold: float
    raw_threshold: float
    clamps: tuple[str, ...]
    max_outer_iterations: int
    seed: int
    slack: float

    @property
    def enter_prob(self) -> float:
        return 1.0 - (1.0 - self.coin_p) ** self.coins

    def provenance(self) -> dict:
        return {
            "alpha": str(self.alpha),
            "beta": str(self.beta),
            "clamps": list(self.clamps),
            "coin_p": self.coin_p,
            "coins": self.coins,
            "d": self.d,
            "density": str(self.Delta),
            "generator": GENERATOR,
            "kind": self.kind,
            "max_outer_iterations": self.max_outer_iterations,
            "oversize_slack": self.slack,
            "q": self.q,
            "raw_threshold": self.raw_threshold,
            "threshold": self.threshold,
        }


def _threshold(raw: float, override, raw_mode: bool, clamps: list[str]) -> float:
    if override is not None:
        return float(override)
    if raw_mode:
        return raw
    t = max(2, math.ceil(raw - 1e-12))
    if t != raw:
        clamps.append(f"threshold {raw:.6g} -> {t}")
    return float(t)


def resolve_q3(H: TestHypergraph, params: AlgParamsQ3) -> _Resolved:
    Delta = density(H)
    d = float(Delta)
    clamps: list[str] = []
    alpha = params.alpha if params.alpha is not None else 3 * Fraction(params.eps) / Fraction(params.delta)
    beta = params.beta if params.beta is not None else Fraction(alpha) / 16
    if params.s_prob is not None:
        s = float(params.s_prob)
        if not 0 <= s <= 1:
            raise ValueError("s_prob must lie in [0, 1]")
    else:
        s = 1.0 / math.sqrt(d) if d > 0 else 1.0
        if s > 1.0:
            clamps.append(f"s_prob {s:.6g} -> 1 (density below 1)")
            s = 1.0
    raw = float(beta) * math.sqrt(d)
    thr = _threshold(raw, params.threshold, params.raw_thresholds, clamps)
    return _Resolved(
        "q3", 3, Delta, d, Fraction(alpha), Fraction(beta), s, 1, thr, raw, tuple(clamps),
        params.max_outer_iterations, params.rng_seed, params.oversize_slack,
    )


def resolve_general(H: TestHypergraph, params: AlgParamsGenQ) -> _Resolved:
    q = params.q or H.q
    Delta = density(H)
    d = float(Delta) / float(H.n) ** (q - 2)
    clamps: list[str] = []
    alpha = params.alpha if params.alpha is not None else Fraction(params.eps) / (Fraction(params.delta) / 2)
    beta = params.beta if params.beta is not None else Fraction(alpha) / 6**q
    if params.p is not None:
        p = float(params.p)
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
    else:
        denom = float(alpha) * d
        p = 6.0**q / denom if denom > 0 else math.inf
        if p >= 1.0:
            clamps.append(f"DegenerateParams: p {p:.6g} -> 1")
            p = 1.0
    raw = float(beta) * d
    thr = _threshold(raw, params.threshold, params.raw_thresholds, clamps)
    return _Resolved(
        "general", q, Delta, d, Fraction(alpha), Fraction(beta), p, max(q - 2, 1), thr, raw,
        tuple(clamps), params.max_outer_iterations, params.rng_seed, params.oversize_slack,
    )


# -- state ------------------------------------------------------------------


@dataclass(frozen=True)
class Derivation:
    """How one coordinate got its value.

    ``ref`` is the class representative, the equivalent member already in B,
    or the component representative; ``edge`` is the hyperedge used to force
    the value; ``value`` is the constant of a fixed coordinate.
    """

    vertex: int
    tag: str
    ref: int | None = None
    edge: int | None = None
    value: int | None = None
    iteration: int | None = None

    def to_json_dict(self) -> dict:
        out = {"tag": self.tag, "vertex": self.vertex}
        for name in ("ref", "edge", "value", "iteration"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        return out


@dataclass
class FixState:
    n: int
    in_b: np.ndarray
    F: list[int] = field(default_factory=list)
    t: int = 0
    derivations: list[Derivation] = field(default_factory=list)
    last_partition: list[list[int]] | None = None

    @property
    def B(self) -> set[int]:
        return set(int(v) for v in np.flatnonzero(self.in_b))

    def copy(self) -> "FixState":
        return FixState(self.n, self.in_b.copy(), list(self.F), self.t, list(self.derivations))

    def add(self, der: Derivation) -> None:
        v = der.vertex
        if self.in_b[v]:
            raise AssertionError(f"vertex {v} derived twice")
        self.in_b[v] = True
        self.derivations.append(der)
        if der.tag in FREE_TAGS:
            self.F.append(v)

    @classmethod
    def from_report(cls, obj: dict, n: int) -> "FixState":
        """Rebuild the derivation log from a report written with its state."""
        st = cls(n, np.zeros(n, dtype=bool))
        for d in obj["derivations"]:
            st.add(Derivation(**d))
        if st.F != list(obj["F"]):
            raise ValueError("report F does not match its derivation log")
        return st


@dataclass
class FixReport:
    halted: bool
    outer_iterations: int
    F_size: int
    B_size: int
    trace: list[dict]
    seed: int
    delta: Fraction
    eps: Fraction
    params: dict
    redraws: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def code_size_bound(self) -> int:
        return 2**self.F_size

    def to_json_dict(self, state: FixState | None = None) -> dict:
        out = {
            "B_size": self.B_size,
            "F_size": self.F_size,
            "code_size_bound_log2": self.F_size,
            "delta": str(self.delta),
            "eps": str(self.eps),
            "halted": self.halted,
            "outer_iterations": self.outer_iterations,
            "params": self.params,
            "redraws": self.redraws,
            "schema_version": 1,
            "seed": self.seed,
            "trace": self.trace,
            "warnings": self.warnings,
        }
        if state is not None:
            out["F"] = list(state.F)
            out["derivations"] = [d.to_json_dict() for d in state.derivations]
        return out

    def dumps(self, state: FixState | None = None) -> str:
        return json.dumps(self.to_json_dict(state), sort_keys=True, indent=2) + "\n"


# -- engine -----------------------------------------------------------------


class _Engine:
    def __init__(self, code: LinearCode, H: TestHypergraph, cfg: _Resolved) -> None:
        if H.n != code.n:
            raise ValueError(f"hypergraph has n={H.n}, code has n={code.n}")
        self.code = code
        self.H = H
        self.cfg = cfg
        self.classes: EquivClasses | None = equivalence_classes(code) if cfg.kind == "q3" else None
        self.redraws = 0

    # Init

    def init_state(self) -> FixState:
        st = FixState(self.code.n, np.zeros(self.code.n, dtype=bool))
        if self.cfg.kind != "q3":
            return st
        ec = self.classes
        for v in sorted(ec.fixed):
            st.add(Derivation(v, INIT_FIXED, value=0))
        for cls in ec.classes:
            if cls[0] in ec.fixed or len(cls) < self.cfg.threshold:
                continue
            rep = cls[0]
            st.add(Derivation(rep, INIT_CLASS_REP))
            for v in cls[1:]:
                st.add(Derivation(v, INIT_CLASS_MEMBER, ref=rep))
        return st

    # Clean

    def _edge_closure(self, st: FixState) -> bool:
        H = self.H
        changed = False
        while H.edges:
            outside = H.outside_counts(st.in_b)
            hits = np.flatnonzero(outside == 1)
            if hits.size == 0:
                break
            added = False
            for i in hits:
                # a vertex reached by two edges in one sweep keeps the first
                v = next((u for u in H.edges[i].vars if not st.in_b[u]), None)
                if v is None:
                    continue
                st.add(Derivation(v, EDGE_FORCED, edge=int(i)))
                added = True
            if not added:
                break
            changed = True
        return changed

    def _components(self, st: FixState) -> bool:
        G = induced_graph(self.H, np.flatnonzero(st.in_b))
        adj: dict[int, list[tuple[int, int]]] = {}
        for (a1, a2), pre in sorted(G.preimages.items()):
            adj.setdefault(a1, []).append((a2, pre[0]))
            adj.setdefault(a2, []).append((a1, pre[0]))
        seen: set[int] = set()
        to_add: list[list[Derivation]] = []
        candidates = sorted(adj) if self.cfg.threshold > 1 else np.flatnonzero(~st.in_b).tolist()
        for v in candidates:
            if v in seen:
                continue
            seen.add(v)
            ders = [Derivation(v, COMPONENT_REP)]
            queue = [v]
            head = 0
            while head < len(queue):
                u = queue[head]
                head += 1
                for w, e in adj.get(u, ()):
                    if w not in seen:
                        seen.add(w)
                        queue.append(w)
                        ders.append(Derivation(w, COMPONENT_MEMBER, ref=v, edge=e))
            if len(ders) >= self.cfg.threshold:
                to_add.append(ders)
        for ders in to_add:
            for der in ders:
                st.add(der)
        return bool(to_add)

    def _equivalents(self, st: FixState) -> bool:
        ec = self.classes
        changed = False
        for cls in ec.classes:
            inside = [v for v in cls if st.in_b[v]]
            if not inside or len(inside) == len(cls):
                continue
            for v in cls:
                if not st.in_b[v]:
                    st.add(Derivation(v, EQUIVALENT_TO, ref=inside[0]))
            changed = True
        return changed

    def clean(self, st: FixState) -> None:
        while True:
            changed = self._edge_closure(st)
            changed |= self._components(st)
            if self.cfg.kind == "q3":
                changed |= self._equivalents(st)
            if not changed:
                return

    # S-step

    def draw(self, st: FixState, rng: np.random.Generator) -> list[list[int]]:
        """Coin outcomes for vertices outside B: one list per coin (S_1..S_c)."""
        free = np.flatnonzero(~st.in_b)
        cfg = self.cfg
        cap = 2.0 * st.n * cfg.enter_prob * (1.0 + cfg.slack)
        for attempt in range(MAX_REDRAWS + 1):
            heads = rng.random((free.size, cfg.coins)) < cfg.coin_p
            size = int(heads.any(axis=1).sum())
            if size <= cap:
                break
            self.redraws += 1
        return [[int(v) for v in free[heads[:, j]]] for j in range(cfg.coins)]

    def s_step(self, st: FixState, rng: np.random.Generator) -> int:
        parts = self.draw(st, rng)
        st.last_partition = parts
        chosen = sorted(set().union(*parts)) if parts else []
        for v in chosen:
            st.add(Derivation(v, SAMPLED, iteration=st.t))
        return len(chosen)

    def determined(self, st: FixState) -> bool:
        mask = support_mask(int(v) for v in np.flatnonzero(st.in_b))
        return restricted_rank(self.code, mask) == self.code.k

    # driver

    def run(self, delta: Fraction, eps: Fraction) -> tuple[FixReport, FixState]:
        cfg = self.cfg
        rng = _rng(cfg.seed)
        st = self.init_state()
        trace = []
        halted = False
        for t in range(1, cfg.max_outer_iterations + 1):
            st.t = t
            self.clean(st)
            b_t = int(st.in_b.sum())
            s = self.s_step(st, rng)
            trace.append({"B_t": b_t, "F": len(st.F), "S": s, "iteration": t})
            if self.determined(st):
                halted = True
                break
        warnings = [c for c in cfg.clamps if c.startswith("DegenerateParams")]
        if not halted:
            warnings.append(f"NotHalted: {cfg.max_outer_iterations} outer iterations")
        report = FixReport(
            halted=halted,
            outer_iterations=len(trace),
            F_size=len(st.F),
            B_size=int(st.in_b.sum()),
            trace=trace,
            seed=cfg.seed,
            delta=Fraction(delta),
            eps=Fraction(eps),
            params=cfg.provenance(),
            redraws=self.redraws,
            warnings=warnings,
        )
        return report, st


def run_q3(code: LinearCode, H: TestHypergraph, params: AlgParamsQ3) -> tuple[FixReport, FixState]:
    """Fixing algorithm for 3-query testers.

    Init puts fixed coordinates and every multiplicity class of size >= the
    threshold into B (one representative per class into F).  Each outer
    iteration runs Clean to a fixpoint (edge closure, large components of G_B,
    equivalent coordinates), then an S-step, then halts if B determines the
    codeword.
    """
    if any(e.arity != 3 for e in H.edges):
        raise ArityMismatch("run_q3 needs every edge to have arity 3")
    engine = _Engine(code, H, resolve_q3(H, params))
    return engine.run(params.delta, params.eps)


def run_general_q(
    code: LinearCode, H: TestHypergraph, params: AlgParamsGenQ
) -> tuple[FixReport, FixState]:
    """Fixing algorithm for q-query testers: B and F start empty, Clean uses edge
    closure and components of G_B, and each free vertex tosses q-2 coins."""
    q = params.q or H.q
    if not 3 <= q <= 8:
        raise ValueError("run_general_q needs 3 <= q <= 8")
    engine = _Engine(code, H, resolve_general(H, params))
    return engine.run(params.delta, params.eps)


def _engine_for(code, H, params) -> _Engine:
    if isinstance(params, AlgParamsQ3):
        return _Engine(code, H, resolve_q3(H, params))
    return _Engine(code, H, resolve_general(H, params))


# -- diagnostics ------------------------------------------------------------


def vstar(classes: EquivClasses, threshold: float) -> set[int]:
    """Coordinates whose class is too small for Init to sweep into B."""
    return {v for cls in classes.classes if len(cls) < threshold for v in cls}


def compute_Ev(H: TestHypergraph, Vstar, v: int) -> set[tuple[int, int]]:
    """Pairs {u, u'} inside V* that close a 3-edge with v."""
    Vstar = set(Vstar)
    out = set()
    for i in H.incidence[v]:
        e = H.edges[i]
        if e.arity != 3:
            continue
        u1, u2 = (u for u in e.vars if u != v)
        if u1 in Vstar and u2 in Vstar:
            out.add((u1, u2))
    return out


def heavy_set_A(H: TestHypergraph, Vstar, alpha, d) -> set[int]:
    """Vertices v with |E_v| >= alpha*d."""
    bound = float(alpha) * float(d)
    return {v for v in range(H.n) if len(compute_Ev(H, Vstar, v)) >= bound}


def check_clean_fixpoint(code: LinearCode, H: TestHypergraph, params, st: FixState) -> list[str]:
    """Post-condition scan after Clean; returns the violated conditions."""
    engine = _engine_for(code, H, params)
    problems = []
    if H.edges and np.any(H.outside_counts(st.in_b) == 1):
        problems.append("an edge has all but one vertex in B")
    G = induced_graph(H, np.flatnonzero(st.in_b))
    big = [c for c in connected_components(G) if len(c) >= engine.cfg.threshold and len(c) > 1]
    if big:
        problems.append(f"G_B component of size {len(big[0])} survives")
    if engine.cfg.kind == "q3":
        for cls in engine.classes.classes:
            flags = {bool(st.in_b[v]) for v in cls}
            if len(flags) == 2:
                problems.append(f"class {cls} is split by B")
                break
    return problems


def prepare_state(code, H, params, iterations: int) -> FixState:
    """State just before the S-step of outer iteration ``iterations``.

    Replays the run's randomness for the earlier S-steps, then runs Clean.
    """
    engine = _engine_for(code, H, params)
    rng = _rng(engine.cfg.seed)
    st = engine.init_state()
    for t in range(1, iterations + 1):
        st.t = t
        engine.clean(st)
        if t == iterations:
            break
        engine.s_step(st, rng)
    return st


def _entry_trial(args) -> bool:
    code, H, params, v, state, seed = args
    engine = _engine_for(code, H, params)
    st = state.copy()
    engine.s_step(st, _rng(seed))
    engine.clean(st)
    return bool(st.in_b[v])


def estimate_entry_probability(
    code: LinearCode,
    H: TestHypergraph,
    params,
    v: int,
    state: FixState,
    trials: int,
    workers: int = 1,
) -> float:
    """Fraction of independent S-steps (each followed by Clean) that put ``v`` in B.

    Trial ``i`` uses seed ``params.rng_seed ^ i``; ``state`` is not modified.
    """
    if state.in_b[v]:
        raise ValueError(f"vertex {v} is already in B")
    if trials <= 0:
        return 0.0
    jobs = [(code, H, params, v, state, params.rng_seed ^ i) for i in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            hits = list(pool.map(_entry_trial, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        hits = [_entry_trial(j) for j in jobs]
    return sum(hits) / trials


def ni_cascade_diagnostic(
    H: TestHypergraph,
    v: int,
    S_partition: Sequence[Sequence[int]],
    thresholds: Sequence[float] | None = None,
    alpha=None,
    d=None,
) -> dict:
    """Sizes of the filtered edge sets N_{q-1}(v), ..., N_1(v) and heavy sets H_i(v).

    Tuples are ordered ascending.  N_i keeps (u_1..u_i) when some x with
    (u_1..u_i, x) in N_{i+1} lies in S_{q-1-i}.  An i-tuple is heavy when at
    least ``thresholds[i-1]`` distinct x extend it inside N_{i+1}; by default
    the threshold is alpha*d / (2 * 5^(q-2-i)).
    """
    q = H.q
    if len(S_partition) != q - 2:
        raise ValueError(f"need {q - 2} coin sets, got {len(S_partition)}")
    S = [set(s) for s in S_partition]
    if thresholds is None:
        if alpha is None or d is None:
            thresholds = [math.inf] * (q - 2)
        else:
            thresholds = [float(alpha) * float(d) / (2 * 5 ** (q - 2 - i)) for i in range(1, q - 1)]
    N: dict[int, set[tuple[int, ...]]] = {}
    N[q - 1] = {
        tuple(u for u in H.edges[i].vars if u != v)
        for i in H.incidence[v]
        if H.edges[i].arity == q
    }
    heavy: dict[int, int] = {}
    for i in range(q - 2, 0, -1):
        ext: dict[tuple[int, ...], set[int]] = {}
        for tup in N[i + 1]:
            ext.setdefault(tup[:i], set()).add(tup[i])
        heavy[i] = sum(1 for xs in ext.values() if len(xs) >= thresholds[i - 1])
        coin = S[q - 2 - i]  # S_{q-1-i}
        N[i] = {head for head, xs in ext.items() if xs & coin}
    return {
        "N": {i: len(N[i]) for i in sorted(N, reverse=True)},
        "H": {i: heavy[i] for i in sorted(heavy, reverse=True)},
    }


# -- replay -----------------------------------------------------------------


def replay_propagate(
    state: FixState, H: TestHypergraph, code: LinearCode, f_values: Sequence[int]
) -> int:
    """Rebuild the codeword from its values on F by walking the derivation log.

    Raises Contradiction when a derived value breaks an edge whose vertices are
    all assigned, or when the values on B match no codeword.
    """
    if len(f_values) != len(state.F):
        raise ValueError(f"need {len(state.F)} values on F, got {len(f_values)}")
    f_at = dict(zip(state.F, (int(b) & 1 for b in f_values)))
    val = np.full(H.n + 1, -1, dtype=np.int8)
    step_of = np.full(H.n + 1, -1, dtype=np.int64)
    for step, der in enumerate(state.derivations):
        v = der.vertex
        if der.tag in FREE_TAGS:
            b = f_at[v]
        elif der.tag == INIT_FIXED:
            b = der.value
        elif der.tag in (INIT_CLASS_MEMBER, EQUIVALENT_TO):
            b = int(val[der.ref])
            if b < 0:
                raise Contradiction(step, f"vertex {der.ref} used before assignment")
        elif der.tag in (EDGE_FORCED, COMPONENT_MEMBER):
            e = H.edges[der.edge]
            others = [int(val[u]) for u in e.vars if u != v]
            if any(o < 0 for o in others):
                raise Contradiction(step, f"edge {der.edge} used before its vertices are set")
            forced = forced_value(e.constraint, e.vars.index(v), others)
            if forced is None:
                raise Contradiction(step, f"edge {der.edge} has no consistent completion")
            b = forced
        else:
            raise ValueError(f"unknown derivation tag {der.tag!r}")
        val[v] = b
        step_of[v] = step

    # every edge lying inside B must hold; report the step that completed it
    if H.edges:
        arity_mask = np.arange(H.var_array.shape[1])[None, :] < H.arities[:, None]
        assigned = np.where(arity_mask, val[H.var_array] >= 0, True).all(axis=1)
        bad_steps = []
        for i in np.flatnonzero(assigned):
            e = H.edges[i]
            if not evaluate_edge(e.constraint, [int(val[u]) for u in e.vars]):
                bad_steps.append(int(max(step_of[u] for u in e.vars)))
        if bad_steps:
            s = min(bad_steps)
            raise Contradiction(s, "a derived value violates an edge inside B")

    mask = 0
    values = 0
    for v in np.flatnonzero(val[: H.n] >= 0):
        mask |= 1 << int(v)
        if val[v]:
            values |= 1 << int(v)
    word = complete_codeword(code, mask, values)
    if word is None:
        raise Contradiction(len(state.derivations), "values on B match no codeword")
    return word


def with_seed(params, seed: int):
    return replace(params, rng_seed=seed)
