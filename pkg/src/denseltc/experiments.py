"""Seeded fixing runs and rate-vs-density sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

from .constructions import duplicate, hadamard, random_linear, repetition, weighted_pad, zero_pad
from .fixing import AlgParamsGenQ, AlgParamsQ3, FixReport, FixState, run_general_q, run_q3, with_seed
from .gf2 import LinearCode, min_distance
from .hypergraph import TestHypergraph, density
from .tester_eval import estimate_eps

FAMILIES = ("hadamard", "repetition", "random")
TRANSFORMS = ("duplicate", "zero_pad", "weighted_pad")
SWEEP_VARS = ("k", "n", "t", "qprime", "seed")

SWEEP_COLUMNS = [
    "instance",
    "sweep",
    "value",
    "seed",
    "n",
    "k",
    "rate",
    "delta",
    "q",
    "edges",
    "density",
    "d",
    "eps",
    "eps_mode",
    "F_size",
    "F_frac",
    "scaled",
    "halted",
    "iterations",
]


@dataclass
class AlgOverrides:
    alpha: str | None = None
    beta: str | None = None
    s_prob: float | None = None
    p: float | None = None
    threshold: float | None = None
    raw_thresholds: bool = False
    max_iter: int = 64
    eps: str | None = None
    trials: int = 2000
    eps_seed: int = 0
    algorithm: str = "auto"


@dataclass
class ExperimentConfig:
    family: str = "hadamard"
    base: dict = field(default_factory=dict)
    transform: str | None = None
    sweep: str = "k"
    values: list = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    overrides: AlgOverrides = field(default_factory=AlgOverrides)

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        ov = AlgOverrides(**obj.pop("overrides", {}))
        cfg = cls(overrides=ov, **obj)
        cfg.validate()
        return cfg

    def to_json_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.transform is not None and self.transform not in TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.sweep not in SWEEP_VARS:
            raise ValueError(f"unknown sweep variable {self.sweep!r}")
        if self.sweep == "seed" and self.values:
            raise ValueError("a seed sweep takes its values from seeds")


def build_instance(family: str, base: dict, transform: str | None = None):
    """Construct (code, hypergraph) from a family name, base params and optional transform."""
    if family == "hadamard":
        code, H = hadamard(int(base.get("k", 3)))
    elif family == "repetition":
        code, H = repetition(int(base.get("n", 8)), int(base.get("q", 3)))
    elif family == "random":
        code, H, _ = random_linear(int(base["n"]), int(base["k"]), int(base.get("seed", 0)))
    else:
        raise ValueError(f"unknown family {family!r}")
    if transform == "duplicate":
        code, H, _ = duplicate(code, H, int(base.get("t", 2)))
    elif transform == "zero_pad":
        code, H, _ = zero_pad(code, H, int(base.get("qprime", 1)))
    elif transform == "weighted_pad":
        code, H, _ = weighted_pad(code, H)
    elif transform is not None:
        raise ValueError(f"unknown transform {transform!r}")
    return code, H


def choose_algorithm(H: TestHypergraph, requested: str = "auto") -> str:
    if requested != "auto":
        return requested
    return "q3" if H.q == 3 and all(e.arity == 3 for e in H.edges) else "general"


def make_params(code: LinearCode, H: TestHypergraph, ov: AlgOverrides, seed: int):
    """Parameters for one run; delta is exact and eps comes from the tester."""
    algorithm = choose_algorithm(H, ov.algorithm)
    delta = min_distance(code)
    tau = delta / 3 if algorithm == "q3" else delta / 2
    if ov.eps is not None:
        eps, eps_mode = Fraction(ov.eps), "given"
    else:
        eps, eps_mode = estimate_eps(code, H, tau, ov.trials, ov.eps_seed)
    common = dict(
        delta=delta,
        eps=eps,
        alpha=None if ov.alpha is None else Fraction(ov.alpha),
        beta=None if ov.beta is None else Fraction(ov.beta),
        threshold=ov.threshold,
        raw_thresholds=ov.raw_thresholds,
        max_outer_iterations=ov.max_iter,
        rng_seed=seed,
    )
    if algorithm == "q3":
        params = AlgParamsQ3(s_prob=ov.s_prob, **common)
    else:
        params = AlgParamsGenQ(p=ov.p, **common)
    return params, eps_mode


def run_fix(code, H, params) -> tuple[FixReport, FixState]:
    if isinstance(params, AlgParamsQ3):
        return run_q3(code, H, params)
    return run_general_q(code, H, params)


def _job(args):
    code, H, params = args
    return run_fix(code, H, params)


def run_many(code, H, params_list: Sequence, workers: int = 1) -> list[tuple[FixReport, FixState]]:
    """Independent runs; output order follows ``params_list`` for any worker count."""
    jobs = [(code, H, p) for p in params_list]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_job, jobs))
    return [_job(j) for j in jobs]


def sweep_rows(cfg: ExperimentConfig, workers: int = 1) -> list[dict]:
    cfg.validate()
    points = [(None, s) for s in cfg.seeds] if cfg.sweep == "seed" else [
        (v, s) for v in cfg.values for s in cfg.seeds
    ]
    rows: list[dict] = []
    for value in sorted({v for v, _ in points}, key=lambda x: (x is not None, x)):
        base = dict(cfg.base)
        if value is not None:
            base[cfg.sweep] = value
        code, H = build_instance(cfg.family, base, cfg.transform)
        seeds = [s for v, s in points if v == value]
        first, eps_mode = make_params(code, H, cfg.overrides, seeds[0])
        results = run_many(code, H, [with_seed(first, s) for s in seeds], workers)
        delta = first.delta
        for seed, (rep, _) in zip(seeds, results):
            d = rep.params["d"]
            frac = Fraction(rep.F_size, code.n)
            scale = math.sqrt(d) if rep.params["kind"] == "q3" else d
            rows.append(
                {
                    "instance": _instance_id(cfg, value),
                    "sweep": cfg.sweep,
                    "value": "" if value is None else value,
                    "seed": seed,
                    "n": code.n,
                    "k": code.k,
                    "rate": str(code.rate),
                    "delta": str(delta),
                    "q": H.q,
                    "edges": len(H.edges),
                    "density": str(density(H)),
                    "d": repr(d),
                    "eps": str(rep.eps),
                    "eps_mode": eps_mode,
                    "F_size": rep.F_size,
                    "F_frac": str(frac),
                    "scaled": repr(float(frac) * scale),
                    "halted": int(rep.halted),
                    "iterations": rep.outer_iterations,
                }
            )
    return rows


def _instance_id(cfg: ExperimentConfig, value) -> str:
    name = cfg.family if cfg.transform is None else f"{cfg.family}+{cfg.transform}"
    fixed = ",".join(f"{k}={v}" for k, v in sorted(cfg.base.items()) if k != cfg.sweep)
    parts = [name]
    if fixed:
        parts.append(fixed)
    if value is not None:
        parts.append(f"{cfg.sweep}={value}")
    return ":".join(parts)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def median_by_value(rows: list[dict], column: str) -> dict:
    """Median of a numeric column grouped by sweep value."""
    groups: dict = {}
    for r in rows:
        groups.setdefault(r["value"], []).append(float(Fraction(r[column])))
    return {v: statistics.median(xs) for v, xs in groups.items()}


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
