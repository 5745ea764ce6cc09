"""Command-line front end.

Exit codes: 0 success, 2 input error (or a failed ``verify``), 3 when some
fixing run did not halt.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from .constructions import (
    construction_receipt,
    duplicate,
    hadamard,
    random_linear,
    repetition,
    weighted_pad,
    zero_pad,
)
from .experiments import (
    FAMILIES,
    SWEEP_VARS,
    TRANSFORMS,
    AlgOverrides,
    ExperimentConfig,
    dumps_json,
    make_params,
    rows_to_csv,
    run_many,
    sweep_rows,
)
from .fixing import FixState, replay_propagate, with_seed
from .gf2 import LinearCode, equivalence_classes
from .hypergraph import TestHypergraph, validate_against_code
from .tester_eval import exact_profile, sampled_profile

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_HALTED = 3

VERIFY_CODEWORDS = 50


class InputError(Exception):
    pass


# -- helpers ----------------------------------------------------------------


def write_atomic(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_seeds(text: str) -> list[int]:
    """``"0-9"``, ``"1,4,7"`` or a mix like ``"0-2,10"``; empty string gives []."""
    seeds: list[int] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            a, b = int(lo), int(hi)
            if b < a:
                raise ValueError(f"bad seed range {part!r}")
            seeds.extend(range(a, b + 1))
        else:
            seeds.append(int(part))
    if any(s < 0 for s in seeds):
        raise ValueError("seeds must be nonnegative")
    return seeds


def parse_taus(text: str) -> list[Fraction]:
    taus = [Fraction(t.strip()) for t in text.split(",") if t.strip()]
    if not taus or any(not 0 <= t <= 1 for t in taus):
        raise ValueError("taus must be a nonempty list of values in [0, 1]")
    return taus


def load_pair(code_path: str, hg_path: str) -> tuple[LinearCode, TestHypergraph]:
    code = LinearCode.loads(Path(code_path).read_text(encoding="utf-8"))
    H = TestHypergraph.loads(Path(hg_path).read_text(encoding="utf-8"))
    if H.n != code.n:
        raise InputError(f"hypergraph has n={H.n} but the code has n={code.n}")
    return code, H


def write_pair(out: Path, code: LinearCode, H: TestHypergraph, receipt) -> None:
    write_atomic(out / "code.json", code.dumps())
    write_atomic(out / "hypergraph.json", H.dumps())
    write_atomic(out / "receipt.json", receipt.dumps())


def overrides_from_args(args) -> AlgOverrides:
    return AlgOverrides(
        alpha=args.alpha,
        beta=args.beta,
        s_prob=args.s_prob,
        p=args.p,
        threshold=args.threshold,
        raw_thresholds=args.raw_thresholds,
        max_iter=args.max_iter,
        eps=args.eps,
        trials=args.trials,
        algorithm=args.algorithm,
    )


def seeds_from_args(args) -> list[int]:
    if args.seeds is not None:
        return parse_seeds(args.seeds)
    return [args.seed]


# -- subcommands ------------------------------------------------------------


def cmd_construct(args) -> int:
    if args.family not in FAMILIES:
        raise InputError(f"unknown family {args.family!r}; expected one of {', '.join(FAMILIES)}")
    if args.family == "hadamard":
        code, H = hadamard(args.k)
        params, notes = {"k": args.k}, []
    elif args.family == "repetition":
        if args.n is None:
            raise InputError("repetition needs --n")
        code, H = repetition(args.n, args.q)
        params, notes = {"n": args.n, "q": args.q}, []
    else:
        if args.n is None or args.k is None:
            raise InputError("random needs --n and --k")
        code, H, notes = random_linear(args.n, args.k, args.seed)
        params = {"k": args.k, "n": args.n, "seed": args.seed}
    receipt = construction_receipt(args.family, params, code, H, notes)
    write_pair(Path(args.out), code, H, receipt)
    print(f"{args.family}: n={code.n} k={code.k} edges={len(H.edges)}")
    return EXIT_OK


def cmd_transform(args) -> int:
    code, H = load_pair(args.code, args.hypergraph)
    if args.name == "duplicate":
        code, H, receipt = duplicate(code, H, args.t)
    elif args.name == "zero_pad":
        code, H, receipt = zero_pad(code, H, args.qprime)
    else:
        code, H, receipt = weighted_pad(code, H)
    write_pair(Path(args.out), code, H, receipt)
    status = "ok" if receipt.ok else "CHECK FAILED"
    print(f"{args.name}: n={code.n} k={code.k} edges={len(H.edges)} receipt {status}")
    return EXIT_OK if receipt.ok else EXIT_INPUT


def cmd_fix(args) -> int:
    code, H = load_pair(args.code, args.hypergraph)
    seeds = seeds_from_args(args)
    if not seeds:
        raise InputError("no seeds given")
    base, eps_mode = make_params(code, H, overrides_from_args(args), seeds[0])
    results = run_many(code, H, [with_seed(base, s) for s in seeds], args.workers)
    out = Path(args.out)
    for seed, (rep, st) in zip(seeds, results):
        write_atomic(out / f"fix_seed{seed}.json", rep.dumps(st))
    sizes = [rep.F_size for rep, _ in results]
    summary = {
        "all_halted": all(rep.halted for rep, _ in results),
        "eps": str(base.eps),
        "eps_mode": eps_mode,
        "median_F_size": statistics.median(sizes),
        "n": code.n,
        "runs": [
            {
                "B_size": rep.B_size,
                "F_size": rep.F_size,
                "halted": rep.halted,
                "iterations": rep.outer_iterations,
                "seed": seed,
            }
            for seed, (rep, _) in zip(seeds, results)
        ],
        "schema_version": 1,
    }
    write_atomic(out / "fix_summary.json", dumps_json(summary))
    print(f"{'seed':>6} {'halted':>6} {'iters':>5} {'|F|':>6} {'|B|':>6}")
    for r in summary["runs"]:
        print(f"{r['seed']:>6} {str(r['halted']):>6} {r['iterations']:>5} {r['F_size']:>6} {r['B_size']:>6}")
    print(f"median |F| = {summary['median_F_size']}")
    return EXIT_OK if summary["all_halted"] else EXIT_NOT_HALTED


def cmd_soundness(args) -> int:
    code, H = load_pair(args.code, args.hypergraph)
    taus = parse_taus(args.taus)
    if args.mode == "exhaustive":
        prof = exact_profile(code, H, taus)
    else:
        prof = sampled_profile(code, H, taus, args.trials, args.seed)
    out = Path(args.out)
    write_atomic(out / "profile.csv", prof.to_csv())
    write_atomic(out / "profile.json", prof.dumps())
    sys.stdout.write(prof.to_csv())
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_json_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    else:
        base = {
            k: getattr(args, k)
            for k in ("k", "n", "q", "t", "qprime")
            if getattr(args, k) is not None
        }
        if args.family == "random":
            base["seed"] = args.instance_seed
        values = [] if args.sweep == "seed" else parse_seeds(args.values or "")
        cfg = ExperimentConfig(
            family=args.family,
            base=base,
            transform=args.transform,
            sweep=args.sweep,
            values=values,
            seeds=seeds_from_args(args),
            overrides=overrides_from_args(args),
        )
        cfg.validate()
    rows = sweep_rows(cfg, args.workers)
    out = Path(args.out)
    write_atomic(out / "sweep.csv", rows_to_csv(rows))
    write_atomic(out / "sweep_config.json", dumps_json({**cfg.to_json_dict(), "schema_version": 1}))
    sys.stdout.write(rows_to_csv(rows))
    return EXIT_OK if all(r["halted"] for r in rows) else EXIT_NOT_HALTED


def cmd_verify(args) -> int:
    code, H = load_pair(args.code, args.hypergraph)
    checks: dict[str, bool] = {}
    viol = validate_against_code(H, code)
    checks["codewords satisfy every edge"] = viol is None
    classes = equivalence_classes(code)
    covered = sorted(v for c in classes.classes for v in c)
    checks["equivalence classes partition the coordinates"] = covered == list(range(code.n))
    if args.report:
        obj = json.loads(Path(args.report).read_text(encoding="utf-8"))
        st = FixState.from_report(obj, code.n)
        checks["|F| >= k"] = len(st.F) >= code.k
        rng = np.random.Generator(np.random.PCG64(args.seed))
        ok = True
        for _ in range(VERIFY_CODEWORDS):
            msg = int.from_bytes(rng.bytes((code.k + 7) // 8), "little") & ((1 << code.k) - 1)
            w = code.encode(msg)
            vals = [(w >> v) & 1 for v in st.F]
            if replay_propagate(st, H, code, vals) != w:
                ok = False
                break
        checks[f"replay rebuilds {VERIFY_CODEWORDS} random codewords"] = ok
    for name, passed in checks.items():
        print(f"{'PASS' if passed else 'FAIL'} {name}")
    if args.out:
        write_atomic(Path(args.out) / "verify.json", dumps_json({"checks": checks, "schema_version": 1}))
    return EXIT_OK if all(checks.values()) else EXIT_INPUT


# -- parser -----------------------------------------------------------------


def _add_alg_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("algorithm overrides")
    g.add_argument("--algorithm", choices=["auto", "q3", "general"], default="auto")
    g.add_argument("--alpha", help="rational, e.g. 3/2")
    g.add_argument("--beta", help="rational, e.g. 1/8")
    g.add_argument("--s-prob", type=float, dest="s_prob", help="S-step probability (q=3)")
    g.add_argument("--p", type=float, help="coin probability (general q)")
    g.add_argument("--threshold", type=float, help="component/class size threshold")
    g.add_argument("--raw-thresholds", action="store_true", dest="raw_thresholds")
    g.add_argument("--max-iter", type=int, default=64, dest="max_iter")
    g.add_argument("--eps", help="soundness eps; estimated from the tester if omitted")
    g.add_argument("--trials", type=int, default=2000, help="samples for eps estimation")


def _add_seed_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", help="list or ranges, e.g. 0-9 or 0,3,5")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="denseltc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build a code and its tester")
    p.add_argument("family", help=f"one of {', '.join(FAMILIES)}")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n", type=int)
    p.add_argument("--q", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("transform", help="apply a transform to code/hypergraph files")
    p.add_argument("name", choices=TRANSFORMS)
    p.add_argument("--code", required=True)
    p.add_argument("--hypergraph", required=True)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--qprime", type=int, default=1)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("fix", help="run the fixing algorithm over seeds")
    p.add_argument("--code", required=True)
    p.add_argument("--hypergraph", required=True)
    _add_seed_flags(p)
    _add_alg_flags(p)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_fix)

    p = sub.add_parser("soundness", help="(tau, eps) profile of a tester")
    p.add_argument("--code", required=True)
    p.add_argument("--hypergraph", required=True)
    p.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")
    p.add_argument("--taus", default="1/6")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_soundness)

    p = sub.add_parser("sweep", help="fixing runs across a family of instances")
    p.add_argument("--config", help="JSON ExperimentConfig; replaces the flags below")
    p.add_argument("--family", choices=FAMILIES, default="hadamard")
    p.add_argument("--transform", choices=TRANSFORMS)
    p.add_argument("--sweep", choices=SWEEP_VARS, default="k")
    p.add_argument("--values", help="sweep values, e.g. 4-9")
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--qprime", type=int)
    p.add_argument("--instance-seed", type=int, default=0, dest="instance_seed")
    _add_seed_flags(p)
    _add_alg_flags(p)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check invariants of code/hypergraph (and report) files")
    p.add_argument("--code", required=True)
    p.add_argument("--hypergraph", required=True)
    p.add_argument("--report", help="fix_seed*.json to replay")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (InputError, ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"denseltc {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
