"""``robust-order`` command line: instance generation, benchmarks and clustering.

Seeds: every trial ``t`` of a run with ``--seed s`` draws its randomness from
``SeedSequence(s, spawn_key=(t,))``. The first two 32-bit words of that
sequence seed the instance generator and the algorithm respectively, so a
trial's result depends only on ``(s, t)`` and not on scheduling.

Exit codes: 0 success, 2 invalid input or usage, 3 resource guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .datasets import planted_clusters
from .exceptions import InvalidInputError, ResourceLimitError, RobustOrderError
from .permutation import as_permutation_array, format_permutations, read_permutations, write_permutations
from .robust_sort import RobustSortConfig, evaluate, robust_sort, triangle_removal_sort
from .tournament import Adversary, generate_instance, make_planted_oracle
from .ulam import UlamKConfig, ulamk

__all__ = ["main", "build_parser", "trial_seeds", "CSV_COLUMNS", "THREADS_ENV"]

CSV_COLUMNS = ("n", "b", "mean_loss", "bound_3eps", "mean_queries", "queries_per_nlog3n")
THREADS_ENV = "ROBUST_ORDER_THREADS"

EXIT_OK, EXIT_INVALID, EXIT_RESOURCE = 0, 2, 3


def trial_seeds(seed: int, trial: int) -> tuple[int, int]:
    """(instance seed, algorithm seed) for one trial."""
    words = np.random.SeedSequence(seed, spawn_key=(trial,)).generate_state(2)
    return int(words[0]), int(words[1])


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _adversary(text: str) -> str:
    try:
        return Adversary.parse(text).value
    except RobustOrderError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return 1
    try:
        return _positive_int(env)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise InvalidInputError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from exc


def _check_writable(path: str | None) -> None:
    if path is None:
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise InvalidInputError(f"cannot write to {path}")


def _dump_json(doc, path: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _pool_map(fn, jobs, threads: int):
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


# gen

def _cmd_gen(args) -> int:
    _check_writable(args.out)
    if args.kind == "instance":
        if args.b > args.n:
            raise InvalidInputError("--b must not exceed --n")
        inst = generate_instance(args.n, args.b, args.adversary, args.seed)
        if args.out is None:
            sys.stdout.write(inst.to_json() + "\n")
        else:
            inst.save(args.out)
        return EXIT_OK
    data = planted_clusters(args.k, args.d, args.n, noise=args.noise,
                            min_separation=args.separation, seed=args.seed)
    out = args.out or "-"
    if out == "-":
        sys.stdout.write(format_permutations(data.points))
    else:
        write_permutations(out, data.points)
    sys.stderr.write(f"planted_cost={data.planted_cost}\n")
    return EXIT_OK


# sort-bench

def _sort_trial(job: dict) -> dict:
    inst_seed, algo_seed = trial_seeds(job["seed"], job["trial"])
    inst = generate_instance(job["n"], job["b"], job["adversary"], inst_seed)
    oracle = make_planted_oracle(inst)
    start = time.perf_counter()
    if job["algorithm"] == "triangle-removal":
        result = triangle_removal_sort(oracle)
    else:
        cfg = RobustSortConfig(epsilon=job["epsilon"], mode=job["mode"])
        result = robust_sort(oracle, config=cfg, seed=algo_seed)
    elapsed = (time.perf_counter() - start) * 1000.0
    report = evaluate(result, inst, epsilon=job["epsilon"])
    row = {
        "trial": job["trial"],
        "instance_seed": inst_seed,
        "algorithm_seed": algo_seed,
        "loss": report.loss,
        "good_loss": report.good_loss,
        "queries": result.queries.total_queries,
        "distinct_pairs": result.queries.distinct_pairs,
        "triangles_removed": result.triangles_removed,
        "discarded": int(result.discarded.size),
        "recursion_depth": result.recursion_depth,
    }
    if job["timing"]:
        row["runtime_ms"] = round(elapsed, 3)
    return row


def _aggregate(n: int, b: int, eps: float, rows: list[dict]) -> dict:
    losses = np.array([r["loss"] for r in rows], dtype=float)
    queries = np.array([r["queries"] for r in rows], dtype=float)
    stderr = float(losses.std(ddof=1) / math.sqrt(losses.size)) if losses.size > 1 else 0.0
    nlog3 = n * math.log2(n) ** 3 if n > 1 else 1.0
    return {
        "mean_loss": float(losses.mean()),
        "stderr_loss": stderr,
        "max_loss": int(losses.max()),
        "bound_3eps": (3 + eps) * b,
        "mean_queries": float(queries.mean()),
        "queries_per_nlog3n": float(queries.mean() / nlog3),
    }


def _b_values(args, n: int) -> list[int]:
    bs = list(args.b or [])
    if args.b_fraction is not None:
        bs.append(int(args.b_fraction * n))
    if not bs:
        raise InvalidInputError("give --b or --b-fraction")
    for b in bs:
        if b > n:
            raise InvalidInputError(f"b={b} exceeds n={n}")
    return bs


def _cmd_sort_bench(args) -> int:
    _check_writable(args.out)
    _check_writable(args.csv)
    RobustSortConfig(epsilon=args.epsilon, mode=args.mode)
    threads = _threads(args)
    cells, jobs = [], []
    for n in args.n:
        for b in _b_values(args, n):
            for adv in args.adversary:
                cells.append((n, b, adv))
                jobs.extend({"n": n, "b": b, "adversary": adv, "epsilon": args.epsilon, "mode": args.mode,
                             "seed": args.seed, "trial": t, "timing": args.timing,
                             "algorithm": args.algorithm} for t in range(args.seeds))
    rows = _pool_map(_sort_trial, jobs, threads)
    report_cells = []
    for i, (n, b, adv) in enumerate(cells):
        per = rows[i * args.seeds:(i + 1) * args.seeds]
        report_cells.append({"n": n, "b": b, "adversary": adv, "per_seed": per,
                             "aggregate": _aggregate(n, b, args.epsilon, per)})
    doc = {
        "command": "sort-bench",
        "config": {"algorithm": args.algorithm, "epsilon": args.epsilon, "mode": args.mode,
                   "seeds": args.seeds, "seed": args.seed,
                   "robust_sort": RobustSortConfig(epsilon=args.epsilon, mode=args.mode).to_dict()},
        "cells": report_cells,
    }
    _dump_json(doc, args.out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow((*CSV_COLUMNS, "adversary"))
            for cell in report_cells:
                agg = cell["aggregate"]
                writer.writerow((cell["n"], cell["b"], *(repr(float(agg[c])) for c in CSV_COLUMNS[2:]),
                                 cell["adversary"]))
    if args.out is not None:
        for cell in report_cells:
            agg = cell["aggregate"]
            print(f"n={cell['n']} b={cell['b']} {cell['adversary']}: mean_loss={agg['mean_loss']:.3f} "
                  f"bound_3eps={agg['bound_3eps']:g} mean_queries={agg['mean_queries']:.1f}")
    return EXIT_OK


# ulam-bench and cluster

def _ulamk_cfg(args, k: int, seed: int) -> UlamKConfig:
    return UlamKConfig(k=k, eta=args.eta, trials=args.trials, subset_budget=args.subset_budget,
                       n_sample=args.n_sample, outer_repeats=args.repeats, seed=seed)


def _ulam_trial(job: dict) -> dict:
    args = argparse.Namespace(**job["args"])
    data_seed, algo_seed = trial_seeds(args.seed, job["trial"])
    data = planted_clusters(args.k, args.d, args.n, noise=args.noise,
                            min_separation=args.separation, seed=data_seed)
    start = time.perf_counter()
    sol = ulamk(data.points, _ulamk_cfg(args, args.k, algo_seed),
                RobustSortConfig(epsilon=args.epsilon, mode=args.mode))
    elapsed = (time.perf_counter() - start) * 1000.0
    row = {
        "trial": job["trial"],
        "data_seed": data_seed,
        "algorithm_seed": algo_seed,
        "planted_cost": data.planted_cost,
        "objective": sol.objective,
        "ratio": (sol.objective / data.planted_cost) if data.planted_cost else (0.0 if sol.objective == 0 else None),
        "n_solutions": sol.n_solutions,
    }
    if args.timing:
        row["runtime_ms"] = round(elapsed, 3)
    return row


def _cmd_ulam_bench(args) -> int:
    _check_writable(args.out)
    RobustSortConfig(epsilon=args.epsilon, mode=args.mode)
    _ulamk_cfg(args, args.k, args.seed)
    shared = {k: v for k, v in vars(args).items() if k != "func"}
    jobs = [{"args": shared, "trial": t} for t in range(args.seeds)]
    rows = _pool_map(_ulam_trial, jobs, _threads(args))
    objs = [r["objective"] for r in rows]
    doc = {
        "command": "ulam-bench",
        "config": {k: shared[k] for k in ("k", "d", "n", "noise", "separation", "eta", "trials",
                                          "subset_budget", "n_sample", "repeats", "seed", "seeds",
                                          "epsilon", "mode")},
        "per_seed": rows,
        "aggregate": {
            "mean_objective": float(np.mean(objs)),
            "mean_planted_cost": float(np.mean([r["planted_cost"] for r in rows])),
            "within_2x_planted": sum(1 for r in rows if r["objective"] <= 2 * r["planted_cost"]),
            "zero_objective": sum(1 for o in objs if o == 0),
        },
    }
    _dump_json(doc, args.out)
    return EXIT_OK


def _cmd_cluster(args) -> int:
    _check_writable(args.out)
    perms = read_permutations(args.input)
    if not perms:
        raise InvalidInputError(f"{args.input} holds no permutations")
    X = as_permutation_array(perms)
    cfg = _ulamk_cfg(args, args.k, args.seed)
    rs_cfg = RobustSortConfig(epsilon=args.epsilon, mode=args.mode)
    start = time.perf_counter()
    sol = ulamk(X, cfg, rs_cfg)
    doc = sol.to_dict()
    doc["config_echo"] = {"input": str(args.input), **cfg.to_dict(), "robust_sort": rs_cfg.to_dict()}
    if args.timing:
        doc["runtime_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
    _dump_json(doc, args.out)
    return EXIT_OK


_ADVERSARY_HELP = "one of: " + ", ".join(a.value for a in Adversary)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=_nonneg_int, default=0, help="global seed (default 0)")
    p.add_argument("--out", default=None, help="output path (default stdout)")


def _add_sort_cfg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=_positive_float, default=0.5, help="loss slack; budgets scale with 1/epsilon^2")
    p.add_argument("--mode", choices=("practical", "paper"), default="practical",
                   help="budget constants (paper constants are only feasible for tiny n)")


def _add_ulamk_cfg(p: argparse.ArgumentParser, k_required: bool) -> None:
    p.add_argument("--k", type=_positive_int, required=k_required, default=None if k_required else 2,
                   help="number of centers")
    p.add_argument("--eta", type=_positive_int, default=8, help="points per ULAM1 trial (>= 8)")
    p.add_argument("--trials", type=_positive_int, default=1, help="ULAM1 trials per subset")
    p.add_argument("--subset-budget", type=_positive_int, default=2, help="subsets examined per level")
    p.add_argument("--n-sample", type=_positive_int, default=None, help="D-sample size per level")
    p.add_argument("--repeats", type=_positive_int, default=None, help="outer repeats (default min(2^k, 64))")
    p.add_argument("--timing", action="store_true", help="include wall-clock runtime_ms (breaks byte-identity)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robust-order", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a planted tournament instance or permutation dataset")
    g.add_argument("--kind", choices=("instance", "dataset"), default="instance",
                   help="tournament instance (JSON) or permutation dataset (text)")
    g.add_argument("--n", type=_positive_int, required=True, help="elements (instance) or points (dataset)")
    g.add_argument("--b", type=_nonneg_int, default=0, help="bad elements")
    g.add_argument("--adversary", type=_adversary, default="random-flip", help=_ADVERSARY_HELP)
    g.add_argument("--k", type=_positive_int, default=2, help="planted clusters (dataset)")
    g.add_argument("--d", type=_positive_int, default=30, help="permutation length (dataset)")
    g.add_argument("--noise", type=_nonneg_int, default=0, help="symbols moved per point (dataset)")
    g.add_argument("--separation", type=_nonneg_int, default=None,
                   help="minimum center distance (dataset, default d // 2)")
    _add_common(g)
    g.set_defaults(func=_cmd_gen)

    s = sub.add_parser("sort-bench", help="sweep (n, b) grids of planted instances")
    s.add_argument("--n", type=_positive_int, nargs="+", required=True, help="instance sizes")
    s.add_argument("--b", type=_nonneg_int, nargs="+", default=None, help="bad-element counts")
    s.add_argument("--b-fraction", type=float, default=None, help="add b = floor(fraction * n) per n")
    s.add_argument("--adversary", type=_adversary, nargs="+", default=["random-flip"], help=_ADVERSARY_HELP)
    s.add_argument("--algorithm", choices=("robust-sort", "triangle-removal"), default="robust-sort")
    s.add_argument("--seeds", type=_positive_int, default=20, help="trials per cell")
    s.add_argument("--csv", default=None, help="aggregate CSV path")
    s.add_argument("--threads", type=_positive_int, default=None,
                   help=f"worker processes (fallback: ${THREADS_ENV}, else 1)")
    s.add_argument("--timing", action="store_true", help="include wall-clock runtime_ms (breaks byte-identity)")
    _add_sort_cfg(s)
    _add_common(s)
    s.set_defaults(func=_cmd_sort_bench)

    u = sub.add_parser("ulam-bench", help="cluster planted permutation datasets and compare to planted cost")
    u.add_argument("--d", type=_positive_int, default=30)
    u.add_argument("--n", type=_positive_int, default=300)
    u.add_argument("--noise", type=_nonneg_int, default=0)
    u.add_argument("--separation", type=_nonneg_int, default=None)
    u.add_argument("--seeds", type=_positive_int, default=5, help="datasets")
    u.add_argument("--threads", type=_positive_int, default=None,
                   help=f"worker processes (fallback: ${THREADS_ENV}, else 1)")
    _add_ulamk_cfg(u, k_required=False)
    _add_sort_cfg(u)
    _add_common(u)
    u.set_defaults(func=_cmd_ulam_bench)

    c = sub.add_parser("cluster", help="run ULAMk on a permutation dataset file")
    c.add_argument("--input", required=True, help="one permutation per line, whitespace separated")
    _add_ulamk_cfg(c, k_required=True)
    _add_sort_cfg(c)
    _add_common(c)
    c.set_defaults(func=_cmd_cluster)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"robust-order: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (RobustOrderError, OSError) as exc:
        print(f"robust-order: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
