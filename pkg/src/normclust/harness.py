"""Solver dispatch, Result JSON, verification and seed-sweep benchmarks.

Result JSON holds no wall-clock data so identical seeds and configs give
byte-identical output; timings live in the bench CSV only.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

from normclust.metric import Instance, generate_instance
from normclust.norms import LpValue, NormSpec, as_exact, eval_norm, rat_str
from normclust.solution import Solution, check_assignment, cost_vector

ALGORITHMS = ("exact", "mnckc", "topcn", "bicriteria", "seed3", "assign")


@dataclass
class SolveConfig:
    alg: str
    eps: str = "1/5"
    seed: int = 0
    norm: str | None = None  # overrides the instance norm
    c: str = "1"
    linf_budget: str | None = None
    c_prime: int = 4
    c_double: int = 4
    color_budget: int | None = None
    guess_budget: int | None = None
    rounds_per_guess: int = 32
    open: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.alg not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.alg!r}; choose from {', '.join(ALGORITHMS)}")

    def to_json(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if v is not None}
        if "open" in out:
            out["open"] = list(out["open"])
        return out


@dataclass
class RunRecord:
    instance_hash: str
    algorithm: str
    config: dict
    seed: int
    wall_time: float
    value: str | None
    oracle_value: str | None = None
    ratio: str | None = None
    ratio_float: float | None = None
    certified: bool | None = None
    verified: bool = True
    truncated: bool = False
    stats: dict = field(default_factory=dict)


def value_str(v) -> str | None:
    if v is None:
        return None
    if isinstance(v, LpValue):
        return f"{rat_str(v.power_sum)}^(1/{rat_str(v.p)})"
    return rat_str(v)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (set, frozenset)):
        return sorted(_plain(v) for v in x)
    if isinstance(x, Fraction):
        return rat_str(x)
    if isinstance(x, float) and x.is_integer():
        return int(x)
    if hasattr(x, "item"):
        return x.item()
    return x


def _norm_for(inst: Instance, cfg: SolveConfig) -> NormSpec:
    if cfg.alg in ("topcn", "bicriteria"):
        from normclust.topcn import top_cn_norm

        return top_cn_norm(inst, cfg.c)
    return NormSpec.parse(cfg.norm) if cfg.norm else inst.norm


def solve(inst: Instance, cfg: SolveConfig) -> Solution:
    eps = as_exact(cfg.eps)
    norm = _norm_for(inst, cfg)
    if cfg.alg == "exact":
        from normclust.oracle import exact_solve

        cap = cfg.linf_budget if cfg.linf_budget is not None else None
        res = exact_solve(inst, norm, linf_cap=None if cap is None else as_exact(cap))
        if not res.feasible:
            return Solution((), (), None, norm, {"algorithm": "exact", "infeasible": True, "subsets_examined": res.subsets_examined})
        meta = {"algorithm": "exact", "opt_value": value_str(res.opt_value), "subsets_examined": res.subsets_examined}
        return Solution(res.opt_open_set, res.opt_assignment, res.opt_value, norm, meta)
    if cfg.alg == "mnckc":
        from normclust.mnckc import DEFAULT_GUESS_BUDGET, MNCkCConfig, run_mnckc

        mc = MNCkCConfig(eps, cfg.c_prime, cfg.c_double, cfg.color_budget, cfg.guess_budget or DEFAULT_GUESS_BUDGET)
        return run_mnckc(inst, eps, cfg.seed, norm=norm, config=mc)
    if cfg.alg in ("topcn", "bicriteria"):
        from normclust.topcn import DEFAULT_LP_BUDGET, TopCNConfig

        tc = TopCNConfig(eps, cfg.c_prime, cfg.rounds_per_guess, cfg.guess_budget or DEFAULT_LP_BUDGET)
        if cfg.alg == "topcn":
            from normclust.topcn import run_topcn

            return run_topcn(inst, as_exact(cfg.c), eps, cfg.seed, config=tc)
        from normclust.bicriteria import NoCertifiedSolution, run_bicriteria

        L = cfg.linf_budget if cfg.linf_budget is not None else inst.linf_budget
        if L is None:
            raise ValueError("bicriteria needs --linf-budget or an instance linf_budget")
        try:
            res = run_bicriteria(inst, as_exact(cfg.c), eps, cfg.seed, L=as_exact(L), config=tc)
        except NoCertifiedSolution as exc:
            return Solution((), (), None, norm, {"algorithm": "bicriteria", "failed": True, "reason": str(exc)})
        res.solution.meta["certified"] = res.certified
        return res.solution
    if cfg.alg == "seed3":
        from normclust.lp_seed import simple_three_approx
        from normclust.rng import derive_rng

        if not inst.uncapacitated:
            raise ValueError("seed3 is the uncapacitated (3+eps) route")
        return simple_three_approx(inst, eps, derive_rng(cfg.seed, "seed3"), norm=norm, c_prime=cfg.c_prime)
    # assign
    from normclust.find_assignment import guess_and_match

    if not cfg.open:
        raise ValueError("assign needs an open facility set")
    res = guess_and_match(inst, cfg.open, eps, norm=norm)
    if res is None:
        return Solution(tuple(sorted(cfg.open)), (), None, norm, {"algorithm": "assign", "infeasible": True})
    meta = {
        "algorithm": "assign",
        "tables_tried": res.tables_tried,
        "tables_feasible": res.tables_feasible,
        "classes": [sorted(X) for X in res.structure.classes],
        "inclusive": list(res.structure.inclusive),
    }
    return Solution(tuple(sorted(set(cfg.open))), tuple(res.assignment), res.value, norm, meta)


def result_json(inst: Instance, sol: Solution, cfg: SolveConfig) -> dict:
    meta = {k: v for k, v in sol.meta.items() if k != "wall_time"}
    return {
        "instance": inst.digest(),
        "open": list(sol.open),
        "assignment": {str(j): int(f) for j, f in enumerate(sol.assignment)},
        "norm": sol.norm.to_json(),
        "value": value_str(sol.value),
        "meta": _plain({"config": cfg.to_json(), **meta}),
    }


def dumps_result(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=1)


def verify_result(inst: Instance, result: dict) -> list[str]:
    """Problems found re-checking a Result against its instance (empty = clean)."""
    problems = []
    if result.get("instance") not in (None, inst.digest()):
        problems.append("instance digest does not match")
    norm = NormSpec.from_json(result["norm"])
    open_set = [int(f) for f in result.get("open", [])]
    raw = result.get("assignment", {})
    if isinstance(raw, dict):
        try:
            assignment = [int(raw[str(j)]) for j in range(len(raw))]
        except KeyError:
            return ["assignment keys are not the clients 0..n-1"]
    else:
        assignment = [int(f) for f in raw]
    if result.get("value") is None:
        if assignment:
            problems.append("assignment given for an infeasible result")
        return problems
    for f in open_set:
        if not 0 <= f < inst.n_facilities:
            problems.append(f"unknown facility {f}")
    if problems:
        return problems
    problems += check_assignment(inst, open_set, assignment)
    if not problems:
        v = value_str(eval_norm(norm, cost_vector(inst, assignment)))
        if v != result["value"]:
            problems.append(f"value mismatch: recorded {result['value']}, recomputed {v}")
    return problems


# ---------------------------------------------------------------------------
# benchmarks


@dataclass
class BenchSpec:
    kind: str
    params: dict
    cfg: SolveConfig
    seeds: Sequence[int]
    oracle: bool = True


def _oracle_value(inst: Instance, cfg: SolveConfig, sol: Solution):
    from normclust.oracle import BudgetExceeded, UnsupportedExact, exact_solve

    norm = sol.norm
    try:
        if cfg.alg == "bicriteria":
            L = sol.meta.get("L")
            res = exact_solve(inst, norm, linf_cap=None if L is None else as_exact(L))
        else:
            res = exact_solve(inst, norm)
    except (BudgetExceeded, UnsupportedExact):
        return None
    return res.opt_value if res.feasible else None


def _ratio(value, oracle):
    if value is None or oracle is None:
        return None, None
    if isinstance(value, LpValue):
        r = value.root / oracle.root if oracle.root else 1.0
        return f"{r:.12g}", r
    oracle = as_exact(oracle)
    if oracle == 0:
        r = Fraction(1) if as_exact(value) == 0 else None
        return (None, None) if r is None else (rat_str(r), 1.0)
    r = Fraction(as_exact(value)) / oracle
    return rat_str(r), float(r)


def bench_one(kind: str, params: dict, cfg: SolveConfig, seed: int, oracle: bool = True) -> tuple[RunRecord, dict]:
    inst = generate_instance(kind, params, seed=seed)
    cfg = SolveConfig(**{**asdict(cfg), "seed": seed})
    if cfg.alg == "bicriteria" and cfg.linf_budget is None and inst.linf_budget is None:
        from normclust.oracle import exact_solve

        cfg.linf_budget = rat_str(exact_solve(inst, NormSpec.linf()).opt_value)
    t0 = time.perf_counter()
    sol = solve(inst, cfg)
    wall = time.perf_counter() - t0
    res = result_json(inst, sol, cfg)
    problems = verify_result(inst, res)
    ov = _oracle_value(inst, cfg, sol) if oracle else None
    ratio, rf = _ratio(sol.value, ov)
    rec = RunRecord(
        instance_hash=inst.digest(),
        algorithm=cfg.alg,
        config=cfg.to_json(),
        seed=seed,
        wall_time=round(wall, 4),
        value=value_str(sol.value),
        oracle_value=value_str(ov),
        ratio=ratio,
        ratio_float=rf,
        certified=sol.meta.get("certified"),
        verified=not problems,
        truncated=bool(sol.meta.get("truncated", False)),
        stats={k: sol.meta[k] for k in ("generated", "distinct_sets", "evaluated", "feasible", "lp_solved", "lb_pruned", "lp_pruned") if k in sol.meta},
    )
    return rec, res


def _bench_job(args):
    return bench_one(*args)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("NORMCLUST_THREADS", "1")))
    except ValueError:
        return 1


def run_bench(spec: BenchSpec, workers: int | None = None) -> list[tuple[RunRecord, dict]]:
    """One job per seed; results come back in seed order whatever the pool size."""
    workers = workers or thread_count()
    jobs = [(spec.kind, spec.params, spec.cfg, s, spec.oracle) for s in spec.seeds]
    if workers <= 1:
        return [bench_one(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_bench_job, jobs))


CSV_FIELDS = ["seed", "instance_hash", "algorithm", "value", "oracle_value", "ratio", "ratio_float", "certified", "verified", "truncated", "wall_time"]


def write_csv(records: Sequence[RunRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in records:
            w.writerow({k: getattr(r, k) for k in CSV_FIELDS})


def summarize(records: Sequence[RunRecord]) -> dict:
    ratios = [r.ratio_float for r in records if r.ratio_float is not None]
    return {
        "runs": len(records),
        "with_oracle": len(ratios),
        "max_ratio": max(ratios) if ratios else None,
        "mean_ratio": sum(ratios) / len(ratios) if ratios else None,
        "truncated": sum(r.truncated for r in records),
        "unverified": sum(not r.verified for r in records),
    }


def markdown_table(records: Sequence[RunRecord], title: str = "") -> str:
    s = summarize(records)
    lines = []
    if title:
        lines += [f"### {title}", ""]
    lines += ["| seed | value | oracle | ratio | verified | truncated | time (s) |", "|---:|---:|---:|---:|:---:|:---:|---:|"]
    for r in records:
        rf = "" if r.ratio_float is None else f"{r.ratio_float:.4f}"
        lines.append(f"| {r.seed} | {r.value} | {r.oracle_value or ''} | {rf} | {'yes' if r.verified else 'NO'} | {'yes' if r.truncated else ''} | {r.wall_time:.2f} |")
    mx = "n/a" if s["max_ratio"] is None else f"{s['max_ratio']:.4f}"
    mean = "n/a" if s["mean_ratio"] is None else f"{s['mean_ratio']:.4f}"
    lines += ["", f"runs {s['runs']}, max ratio {mx}, mean ratio {mean}, truncated {s['truncated']}, unverified {s['unverified']}"]
    return "\n".join(lines) + "\n"
