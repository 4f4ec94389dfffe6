"""Command line entry point: ``normclust {gen,solve,verify,bench,props,assign}``."""

from __future__ import annotations

import argparse
import json
import sys

from normclust.harness import (
    ALGORITHMS,
    BenchSpec,
    SolveConfig,
    dumps_result,
    markdown_table,
    result_json,
    run_bench,
    solve,
    summarize,
    verify_result,
    write_csv,
)
from normclust.metric import GENERATOR_KINDS, Instance, generate_instance


def _read_json(path: str | None, use_stdin: bool):
    if path and path != "-":
        with open(path) as fh:
            return json.load(fh)
    if use_stdin or path == "-":
        return json.load(sys.stdin)
    raise SystemExit("no input: pass --in FILE or --json to read stdin")


def _emit(text: str, path: str | None) -> None:
    if path and path != "-":
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _gen_params(args) -> dict:
    params = {"n_facilities": args.facilities, "n_clients": args.clients, "k": args.k}
    if args.capacity:
        lo, _, hi = args.capacity.partition(",")
        params["capacity"] = [int(lo), int(hi)] if hi else int(lo)
    if args.norm:
        params["norm"] = args.norm
    return params


def _config(args, alg: str) -> SolveConfig:
    opened = getattr(args, "open", None)
    return SolveConfig(
        alg=alg,
        eps=args.eps,
        seed=args.seed,
        norm=args.norm,
        c=args.c,
        linf_budget=args.linf_budget,
        c_prime=args.cprime,
        c_double=args.cdouble,
        color_budget=args.color_budget,
        guess_budget=args.guess_budget,
        rounds_per_guess=args.rounds_per_guess,
        open=tuple(int(f) for f in opened.split(",")) if opened else None,
    )


def _add_io(p) -> None:
    p.add_argument("--in", dest="inp", help="input file ('-' for stdin)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--json", action="store_true", help="read JSON from stdin")


def _add_solver_flags(p, with_seed: bool = True) -> None:
    p.add_argument("--eps", default="1/5")
    if with_seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--norm", help="linf, l1, lp:P, topl:L or ordered:w1,w2,...")
    p.add_argument("--c", default="1", help="top-cn fraction")
    p.add_argument("--linf-budget", dest="linf_budget")
    p.add_argument("--cprime", type=int, default=4)
    p.add_argument("--cdouble", type=int, default=4)
    p.add_argument("--color-budget", dest="color_budget", type=int)
    p.add_argument("--guess-budget", dest="guess_budget", type=int)
    p.add_argument("--rounds-per-guess", dest="rounds_per_guess", type=int, default=32)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="normclust", description="Norm-based capacitated clustering toolkit")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--kind", choices=sorted(GENERATOR_KINDS), default="euclidean")
    g.add_argument("--facilities", type=int, default=5)
    g.add_argument("--clients", type=int, default=8)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--capacity", help="U or LO,HI (omit for uncapacitated)")
    g.add_argument("--norm")
    g.add_argument("--linf-budget", dest="linf_budget")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")

    s = sub.add_parser("solve", help="run a solver on an instance")
    s.add_argument("--alg", choices=ALGORITHMS, required=True)
    s.add_argument("--open", help="comma separated facility ids (assign only)")
    _add_io(s)
    _add_solver_flags(s)

    a = sub.add_parser("assign", help="assign clients to a fixed open set")
    a.add_argument("--open", required=True)
    _add_io(a)
    _add_solver_flags(a)

    v = sub.add_parser("verify", help="re-check a Result against its instance")
    v.add_argument("--instance", required=True)
    _add_io(v)

    b = sub.add_parser("bench", help="seed sweep with oracle ratios")
    b.add_argument("--alg", choices=ALGORITHMS, required=True)
    b.add_argument("--kind", choices=sorted(GENERATOR_KINDS), default="euclidean")
    b.add_argument("--facilities", type=int, default=5)
    b.add_argument("--clients", type=int, default=8)
    b.add_argument("--k", type=int, default=2)
    b.add_argument("--capacity")
    b.add_argument("--seeds", type=int, default=10)
    b.add_argument("--first-seed", dest="first_seed", type=int, default=0)
    b.add_argument("--no-oracle", dest="oracle", action="store_false")
    b.add_argument("--workers", type=int, help="defaults to NORMCLUST_THREADS")
    b.add_argument("--csv")
    b.add_argument("--md")
    b.add_argument("--results", help="write every Result JSON to this file (one per line)")
    _add_solver_flags(b, with_seed=False)

    p = sub.add_parser("props", help="run the invariant suites")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--suite", action="append", help="suite name (repeatable; default all)")
    return ap


def _cmd_gen(args) -> int:
    params = _gen_params(args)
    inst = generate_instance(args.kind, params, seed=args.seed)
    if args.linf_budget:
        from dataclasses import replace

        from normclust.norms import as_exact

        inst = replace(inst, linf_budget=as_exact(args.linf_budget))
    _emit(json.dumps(inst.to_json(), sort_keys=True), args.out)
    return 0


def _cmd_solve(args, alg: str) -> int:
    inst = Instance.from_json(_read_json(args.inp, args.json))
    cfg = _config(args, alg)
    sol = solve(inst, cfg)
    res = result_json(inst, sol, cfg)
    _emit(dumps_result(res), args.out)
    problems = verify_result(inst, res)
    for msg in problems:
        print(f"invariant breach: {msg}", file=sys.stderr)
    if problems:
        return 2
    if res["value"] is None:
        print("no solution found", file=sys.stderr)
        return 1
    return 0


def _cmd_verify(args) -> int:
    with open(args.instance) as fh:
        inst = Instance.from_json(json.load(fh))
    res = _read_json(args.inp, args.json)
    problems = verify_result(inst, res)
    report = {"ok": not problems, "problems": problems}
    _emit(json.dumps(report, sort_keys=True), args.out)
    return 0 if not problems else 2


def _cmd_bench(args) -> int:
    params = {"n_facilities": args.facilities, "n_clients": args.clients, "k": args.k}
    if args.capacity:
        lo, _, hi = args.capacity.partition(",")
        params["capacity"] = [int(lo), int(hi)] if hi else int(lo)
    if args.norm:
        params["norm"] = args.norm
    args.seed = 0
    cfg = _config(args, args.alg)
    seeds = range(args.first_seed, args.first_seed + args.seeds)
    rows = run_bench(BenchSpec(args.kind, params, cfg, seeds, args.oracle), workers=args.workers)
    records = [r for r, _ in rows]
    if args.csv:
        write_csv(records, args.csv)
    if args.results:
        with open(args.results, "w") as fh:
            for _, res in rows:
                fh.write(json.dumps(res, sort_keys=True) + "\n")
    table = markdown_table(records, title=f"{args.alg} on {args.kind}")
    if args.md:
        with open(args.md, "w") as fh:
            fh.write(table)
    sys.stdout.write(table)
    s = summarize(records)
    if s["unverified"]:
        print(f"invariant breach: {s['unverified']} bench rows failed verification", file=sys.stderr)
        return 2
    return 0


def _cmd_props(args) -> int:
    from normclust.properties import SUITES, run_suites

    names = args.suite or list(SUITES)
    bad = [n for n in names if n not in SUITES]
    if bad:
        print(f"unknown suite(s): {', '.join(bad)}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return 64
    failed = 0
    for r in run_suites(names, trials=args.trials, seed=args.seed):
        print(f"{r.name:32s} trials={r.trials:<6d} violations={r.violations}")
        for ex in r.examples:
            print(f"    e.g. {ex}")
        failed += not r.ok
    return 2 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "gen":
            return _cmd_gen(args)
        if args.cmd == "solve":
            return _cmd_solve(args, args.alg)
        if args.cmd == "assign":
            return _cmd_solve(args, "assign")
        if args.cmd == "verify":
            return _cmd_verify(args)
        if args.cmd == "bench":
            return _cmd_bench(args)
        return _cmd_props(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 64


if __name__ == "__main__":
    sys.exit(main())
