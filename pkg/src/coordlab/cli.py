"""Command line entry point.

    coordlab [--seed S] [--threads T] region check TARGET.json --region {noncausal,causal,strict,separation}
    coordlab [--seed S] [--threads T] simulate CONFIG.json [--out PATH] [--format csv|json] [--plotdata PATH]
    coordlab example binary --p 0.4 --eps 0.1 --d 0.2 [--emit-target PATH]

Exit codes: 0 success, 1 target not shown to be in the region, 2 usage or
config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .harness import (REGIONS, ConfigError, HarnessError, NoWitness, emit_plotdata, emit_results, load_config,
                      run_experiment)
from .prob import ProbabilityError, mutual_information
from .region import (MEMBER, SEPARATION, RegionError, SearchConfig, certify, check_region, make_binary_example,
                     target_from_dict, target_to_dict, witness_joint)

EXIT_OK, EXIT_NOT_MEMBER, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coordlab", description="Empirical coordination of state and channel: regions and codes.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides config master_seed)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for trials")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    region = sub.add_parser("region", help="region membership")
    rsub = region.add_subparsers(dest="action", required=True, parser_class=_Parser)
    check = rsub.add_parser("check", help="search for a witness")
    check.add_argument("target", help="target JSON file (type 'target')")
    check.add_argument("--region", required=True, choices=["noncausal", "causal", "strict", "separation"])
    check.add_argument("--card-u", type=int, default=None)
    check.add_argument("--card-v", type=int, default=None)
    check.add_argument("--budget", type=int, default=64, help="number of search starts")

    sim = sub.add_parser("simulate", help="run an experiment config")
    sim.add_argument("config")
    sim.add_argument("--out", default=None, help="results file (default: stdout)")
    sim.add_argument("--format", choices=["csv", "json"], default="csv")
    sim.add_argument("--plotdata", default=None, help="also write per-n aggregates as CSV")

    ex = sub.add_parser("example", help="closed-form examples")
    esub = ex.add_subparsers(dest="which", required=True, parser_class=_Parser)
    binary = esub.add_parser("binary", help="Bern(p) source over BSC(eps) at distortion d")
    binary.add_argument("--p", type=float, required=True)
    binary.add_argument("--eps", type=float, required=True)
    binary.add_argument("--d", type=float, required=True)
    binary.add_argument("--emit-target", default=None, help="write the target JSON here")
    return p


def _err(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _describe_witness(w) -> list:
    lines = [f"witness scheme: {w.scheme}"]
    for f in w.factors:
        given = getattr(f, "given_names", ())
        name = f.name if not given else f"{f.name}|{','.join(given)}"
        table = f.mass if not given else f.table
        lines.append(f"  P({name}) = {json.dumps(table.round(6).tolist())}")
    for m in w.maps:
        lines.append(f"  {m.name} = f({','.join(m.given_names)}) table {json.dumps(m.table.tolist())}")
    return lines


def cmd_region(args) -> int:
    if args.budget < 1:
        return _err("--budget must be positive")
    try:
        target = target_from_dict(json.loads(Path(args.target).read_text()))
    except OSError as e:
        return _err(f"cannot read {args.target}: {e.strerror or e}")
    except json.JSONDecodeError as e:
        return _err(f"{args.target}: JSON parse error at line {e.lineno}, column {e.colno}: {e.msg}")
    except (RegionError, ProbabilityError, TypeError) as e:
        return _err(f"{args.target}: {e}")
    region = REGIONS[args.region]
    cfg = SearchConfig(starts=args.budget, seed=0 if args.seed is None else args.seed)
    try:
        v = check_region(target, region, args.card_u, args.card_v, cfg)
    except RegionError as e:
        return _err(str(e))
    print(f"region: {region}")
    print(f"status: {v.status}")
    if region == SEPARATION:
        log = v.search_log
        if "I_S_Shat" in log:
            print(f"I(S;Shat) = {log['I_S_Shat']:.6f} bits")
            print(f"I(X;Y) = {log['I_X_Y']:.6f} bits")
            print(f"product residual (TV) = {log['residual']:.6g}")
    if v.status != MEMBER:
        for p in v.search_log.get("problems", []):
            print(f"  {p}")
        print("target not shown to be in the region" if v.status == "not_found"
              else "target is infeasible for this region", file=sys.stderr)
        return EXIT_NOT_MEMBER
    c = certify(target, v.witness)
    print(f"slack = {c.slack:.6f} bits (rhs {c.rhs:.6f}, lhs {c.lhs:.6f}), marginal TV = {c.tv:.3g}")
    print("\n".join(_describe_witness(v.witness)))
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        cfg = load_config(args.config)
        table = run_experiment(cfg, threads=args.threads, master_seed=args.seed)
    except ConfigError as e:
        for p in e.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_USAGE
    except NoWitness as e:
        print(f"no witness: {e}", file=sys.stderr)
        return EXIT_NOT_MEMBER
    try:
        text = emit_results(table, args.format, args.out)
        if args.plotdata:
            emit_plotdata(table, args.plotdata)
    except HarnessError as e:
        return _err(str(e))
    if args.out is None:
        sys.stdout.write(text)
    out = sys.stderr if args.out is None else sys.stdout
    print(f"{table.scheme}: {len(table.rows)} rows in {table.seconds:.1f} s", file=out)
    for a in table.aggregates:
        med = "n/a" if a["median_tv"] is None else f"{a['median_tv']:.4f}"
        fr = "n/a" if a["failure_rate"] is None else f"{a['failure_rate']:.3f}"
        print(f"  n={a['n']:>6}  median TV {med}  P[TV>{table.tv_threshold}] {fr}  errors {a['errors']}", file=out)
    return EXIT_OK


def cmd_example(args) -> int:
    try:
        target, w = make_binary_example(args.p, args.eps, args.d)
    except RegionError as e:
        return _err(str(e))
    j = witness_joint(target, w)
    i_us = mutual_information(j, "U", "S")
    i_uy = mutual_information(j, "U", "Y")
    c = certify(target, w)
    print(f"binary example p={args.p} eps={args.eps} d={args.d}")
    print(f"I(U;S) = {i_us:.4f} bits")
    print(f"I(U;Y) = {i_uy:.4f} bits")
    print(f"slack = {i_uy - i_us:.4f} bits")
    print(f"certificate: {'ok' if c.ok else 'FAILED'} (marginal TV {c.tv:.3g})")
    print("\n".join(_describe_witness(w)))
    if args.emit_target:
        try:
            Path(args.emit_target).write_text(json.dumps(target_to_dict(target), indent=1) + "\n")
        except OSError as e:
            return _err(f"cannot write {args.emit_target}: {e.strerror or e}")
    return EXIT_OK if c.ok else EXIT_NOT_MEMBER


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.threads < 1:
        return _err("--threads must be >= 1")
    if args.command == "region":
        return cmd_region(args)
    if args.command == "simulate":
        return cmd_simulate(args)
    return cmd_example(args)


def entry() -> None:
    raise SystemExit(main())
