"""Hybrid code on the binary example: median TV and P[TV > 0.15] against n."""

import sys

from _common import CONFIGS, outdir, parser

from coordlab.harness import emit_plotdata, emit_results, load_config, run_experiment


def main():
    p = parser(__doc__)
    p.add_argument("--config", default=str(CONFIGS / "hybrid_binary.json"))
    p.add_argument("--trials", type=int, default=None, help="override trials_per_n")
    args = p.parse_args()
    cfg = load_config(args.config)
    if args.trials:
        cfg = type(cfg)(**{**cfg.__dict__, "trials_per_n": args.trials})
    table = run_experiment(cfg, threads=args.threads)
    d = outdir(args)
    emit_results(table, "csv", d / "hybrid_binary.csv")
    emit_plotdata(table, d / "hybrid_binary_plot.csv")
    print(f"{len(table.rows)} trials in {table.seconds:.1f} s")
    print("     n  median TV   mean TV  P[TV>%.2f]" % cfg.tv_threshold)
    for a in table.aggregates:
        print(f"{a['n']:>6}  {a['median_tv']:.4f}     {a['mean_tv']:.4f}    {a['failure_rate']:.3f}")
    med = [a["median_tv"] for a in table.aggregates]
    ok = all(x > y for x, y in zip(med, med[1:]))
    print("median TV strictly decreasing:", ok)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
