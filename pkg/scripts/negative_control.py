"""Lossless state with S ~ Bern(1/2): H(S) = 1 exceeds I(X;Y) = 0.7136.

The builder must refuse every margin; a code forced to R_v = R_m = 0.75
fails to deliver the source description more often as n grows.
"""

import sys

from _common import CONFIGS, outdir, parser

from coordlab.blockmarkov import build_blockmarkov
from coordlab.harness import emit_results, load_config, run_experiment
from coordlab.hybrid import CodeDesignError
from coordlab.presets import lossless_state
from coordlab.region import STRICT


def main():
    p = parser(__doc__)
    args = p.parse_args()
    pr = lossless_state(p=0.5)
    refused = True
    for m in (0.005, 0.01, 0.02, 0.04, 0.08):
        try:
            build_blockmarkov(pr.target, pr.witnesses[STRICT], 200, 4, margins=m, sub_n=25)
            print(f"margin {m}: built (unexpected)")
            refused = False
        except CodeDesignError as e:
            print(f"margin {m}: {e}")
    table = run_experiment(load_config(CONFIGS / "negative_control.json"), threads=args.threads)
    emit_results(table, "csv", outdir(args) / "negative_control.csv")
    rates = []
    for n in table.n_values:
        rows = [r for r in table.rows if r["n"] == n]
        fail = sum(not r["decode_ok"] for r in rows) / len(rows)
        rates.append(fail)
        print(f"n={n:>3}  decode failure {fail:.4f}  channel index failure "
              f"{sum(not r['index_correct'] for r in rows) / len(rows):.4f}")
    inc = all(a < b for a, b in zip(rates, rates[1:]))
    print("decode failure increasing:", inc)
    return 0 if refused and inc else 1


if __name__ == "__main__":
    sys.exit(main())
