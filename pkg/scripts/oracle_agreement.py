"""Grid brute force versus the LP/pattern search on random binary targets."""

import sys

import numpy as np
from _common import parser

from coordlab.presets import random_binary_target
from coordlab.region import NONCAUSAL, brute_force_membership, certify, check_noncausal_inner


def main():
    p = parser(__doc__)
    p.add_argument("--targets", type=int, default=20)
    p.add_argument("--seed", type=int, default=2024)
    args = p.parse_args()
    rs = np.random.default_rng(args.seed)
    bad = 0
    print(" k  bf status          bf slack  search status       search slack")
    for k in range(args.targets):
        pr = random_binary_target(int(rs.integers(2 ** 32)))
        bf = brute_force_membership(pr.target, NONCAUSAL, {"U": 2}, grid_step=0.05)
        v = check_noncausal_inner(pr.target, 2)
        bf_slack = bf.search_log["best_slack"]
        if bf.member and bf_slack > 0.05 and not v.member:
            bad += 1
        for verdict, tol in ((bf, bf.search_log["grid_step"] / 2), (v, 1e-6)):
            if verdict.witness is not None and not certify(pr.target, verdict.witness, match_tol=tol).ok:
                bad += 1
        vs = f"{v.witness.slack:.4f}" if v.witness else "-"
        print(f"{k:>2}  {bf.status:<18} {bf_slack:>8.4f}  {v.status:<18} {vs}")
    print("disagreements / certificate failures:", bad)
    return 0 if bad == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
