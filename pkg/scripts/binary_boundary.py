"""Slack of the binary-example witness along d = eps and for d > eps."""

import sys

import numpy as np
from _common import parser

from coordlab.region import make_binary_example


def main():
    parser(__doc__).parse_args()
    print("    p    eps     d    slack")
    worst = 0.0
    for p in np.linspace(0.1, 0.5, 9):
        for eps in np.linspace(0.0, p if p < 0.5 else 0.45, 5):
            _, w = make_binary_example(p, eps, eps)
            worst = max(worst, abs(w.slack))
            print(f"{p:5.2f}  {eps:5.3f}  {eps:5.3f}  {w.slack:+.2e}")
    for p, eps, d in ((0.4, 0.1, 0.2), (0.3, 0.05, 0.1), (0.45, 0.2, 0.3)):
        _, w = make_binary_example(p, eps, d)
        print(f"{p:5.2f}  {eps:5.3f}  {d:5.3f}  {w.slack:+.6f}")
    print(f"max |slack| on d = eps: {worst:.2e}")
    return 0 if worst < 1e-9 else 1


if __name__ == "__main__":
    sys.exit(main())
