"""Vectorised joint-typicality scans over codebooks.

A codebook is a ``(K, n)`` integer array. A scan compares every codeword,
jointly with some fixed side sequences, against a target pmf and returns
the per-codeword TV distance of the empirical joint.
"""

from __future__ import annotations

import numpy as np

MAX_CODEWORDS = 2 ** 24
MAX_TRIAL_WORK = 2 ** 32
_CHUNK_ELEMS = 2 ** 22


class CodebookTooLarge(ValueError):
    """Raised when a requested codebook exceeds the memory guard."""

    def __init__(self, size_log2: int, limit_log2: int = 24):
        self.size_log2 = size_log2
        self.limit_log2 = limit_log2
        super().__init__(f"codebook of 2^{size_log2} codewords exceeds the guard of 2^{limit_log2}")


def eps_schedule(n: int, c: float = 2.0, lo: float = 0.02, hi: float = 0.3) -> float:
    """Typicality threshold c * n^(-1/3), clamped to [lo, hi]."""
    return float(min(hi, max(lo, c * n ** (-1.0 / 3.0))))


def codebook_size_log2(n: int, rate: float) -> int:
    return max(0, int(np.ceil(n * rate - 1e-9)))


def draw_codebook(pmf: np.ndarray, size_log2: int, n: int, rng) -> np.ndarray:
    if size_log2 > 24:
        raise CodebookTooLarge(size_log2)
    K = 1 << size_log2
    cdf = np.cumsum(pmf)
    u = rng.random((K, n))
    cb = np.searchsorted(cdf, u, side="right")
    return np.minimum(cb, len(pmf) - 1).astype(np.uint8)


def scan_tv(codebook: np.ndarray, side: list, side_sizes: tuple, target: np.ndarray,
            strict_support: bool = True) -> np.ndarray:
    """TV between each codeword's empirical joint with ``side`` and ``target``.

    ``target`` has axes (*side, codeword). With ``strict_support`` any
    codeword producing a tuple outside the target support gets TV = inf.
    """
    K, n = codebook.shape
    kc = target.shape[-1]
    F = int(np.prod(side_sizes)) if side else 1
    f = np.ravel_multi_index(tuple(side), side_sizes) if side else np.zeros(n, dtype=np.int64)
    tflat = target.reshape(F * kc)
    cells = F * kc
    out = np.empty(K)
    rows = max(1, _CHUNK_ELEMS // max(n, 1))
    base = f[None, :] * kc
    for a in range(0, K, rows):
        b = min(K, a + rows)
        idx = base + codebook[a:b]
        idx = idx + (np.arange(b - a) * cells)[:, None]
        counts = np.bincount(idx.ravel(), minlength=(b - a) * cells).reshape(b - a, cells)
        emp = counts / n
        tv = 0.5 * np.abs(emp - tflat[None]).sum(axis=1)
        if strict_support:
            bad = (counts[:, tflat <= 0] > 0).any(axis=1)
            tv[bad] = np.inf
        out[a:b] = tv
    return out


def first_typical(tv: np.ndarray, eps: float, rng, rule: str = "first") -> tuple:
    """Covering-encoder choice over a random scan order.

    ``rule="first"`` takes the first typical codeword met; ``rule="best"``
    takes the minimum-TV codeword (first met among ties). Returns
    ``(index, typical)``; with no typical codeword the index is a uniformly
    random fallback.
    """
    order = rng.permutation(len(tv))
    scanned = tv[order]
    hit = scanned <= eps
    if hit.any():
        if rule == "best":
            return int(order[int(np.argmin(scanned))]), True
        if rule != "first":
            raise ValueError(f"unknown selection rule {rule!r}")
        return int(order[int(np.argmax(hit))]), True
    return int(rng.integers(len(tv))), False


def unique_typical(tv: np.ndarray, eps: float, candidates: np.ndarray | None = None) -> tuple:
    """Unique-typicality decoding over ``candidates`` (default: all codewords).

    Returns ``(index, status)`` with status ``ok``, ``none_typical`` or
    ``ambiguous``. On failure the index is a fallback: the closest typical
    codeword when ambiguous, the closest codeword overall when none is typical.
    """
    if candidates is None:
        candidates = np.arange(len(tv))
    sub = tv[candidates]
    hit = np.flatnonzero(sub <= eps)
    if len(hit) == 1:
        return int(candidates[hit[0]]), "ok"
    finite = np.where(np.isfinite(sub), sub, np.inf)
    if len(hit) > 1:
        return int(candidates[hit[np.argmin(sub[hit])]]), "ambiguous"
    if np.isfinite(finite).any():
        return int(candidates[int(np.argmin(finite))]), "none_typical"
    return int(candidates[0]), "none_typical"
