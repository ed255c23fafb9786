"""Hybrid analog/digital codes and the separation baseline at finite block length.

A hybrid code covers the source with a random U-codebook (digital part)
and then forms channel inputs symbol by symbol, x_i = x(s_i, u_i) (analog
part). The decoder recovers U^n from Y^n by unique joint typicality and
outputs shat_i = shat(u_i, y_i).

Random codebooks grow as 2^(nR), so a block of length ``n`` may be built
as a product of independent sub-blocks of length ``sub_n`` that share one
codebook. ``sub_n = n`` is the plain single-block code.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import prob
from .prob import SequenceBlock, empirical_joint, marginalize, mutual_information, total_variation
from .region import (NONCAUSAL, SEPARATION, TARGET_AXES, CoordinationTarget, RegionError, Witness,
                     check_separation, witness_joint)
from .typical import (MAX_TRIAL_WORK, CodebookTooLarge, codebook_size_log2, draw_codebook, eps_schedule,
                      first_typical, scan_tv, unique_typical)


class CodeDesignError(ValueError):
    """Rates or margins incompatible with the witness."""


def _split(n: int, sub_n: int | None) -> int:
    sub_n = n if sub_n is None else sub_n
    if sub_n < 1 or n % sub_n:
        raise CodeDesignError(f"sub-block length {sub_n} must divide n={n}")
    return sub_n


def _check_work(size_log2: int, n: int, passes: int = 2):
    if size_log2 > 24:
        raise CodebookTooLarge(size_log2)
    codebook_size = 1 << size_log2
    if codebook_size * n * passes > MAX_TRIAL_WORK:
        raise CodeDesignError(f"a trial would scan {codebook_size * n * passes} symbols (> 2^32)")


@dataclass(frozen=True)
class TrialResult:
    n: int
    seed: int
    tv: float
    encode_ok: bool
    decode_ok: bool
    index_correct: bool
    tv_omniscient: float = float("nan")
    subblocks: int = 1
    encode_failures: int = 0
    none_typical: int = 0
    ambiguous: int = 0
    wrong_index: int = 0


# ------------------------------------------------------------------ hybrid

@dataclass(frozen=True, eq=False)
class HybridCode:
    target: CoordinationTarget
    witness: Witness
    n: int
    sub_n: int
    rate: float
    codewords: np.ndarray          # (K, sub_n) over U
    enc_map: np.ndarray            # [s, u] -> x
    dec_map: np.ndarray            # [u, y] -> shat
    eps_enc: float
    eps_dec: float
    p_su: np.ndarray
    p_uy: np.ndarray
    info: dict = field(default_factory=dict)
    rule: str = "first"

    @property
    def size(self) -> int:
        return len(self.codewords)


def build_hybrid(target: CoordinationTarget, witness: Witness, n: int, rate_margin: float | None = None,
                 eps_enc: float | None = None, eps_dec: float | None = None, rng=0,
                 sub_n: int | None = None, rule: str = "first") -> HybridCode:
    """Draw a covering U-codebook of rate I(U;S) + margin for a noncausal witness."""
    if witness.scheme != NONCAUSAL:
        raise CodeDesignError(f"hybrid codes need a noncausal witness, got {witness.scheme}")
    sub_n = _split(n, sub_n)
    rng = prob.make_rng(rng)
    j = witness_joint(target, witness)
    i_us = mutual_information(j, "U", "S")
    i_uy = mutual_information(j, "U", "Y")
    slack = i_uy - i_us
    p_u = marginalize(j, ["U"]).mass
    card_u = p_u.size
    if card_u == 1:
        rate, margin, k_log2 = 0.0, 0.0, 0
    else:
        margin = min(slack / 3, 0.05) if rate_margin is None else rate_margin
        if margin <= 0 or slack <= 2 * margin:
            raise CodeDesignError(f"witness slack {slack:.4g} bits does not exceed twice the margin {margin:.4g}")
        rate = i_us + margin
        k_log2 = codebook_size_log2(sub_n, rate)
    _check_work(k_log2, n)
    codewords = draw_codebook(p_u, k_log2, sub_n, rng)
    eps_enc = eps_schedule(sub_n) if eps_enc is None else eps_enc
    eps_dec = eps_schedule(sub_n) if eps_dec is None else eps_dec
    return HybridCode(
        target, witness, n, sub_n, rate, codewords,
        witness.part("X").table, witness.part("Shat").table, eps_enc, eps_dec,
        marginalize(j, ["S", "U"]).reorder(["S", "U"]).mass,
        marginalize(j, ["U", "Y"]).reorder(["Y", "U"]).mass,
        {"I_US": i_us, "I_UY": i_uy, "margin": margin, "codebook_log2": k_log2}, rule,
    )


@dataclass(frozen=True)
class EncodeResult:
    indices: np.ndarray
    x: SequenceBlock
    ok: np.ndarray


@dataclass(frozen=True)
class DecodeResult:
    indices: np.ndarray
    status: tuple
    shat: SequenceBlock

    @property
    def ok(self) -> bool:
        return all(s == "ok" for s in self.status)


def _segments(n: int, sub_n: int):
    return [slice(a, a + sub_n) for a in range(0, n, sub_n)]


def hybrid_encode(code: HybridCode, s: SequenceBlock, rng) -> EncodeResult:
    """Pick, per sub-block, the first jointly typical U-codeword in a random scan order."""
    rng = prob.make_rng(rng)
    if len(s) != code.n:
        raise CodeDesignError(f"source block has length {len(s)}, code expects {code.n}")
    nS = code.p_su.shape[0]
    idx, ok = [], []
    for seg in _segments(code.n, code.sub_n):
        tv = scan_tv(code.codewords, [s.symbols[seg]], (nS,), code.p_su)
        i, good = first_typical(tv, code.eps_enc, rng, code.rule)
        idx.append(i)
        ok.append(good)
    idx = np.array(idx)
    u = code.codewords[idx].reshape(-1).astype(np.int64)
    x = code.enc_map[s.symbols, u]
    return EncodeResult(idx, SequenceBlock(code.target.alphabet("X"), x), np.array(ok))


def hybrid_decode(code: HybridCode, y: SequenceBlock) -> DecodeResult:
    """Unique joint typicality of (U-codeword, y) per sub-block, then shat(u, y) symbol by symbol."""
    if len(y) != code.n:
        raise CodeDesignError(f"channel output has length {len(y)}, code expects {code.n}")
    nY = code.p_uy.shape[0]
    idx, status = [], []
    for seg in _segments(code.n, code.sub_n):
        tv = scan_tv(code.codewords, [y.symbols[seg]], (nY,), code.p_uy)
        i, st = unique_typical(tv, code.eps_dec)
        idx.append(i)
        status.append(st)
    idx = np.array(idx)
    u = code.codewords[idx].reshape(-1).astype(np.int64)
    shat = code.dec_map[u, y.symbols]
    return DecodeResult(idx, tuple(status), SequenceBlock(code.target.alphabet("Shat"), shat))


def _tv4(target: CoordinationTarget, s, x, y, shat) -> float:
    emp = empirical_joint([s, x, y, shat], TARGET_AXES)
    return total_variation(emp, target.joint)


def _trial_streams(rng):
    rng = prob.make_rng(rng)
    return [np.random.Generator(np.random.PCG64(int(v))) for v in rng.integers(0, 2 ** 63, size=3)]


def run_hybrid_trial(code: HybridCode, target: CoordinationTarget, rng, seed: int = 0) -> TrialResult:
    """One pass source -> encoder -> channel -> decoder; the TV of the 4-tuple is always reported."""
    if not target.joint.alphabet("S").same_symbols(code.target.alphabet("S")):
        raise CodeDesignError("code and target alphabets differ")
    src_rng, enc_rng, ch_rng = _trial_streams(rng)
    s = prob.sample_iid(target.source, code.n, src_rng)
    enc = hybrid_encode(code, s, enc_rng)
    y = prob.sample_through(target.channel, [enc.x], ch_rng)
    dec = hybrid_decode(code, y)
    tv = _tv4(target, s, enc.x, y, dec.shat)
    u_true = code.codewords[enc.indices].reshape(-1).astype(np.int64)
    shat_omni = SequenceBlock(dec.shat.alphabet, code.dec_map[u_true, y.symbols])
    correct = dec.indices == enc.indices
    return TrialResult(
        n=code.n, seed=seed, tv=tv,
        encode_ok=bool(enc.ok.all()), decode_ok=dec.ok, index_correct=bool(correct.all()),
        tv_omniscient=_tv4(target, s, enc.x, y, shat_omni),
        subblocks=len(enc.indices), encode_failures=int((~enc.ok).sum()),
        none_typical=dec.status.count("none_typical"), ambiguous=dec.status.count("ambiguous"),
        wrong_index=int((~correct).sum()),
    )


# -------------------------------------------------------------- separation

@dataclass(frozen=True, eq=False)
class SeparationCode:
    target: CoordinationTarget
    n: int
    sub_n: int
    rate: float
    source_cb: np.ndarray          # (K, sub_n) over Shat
    channel_cb: np.ndarray         # (K, sub_n) over X
    eps_enc: float
    eps_dec: float
    p_s_shat: np.ndarray
    p_yx: np.ndarray
    info: dict = field(default_factory=dict)
    rule: str = "first"


def build_separation(target: CoordinationTarget, n: int, rate_margins: tuple | None = None,
                     eps: tuple | float | None = None, rng=0, sub_n: int | None = None,
                     plan: CoordinationTarget | None = None, rule: str = "first") -> SeparationCode:
    """Source code at rate I(S;Shat) + m1 glued to a channel code of the same size.

    ``plan`` is the distribution the code is designed for (defaults to
    ``target``); it must be a member of the separation set.
    """
    plan = target if plan is None else plan
    v = check_separation(plan)
    if not v.member:
        raise CodeDesignError(f"design target is not in the separation set ({v.status}, {v.search_log})")
    sub_n = _split(n, sub_n)
    rng = prob.make_rng(rng)
    j = plan.joint
    i_ss = mutual_information(j, "S", "Shat")
    i_xy = mutual_information(j, "X", "Y")
    slack = i_xy - i_ss
    if rate_margins is None:
        m = min(slack / 3, 0.05)
        rate_margins = (m, m)
    m1, m2 = rate_margins
    if i_ss <= 1e-12:
        rate, k_log2 = 0.0, 0
    else:
        if slack <= m1 + m2:
            raise CodeDesignError(f"slack {slack:.4g} does not exceed the margins {m1 + m2:.4g}")
        rate = i_ss + m1
        k_log2 = codebook_size_log2(sub_n, rate)
    p_sh = marginalize(j, ["Shat"]).mass
    p_x = marginalize(j, ["X"]).mass
    _check_work(k_log2, n)
    source_cb = draw_codebook(p_sh, k_log2, sub_n, rng)
    channel_cb = draw_codebook(p_x, k_log2, sub_n, rng)
    if eps is None:
        eps = eps_schedule(sub_n)
    e_enc, e_dec = (eps, eps) if np.isscalar(eps) else eps
    return SeparationCode(
        plan, n, sub_n, rate, source_cb, channel_cb, float(e_enc), float(e_dec),
        marginalize(j, ["S", "Shat"]).reorder(["S", "Shat"]).mass,
        marginalize(j, ["X", "Y"]).reorder(["Y", "X"]).mass,
        {"I_S_Shat": i_ss, "I_X_Y": i_xy, "margins": list(rate_margins), "codebook_log2": k_log2}, rule,
    )


def run_separation_trial(code: SeparationCode, target: CoordinationTarget, rng, seed: int = 0) -> TrialResult:
    src_rng, enc_rng, ch_rng = _trial_streams(rng)
    s = prob.sample_iid(target.source, code.n, src_rng)
    nS = code.p_s_shat.shape[0]
    nY = code.p_yx.shape[0]
    msgs, enc_ok = [], []
    for seg in _segments(code.n, code.sub_n):
        tv = scan_tv(code.source_cb, [s.symbols[seg]], (nS,), code.p_s_shat)
        i, ok = first_typical(tv, code.eps_enc, enc_rng, code.rule)
        msgs.append(i)
        enc_ok.append(ok)
    msgs = np.array(msgs)
    x = SequenceBlock(target.alphabet("X"), code.channel_cb[msgs].reshape(-1).astype(np.int64))
    y = prob.sample_through(target.channel, [x], ch_rng)
    dec, status = [], []
    for seg in _segments(code.n, code.sub_n):
        tv = scan_tv(code.channel_cb, [y.symbols[seg]], (nY,), code.p_yx)
        i, st = unique_typical(tv, code.eps_dec)
        dec.append(i)
        status.append(st)
    dec = np.array(dec)
    sh_alpha = target.alphabet("Shat")
    shat = SequenceBlock(sh_alpha, code.source_cb[dec].reshape(-1).astype(np.int64))
    shat_omni = SequenceBlock(sh_alpha, code.source_cb[msgs].reshape(-1).astype(np.int64))
    correct = dec == msgs
    return TrialResult(
        n=code.n, seed=seed, tv=_tv4(target, s, x, y, shat),
        encode_ok=all(enc_ok), decode_ok=all(st == "ok" for st in status), index_correct=bool(correct.all()),
        tv_omniscient=_tv4(target, s, x, y, shat_omni), subblocks=len(msgs),
        encode_failures=enc_ok.count(False), none_typical=status.count("none_typical"),
        ambiguous=status.count("ambiguous"), wrong_index=int((~correct).sum()),
    )
