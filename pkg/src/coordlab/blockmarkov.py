"""Block-Markov codes for strictly causal and causal encoders.

Block i describes the source of block i-1. The encoder covers S^n(i-1)
jointly with the previous carrier C^n(i-1) (C = X for strictly causal,
C = U for causal witnesses) by a V-codeword, sends its bin index on a
carrier codeword, and the decoder

  1. recovers the bin index from Y^n(i) (channel stage), then
  2. picks the codeword in that bin that is jointly typical with the
     previous carrier and channel output (bin stage), and
  3. reconstructs shat(v, y) or shat(u, v, y) for block i-1.

Block 1 sends carrier index 0, which the decoder knows. Blocks of length
``n`` may be built from sub-blocks of length ``sub_n`` that share the
codebooks, as for hybrid codes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import prob
from .hybrid import CodeDesignError, _check_work, _segments, _split, _tv4
from .prob import SequenceBlock, conditional_mutual_information, marginalize, mutual_information
from .region import CAUSAL, STRICT, CoordinationTarget, Witness, witness_joint
from .typical import codebook_size_log2, draw_codebook, eps_schedule, first_typical, scan_tv, unique_typical

BIN_ZERO_TOL = 1e-9
BINNING = ("auto", "random", "singleton")


@dataclass(frozen=True, eq=False)
class BlockMarkovCode:
    target: CoordinationTarget
    witness: Witness
    n: int
    B: int
    sub_n: int
    rate_v: float
    rate_m: float
    v_codebook: np.ndarray         # (Kv, sub_n) over V
    bins: np.ndarray               # (Kv,) bin index of each v-codeword
    members: tuple                 # members[m] = v-codeword indices in bin m
    c_codebook: np.ndarray         # (Km, sub_n) carrier codewords, X or U
    enc_map: np.ndarray | None     # causal: [s, u] -> x
    dec_map: np.ndarray            # [v, y] or [u, v, y] -> shat
    eps_enc: float
    eps_ch: float
    eps_bin: float
    p_scv: np.ndarray              # [S, C, V]
    p_yc: np.ndarray               # [Y, C]
    p_cyv: np.ndarray              # [C, Y, V]
    info: dict = field(default_factory=dict)
    rule: str = "first"

    @property
    def scheme(self) -> str:
        return self.witness.scheme

    @property
    def carrier(self) -> str:
        return "X" if self.scheme == STRICT else "U"

    @property
    def x_codebook(self) -> np.ndarray:
        return self.c_codebook

    @property
    def num_bins(self) -> int:
        return len(self.c_codebook)


def _rate_problems(i_cov, i_ch, i_bin, r_v, r_m, m, singleton=False) -> list:
    """Violated rate inequalities; singleton bins need no bin-size condition."""
    m1, m2, m3 = m
    out = []
    if not r_v > i_cov + m1 - 1e-12:
        out.append(f"covering: R_v={r_v:.4g} <= I(S;V|C)+m={i_cov + m1:.4g}")
    if not r_m < i_ch - m2 + 1e-12:
        out.append(f"channel: R_m={r_m:.4g} >= I(C;Y)-m={i_ch - m2:.4g}")
    if not singleton and not r_v - r_m < i_bin - m3 + 1e-12:
        out.append(f"bin size: R_v-R_m={r_v - r_m:.4g} >= I(V;Y|C)-m={i_bin - m3:.4g}")
    return out


def build_blockmarkov(target: CoordinationTarget, witness: Witness, n: int, B: int,
                      margins: float | tuple | None = None, eps: float | tuple | None = None, rng=0,
                      sub_n: int | None = None, binning: str = "auto", rates: tuple | None = None,
                      rule: str = "first") -> BlockMarkovCode:
    """Draw V- and carrier codebooks and a balanced random binning.

    ``margins`` is one margin or a triple for the covering, channel and
    bin-size inequalities (default min(slack/4, 0.04) each). ``rates``
    forces (R_v, R_m) and skips the feasibility checks; violated
    inequalities are then listed in ``info["violations"]``.
    """
    if witness.scheme not in (STRICT, CAUSAL):
        raise CodeDesignError(f"block-Markov codes need a causal or strictly causal witness, got {witness.scheme}")
    if B < 2:
        raise CodeDesignError("a chain needs B >= 2 blocks")
    if binning not in BINNING:
        raise CodeDesignError(f"binning must be one of {BINNING}")
    sub_n = _split(n, sub_n)
    rng = prob.make_rng(rng)
    c = "X" if witness.scheme == STRICT else "U"
    j = witness_joint(target, witness)
    i_cov = conditional_mutual_information(j, "S", "V", c)
    i_ch = mutual_information(j, c, "Y")
    i_bin = conditional_mutual_information(j, "V", "Y", c)
    slack = mutual_information(j, [c, "V"], "Y") - mutual_information(j, [c, "V"], "S")
    if margins is None:
        # with no slack any positive margin fails; 0.01 lets the report name the inequalities
        margins = min(slack / 4, 0.04) if slack > 0 else 0.01
    m = (margins,) * 3 if np.isscalar(margins) else tuple(margins)
    singleton = binning == "singleton" or (binning == "auto" and i_bin <= BIN_ZERO_TOL)
    if rates is not None:
        r_v, r_m = map(float, rates)
        forced = True
    else:
        forced = False
        if min(m) <= 0:
            raise CodeDesignError("margins must be positive")
        r_v = i_cov + m[0]
        if singleton:
            r_m = r_v
        else:
            lo, hi = r_v - i_bin + m[2], i_ch - m[1]
            r_m = max(0.0, 0.5 * (lo + hi))
        problems = _rate_problems(i_cov, i_ch, i_bin, r_v, r_m, m, singleton)
        if slack < 3 * max(m) - 1e-12:
            problems.append(f"total: I(C,V;Y)-I(C,V;S)={slack:.4g} bits is below three margins ({3 * max(m):.4g})")
        if problems:
            raise CodeDesignError("infeasible rates (" + ("singleton" if singleton else "random")
                                  + " bins): " + "; ".join(problems))
    kv_log2 = codebook_size_log2(sub_n, r_v)
    km_log2 = kv_log2 if singleton and not forced else min(kv_log2, codebook_size_log2(sub_n, r_m))
    p_v = marginalize(j, ["V"]).mass
    p_c = marginalize(j, [c]).mass
    _check_work(kv_log2, n)
    v_cb = draw_codebook(p_v, kv_log2, sub_n, rng)
    c_cb = draw_codebook(p_c, km_log2, sub_n, rng)
    kv, km = len(v_cb), len(c_cb)
    bins = np.empty(kv, dtype=np.int64)
    bins[rng.permutation(kv)] = np.arange(kv) % km
    order = np.argsort(bins, kind="stable")
    members = tuple(np.split(order, np.cumsum(np.bincount(bins, minlength=km))[:-1]))
    if eps is None:
        eps = eps_schedule(sub_n)
    e_enc, e_ch, e_bin = (eps,) * 3 if np.isscalar(eps) else eps
    enc_map = None if c == "X" else witness.part("X").table
    info = {"I_S_V_given_C": i_cov, "I_C_Y": i_ch, "I_V_Y_given_C": i_bin, "slack": slack,
            "margins": list(m), "v_log2": kv_log2, "bins_log2": km_log2,
            "binning": "singleton" if singleton else "random", "forced": forced,
            "violations": _rate_problems(i_cov, i_ch, i_bin, r_v, r_m, m, r_v == r_m) if forced else []}
    return BlockMarkovCode(
        target, witness, n, B, sub_n, r_v, r_m, v_cb, bins, members, c_cb, enc_map,
        witness.part("Shat").table, float(e_enc), float(e_ch), float(e_bin),
        marginalize(j, ["S", c, "V"]).reorder(["S", c, "V"]).mass,
        marginalize(j, [c, "Y"]).reorder(["Y", c]).mass,
        marginalize(j, [c, "Y", "V"]).reorder([c, "Y", "V"]).mass,
        info, rule,
    )


# ---------------------------------------------------------------- per block

@dataclass(frozen=True)
class EncodedBlock:
    ell: np.ndarray | None         # v-codeword per sub-block (None in block 1)
    m: np.ndarray                  # bin / carrier index per sub-block
    carrier: np.ndarray            # carrier symbols of this block
    x: SequenceBlock
    cover_ok: np.ndarray


@dataclass(frozen=True)
class DecodedBlock:
    m_hat: np.ndarray
    ell_hat: np.ndarray | None
    carrier_hat: np.ndarray
    shat_prev: SequenceBlock | None
    channel_status: tuple
    bin_status: tuple


def _carrier_to_x(code: BlockMarkovCode, carrier: np.ndarray, s_cur: SequenceBlock | None) -> np.ndarray:
    if code.enc_map is None:
        return carrier
    if s_cur is None:
        raise CodeDesignError("a causal encoder needs the current source block")
    return code.enc_map[s_cur.symbols, carrier]


def bm_encode_block(code: BlockMarkovCode, i: int, s_prev: SequenceBlock | None, c_prev: np.ndarray | None,
                    rng, s_cur: SequenceBlock | None = None) -> EncodedBlock:
    """Encoder for block ``i`` (1-based).

    Uses only S^n(i-1) and the previous carrier, plus S^n(i) through
    x(s, u) for causal codes.
    """
    rng = prob.make_rng(rng)
    segs = _segments(code.n, code.sub_n)
    if i == 1:
        m = np.zeros(len(segs), dtype=np.int64)
        carrier = code.c_codebook[m].reshape(-1).astype(np.int64)
        return EncodedBlock(None, m, carrier, SequenceBlock(code.target.alphabet("X"), _carrier_to_x(code, carrier, s_cur)),
                            np.ones(len(segs), dtype=bool))
    if s_prev is None or c_prev is None:
        raise CodeDesignError(f"block {i} needs the previous source block and carrier")
    nS, nC = code.p_scv.shape[:2]
    ell, ok = [], []
    for seg in segs:
        tv = scan_tv(code.v_codebook, [s_prev.symbols[seg], c_prev[seg]], (nS, nC), code.p_scv)
        k, good = first_typical(tv, code.eps_enc, rng, code.rule)
        ell.append(k)
        ok.append(good)
    ell = np.array(ell)
    m = code.bins[ell]
    carrier = code.c_codebook[m].reshape(-1).astype(np.int64)
    x = SequenceBlock(code.target.alphabet("X"), _carrier_to_x(code, carrier, s_cur))
    return EncodedBlock(ell, m, carrier, x, np.array(ok))


def bm_decode_block(code: BlockMarkovCode, i: int, y: SequenceBlock, c_prev_hat: np.ndarray | None,
                    y_prev: SequenceBlock | None) -> DecodedBlock:
    """Channel stage, bin stage and reconstruction of block ``i - 1``."""
    segs = _segments(code.n, code.sub_n)
    if i == 1:
        m_hat = np.zeros(len(segs), dtype=np.int64)
        return DecodedBlock(m_hat, None, code.c_codebook[m_hat].reshape(-1).astype(np.int64), None, (), ())
    nY = code.p_yc.shape[0]
    nC = code.p_cyv.shape[0]
    m_hat, ell_hat, ch_st, bin_st = [], [], [], []
    for seg in segs:
        tv = scan_tv(code.c_codebook, [y.symbols[seg]], (nY,), code.p_yc)
        mh, st = unique_typical(tv, code.eps_ch)
        m_hat.append(mh)
        ch_st.append(st)
        cand = code.members[mh]
        tv = scan_tv(code.v_codebook[cand], [c_prev_hat[seg], y_prev.symbols[seg]], (nC, nY), code.p_cyv)
        k, st = unique_typical(tv, code.eps_bin)
        ell_hat.append(int(cand[k]))
        bin_st.append(st)
    m_hat = np.array(m_hat)
    ell_hat = np.array(ell_hat)
    v = code.v_codebook[ell_hat].reshape(-1).astype(np.int64)
    if code.dec_map.ndim == 2:
        sh = code.dec_map[v, y_prev.symbols]
    else:
        sh = code.dec_map[c_prev_hat, v, y_prev.symbols]
    return DecodedBlock(m_hat, ell_hat, code.c_codebook[m_hat].reshape(-1).astype(np.int64),
                        SequenceBlock(code.target.alphabet("Shat"), sh), tuple(ch_st), tuple(bin_st))


# ------------------------------------------------------------------ chains

@dataclass(frozen=True)
class BlockRecord:
    """Reconstruction of block ``block`` (1-based), decoded during block ``block + 1``."""

    block: int
    cover_ok: bool
    bin_decode_ok: bool
    v_decode_ok: bool
    tv: float
    tv_omniscient: float
    sub_ok: tuple                  # v_decode_ok per sub-block
    exact_on_ok: bool              # shat == omniscient shat on every sub_ok sub-block
    channel_none: int = 0
    channel_ambiguous: int = 0
    bin_none: int = 0
    bin_ambiguous: int = 0


@dataclass(frozen=True)
class ChainResult:
    n: int
    B: int
    seed: int
    per_block: tuple
    chain_tv: float
    blocks: dict | None = None

    @property
    def tvs(self) -> np.ndarray:
        return np.array([r.tv for r in self.per_block])


def block_streams(rng, B: int) -> list:
    """Independent (source, encoder, channel) generators for each block."""
    base = int(prob.make_rng(rng).integers(0, 2 ** 63))
    return [[np.random.Generator(np.random.PCG64(np.random.SeedSequence([base, i, k]))) for k in range(3)]
            for i in range(B)]


def run_chain(code: BlockMarkovCode, target: CoordinationTarget, rng, seed: int = 0,
              source: list | None = None, keep_blocks: bool = False) -> ChainResult:
    """Run ``code.B`` blocks end to end; ``source`` overrides the sampled source blocks."""
    if not target.joint.alphabet("S").same_symbols(code.target.alphabet("S")):
        raise CodeDesignError("code and target alphabets differ")
    B = code.B
    streams = block_streams(rng, B)
    if source is None:
        source = [prob.sample_iid(target.source, code.n, st[0]) for st in streams]
    elif len(source) != B:
        raise CodeDesignError(f"need {B} source blocks, got {len(source)}")
    xs, ys, shats, recs = [], [], [], []
    enc_prev = dec_prev = None
    for i in range(1, B + 1):
        s_prev = source[i - 2] if i > 1 else None
        enc = bm_encode_block(code, i, s_prev, enc_prev.carrier if enc_prev else None, streams[i - 1][1],
                              s_cur=source[i - 1])
        y = prob.sample_through(target.channel, [enc.x], streams[i - 1][2])
        dec = bm_decode_block(code, i, y, dec_prev.carrier_hat if dec_prev else None, ys[-1] if ys else None)
        xs.append(enc.x)
        ys.append(y)
        if i > 1:
            shats.append(dec.shat_prev)
            recs.append(_record(code, target, i - 1, enc, dec, enc_prev, source[i - 2], xs[-2], ys[-2]))
        enc_prev, dec_prev = enc, dec
    tail = SequenceBlock(target.alphabet("Shat"), np.zeros(code.n, dtype=np.int64))
    whole = [SequenceBlock(b[0].alphabet, np.concatenate([q.symbols for q in b]))
             for b in (source, xs, ys, shats + [tail])]
    blocks = {"s": source, "x": xs, "y": ys, "shat": shats} if keep_blocks else None
    return ChainResult(code.n, B, seed, tuple(recs), _tv4(target, *whole), blocks)


def _record(code, target, block, enc, dec, enc_prev, s, x, y) -> BlockRecord:
    # success means the right index was recovered; typicality statuses are counted separately
    ch_ok = dec.m_hat == enc.m
    v_ok = enc.cover_ok & (dec.ell_hat == enc.ell)
    v_true = code.v_codebook[enc.ell].reshape(-1).astype(np.int64)
    if code.dec_map.ndim == 2:
        omni = code.dec_map[v_true, y.symbols]
    else:
        omni = code.dec_map[enc_prev.carrier, v_true, y.symbols]
    exact = True
    for seg, good in zip(_segments(code.n, code.sub_n), v_ok):
        if good and not np.array_equal(dec.shat_prev.symbols[seg], omni[seg]):
            exact = False
    omni_block = SequenceBlock(dec.shat_prev.alphabet, omni)
    return BlockRecord(
        block=block, cover_ok=bool(enc.cover_ok.all()), bin_decode_ok=bool(ch_ok.all()),
        v_decode_ok=bool(v_ok.all()), tv=_tv4(target, s, x, y, dec.shat_prev),
        tv_omniscient=_tv4(target, s, x, y, omni_block), sub_ok=tuple(bool(b) for b in v_ok),
        exact_on_ok=exact,
        channel_none=dec.channel_status.count("none_typical"),
        channel_ambiguous=dec.channel_status.count("ambiguous"),
        bin_none=dec.bin_status.count("none_typical"), bin_ambiguous=dec.bin_status.count("ambiguous"),
    )
