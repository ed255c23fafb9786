import numpy as np
import pytest

from coordlab import prob as P
from coordlab.blockmarkov import (BlockMarkovCode, CodeDesignError, block_streams, bm_decode_block, bm_encode_block,
                                  build_blockmarkov, run_chain)
from coordlab.presets import binary_example, causal_example, lossless_state
from coordlab.region import CAUSAL, NONCAUSAL, STRICT


@pytest.fixture(scope="module")
def lossless():
    return lossless_state()


@pytest.fixture(scope="module")
def strict_code(lossless):
    return build_blockmarkov(lossless.target, lossless.witnesses[STRICT], 100, 4, sub_n=25, rng=1,
                             binning="singleton")


@pytest.fixture(scope="module")
def causal():
    return causal_example()


@pytest.fixture(scope="module")
def causal_code(causal):
    return build_blockmarkov(causal.target, causal.witnesses[CAUSAL], 100, 3, sub_n=25, rng=1)


# ------------------------------------------------------------------- design

def test_strict_rates_frozen(strict_code):
    info = strict_code.info
    assert info["I_S_V_given_C"] == pytest.approx(0.46899559358928133, abs=1e-12)
    assert info["I_C_Y"] == pytest.approx(0.7136030428840439, abs=1e-12)
    assert info["I_V_Y_given_C"] == pytest.approx(0.0, abs=1e-12)
    assert info["slack"] == pytest.approx(0.24460744929476252, abs=1e-12)
    assert info["margins"] == [0.04, 0.04, 0.04]
    assert strict_code.rate_v == strict_code.rate_m == pytest.approx(0.50899559, abs=1e-8)
    assert info["binning"] == "singleton" and info["v_log2"] == info["bins_log2"] == 13
    assert strict_code.carrier == "X" and strict_code.x_codebook is strict_code.c_codebook


def test_causal_rates_frozen(causal_code):
    info = causal_code.info
    assert info["I_C_Y"] == pytest.approx(0.4157611883571444, abs=1e-12)
    assert info["I_V_Y_given_C"] == pytest.approx(0.2978418545268995, abs=1e-12)
    assert info["binning"] == "random"
    assert causal_code.rate_m == pytest.approx(0.31345746370976313, abs=1e-12)
    assert causal_code.num_bins == 256 and len(causal_code.v_codebook) == 8192
    assert causal_code.carrier == "U" and causal_code.enc_map is not None


def test_bins_are_balanced(causal_code):
    sizes = np.array([len(m) for m in causal_code.members])
    assert sizes.min() == sizes.max() == 32
    for k, mem in enumerate(causal_code.members[:10]):
        assert np.all(causal_code.bins[mem] == k)
    assert np.array_equal(np.sort(np.concatenate(causal_code.members)), np.arange(8192))


def test_singleton_bins_are_identity_sized(strict_code):
    assert all(len(m) == 1 for m in strict_code.members)


def test_infeasible_rates_name_the_inequality():
    pr = lossless_state(p=0.4)
    with pytest.raises(CodeDesignError) as e:
        build_blockmarkov(pr.target, pr.witnesses[STRICT], 100, 4, sub_n=25)
    msg = str(e.value)
    assert "channel: R_m=0.981 >= I(C;Y)-m=0.7036" in msg
    assert "total: I(C,V;Y)-I(C,V;S)=-0.2573" in msg
    pc = causal_example(p=0.4)
    with pytest.raises(CodeDesignError, match="bin size: R_v-R_m="):
        build_blockmarkov(pc.target, pc.witnesses[CAUSAL], 100, 4, sub_n=25)


@pytest.mark.parametrize("margin", [0.005, 0.02, 0.08])
def test_negative_slack_refused_at_any_margin(margin):
    pr = lossless_state(p=0.5)
    with pytest.raises(CodeDesignError, match="infeasible rates"):
        build_blockmarkov(pr.target, pr.witnesses[STRICT], 40, 2, margins=margin, sub_n=20)


def test_forced_rates_record_violations(lossless):
    c = build_blockmarkov(lossless.target, lossless.witnesses[STRICT], 20, 2, rates=(0.75, 0.75))
    assert c.info["forced"]
    assert c.info["violations"] == ["channel: R_m=0.75 >= I(C;Y)-m=0.6736"]
    assert c.info["v_log2"] == 15


def test_design_errors(lossless):
    w = lossless.witnesses[STRICT]
    with pytest.raises(CodeDesignError, match="B >= 2"):
        build_blockmarkov(lossless.target, w, 40, 1)
    with pytest.raises(CodeDesignError, match="binning"):
        build_blockmarkov(lossless.target, w, 40, 2, binning="bespoke")
    with pytest.raises(CodeDesignError, match="must divide"):
        build_blockmarkov(lossless.target, w, 40, 2, sub_n=15)
    with pytest.raises(CodeDesignError, match="margins must be positive"):
        build_blockmarkov(lossless.target, w, 40, 2, margins=0.0)
    b = binary_example()
    with pytest.raises(CodeDesignError, match="causal"):
        build_blockmarkov(b.target, b.witnesses[NONCAUSAL], 40, 2)


# ------------------------------------------------------------------- chains

def test_chain_frozen(strict_code, lossless):
    r = run_chain(strict_code, lossless.target, 3, seed=3)
    assert r.chain_tv == pytest.approx(0.1675, abs=1e-12)
    assert np.allclose(r.tvs, [0.24, 0.1225, 0.22], atol=1e-12)
    assert [b.sub_ok for b in r.per_block] == [(False, True, True, False), (False, False, True, False),
                                               (True, False, False, False)]
    assert [b.block for b in r.per_block] == [1, 2, 3]


def test_chain_is_deterministic(causal_code, causal):
    a = run_chain(causal_code, causal.target, 9)
    b = run_chain(causal_code, causal.target, 9)
    assert a == b


def test_two_blocks_give_one_record(lossless):
    c = build_blockmarkov(lossless.target, lossless.witnesses[STRICT], 50, 2, sub_n=25, rng=0)
    r = run_chain(c, lossless.target, 0)
    assert len(r.per_block) == 1 and r.per_block[0].block == 1


def test_chain_tv_bound(strict_code, causal_code, lossless, causal):
    for code, pr in ((strict_code, lossless), (causal_code, causal)):
        for k in range(5):
            r = run_chain(code, pr.target, k)
            # the last block carries a placeholder reconstruction worth at most TV 1
            assert r.chain_tv <= r.tvs.max() + 1.0 / code.B + 1e-12


def test_lossless_reconstruction_is_exact_when_decoded(strict_code, lossless):
    for k in range(10):
        r = run_chain(strict_code, lossless.target, k, keep_blocks=True)
        for rec in r.per_block:
            assert rec.exact_on_ok
            s = r.blocks["s"][rec.block - 1].symbols
            sh = r.blocks["shat"][rec.block - 1].symbols
            for seg, ok in zip(range(0, 100, 25), rec.sub_ok):
                if ok:
                    assert np.array_equal(sh[seg:seg + 25], s[seg:seg + 25])


def test_lossless_tv_shrinks_with_n(lossless):
    w = lossless.witnesses[STRICT]
    med = []
    for n in (50, 200):
        c = build_blockmarkov(lossless.target, w, n, 3, sub_n=25, rng=1, binning="singleton")
        med.append(np.median(np.concatenate([run_chain(c, lossless.target, k).tvs for k in range(15)])))
    assert med[1] < med[0]


def test_causal_chain_runs(causal_code, causal):
    r = run_chain(causal_code, causal.target, 4)
    assert r.chain_tv == pytest.approx(0.1325, abs=1e-12)
    assert len(r.per_block) == 2
    assert all(np.isfinite(r.tvs))


def test_strict_encoder_is_causal(strict_code, lossless):
    rng = np.random.default_rng(0)
    src = [P.sample_iid(lossless.target.source, 100, rng) for _ in range(4)]
    base = run_chain(strict_code, lossless.target, 5, source=src, keep_blocks=True)
    for i in range(4):
        alt = list(src)
        alt[i] = P.SequenceBlock(src[i].alphabet, 1 - src[i].symbols)
        r = run_chain(strict_code, lossless.target, 5, source=alt, keep_blocks=True)
        # X in blocks 1..i+1 (1-based) may use S only up to block i
        for j in range(i + 1):
            assert np.array_equal(r.blocks["x"][j].symbols, base.blocks["x"][j].symbols)


def test_causal_encoder_is_causal(causal_code, causal):
    rng = np.random.default_rng(1)
    src = [P.sample_iid(causal.target.source, 100, rng) for _ in range(3)]
    base = run_chain(causal_code, causal.target, 6, source=src, keep_blocks=True)
    for i in range(3):
        alt = list(src)
        alt[i] = P.SequenceBlock(src[i].alphabet, 1 - src[i].symbols)
        r = run_chain(causal_code, causal.target, 6, source=alt, keep_blocks=True)
        for j in range(i):
            assert np.array_equal(r.blocks["x"][j].symbols, base.blocks["x"][j].symbols)


def test_block_one_sends_index_zero(strict_code, causal_code, causal):
    e = bm_encode_block(strict_code, 1, None, None, 0)
    assert e.ell is None and np.all(e.m == 0)
    assert np.array_equal(e.x.symbols, np.tile(strict_code.c_codebook[0], 4))
    d = bm_decode_block(strict_code, 1, e.x, None, None)
    assert d.shat_prev is None and np.all(d.m_hat == 0)
    with pytest.raises(CodeDesignError, match="current source block"):
        bm_encode_block(causal_code, 1, None, None, 0)
    with pytest.raises(CodeDesignError, match="previous source block"):
        bm_encode_block(strict_code, 2, None, None, 0)


def test_block_streams_are_independent_of_b():
    a = block_streams(7, 3)
    b = block_streams(7, 5)
    for i in range(3):
        for k in range(3):
            assert a[i][k].integers(2 ** 32) == b[i][k].integers(2 ** 32)


def test_source_override_length(strict_code, lossless):
    with pytest.raises(CodeDesignError, match="need 4 source blocks"):
        run_chain(strict_code, lossless.target, 0, source=[])


def test_code_type(strict_code):
    assert isinstance(strict_code, BlockMarkovCode) and strict_code.scheme == STRICT
