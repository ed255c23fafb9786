"""Named problem instances with hand-built witnesses.

Each preset returns a :class:`Problem`: the target plus whatever witnesses
are known in closed form, keyed by region. Missing witnesses are found by
search in the harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import prob
from .prob import Alphabet, ConditionalPmf, SymbolMap, binary
from .region import (CAUSAL, NONCAUSAL, SEPARATION, STRICT, CoordinationTarget, RegionError, Witness,
                     certify, check_separation, make_binary_example, make_target, separation_to_noncausal,
                     strict_to_causal, witness_joint)


@dataclass(frozen=True, eq=False)
class Problem:
    name: str
    params: dict
    target: CoordinationTarget
    witnesses: dict = field(default_factory=dict)


def _xor_table(k: int = 2) -> np.ndarray:
    a = np.arange(k)
    return (a[:, None] + a[None, :]) % k


def _copy_map(given: tuple, out: Alphabet, which: int) -> SymbolMap:
    shape = tuple(g.size for g in given)
    idx = np.indices(shape)[which]
    return SymbolMap(given, out, idx)


def binary_example(p: float = 0.4, eps: float = 0.1, d: float = 0.2) -> Problem:
    """Bern(p) source, BSC(eps), X = Shat at Hamming distance d from S."""
    t, w = make_binary_example(p, eps, d)
    return Problem("binary_example", {"p": p, "eps": eps, "d": d}, t, {NONCAUSAL: w})


def lossless_state(p: float = 0.1, px: float = 0.5, eps: float = 0.05) -> Problem:
    """Shat = S exactly, X ~ Bern(px) independent of S, BSC(eps).

    Strictly causal witness: V = S, shat(v, y) = v.
    """
    S, X, Y, Sh, V = (binary(n) for n in ("S", "X", "Y", "Shat", "V"))
    source = prob.bernoulli("S", p)
    channel = prob.bsc(X, Y, eps)
    t = make_target(source, ConditionalPmf((S,), X, [[1 - px, px], [1 - px, px]]), channel,
                    _copy_map((S, X, Y), Sh, 0))
    v_xs = ConditionalPmf((X, S), V, np.broadcast_to(np.eye(2), (2, 2, 2)).copy())
    w = Witness(STRICT, (prob.bernoulli("X", px), v_xs), (_copy_map((V, Y), Sh, 0),), 0.0)
    w = _with_slack(t, w)
    return Problem("lossless_state", {"p": p, "px": px, "eps": eps}, t, {STRICT: w, CAUSAL: strict_to_causal(t, w)})


def causal_example(p: float = 0.1, eps: float = 0.05) -> Problem:
    """Shat = S with X = U xor S, U ~ Bern(1/2); needs random binning (I(V;Y|U) > 0)."""
    S, X, Y, Sh, U, V = (binary(n) for n in ("S", "X", "Y", "Shat", "U", "V"))
    source = prob.bernoulli("S", p)
    channel = prob.bsc(X, Y, eps)
    x_map = SymbolMap((S, U), X, _xor_table())
    v_su = ConditionalPmf((S, U), V, np.eye(2)[:, None, :].repeat(2, axis=1))
    sh_map = _copy_map((U, V, Y), Sh, 1)
    w = Witness(CAUSAL, (prob.bernoulli("U", 0.5), v_su), (x_map, sh_map), 0.0)
    j = witness_joint(CoordinationTarget(source, channel, _placeholder(source, channel)), w)
    t = CoordinationTarget(source, channel, prob.marginalize(j, ["S", "X", "Y", "Shat"]))
    return Problem("causal_example", {"p": p, "eps": eps}, t, {CAUSAL: _with_slack(t, w)})


def separation_example(p: float = 0.5, d: float = 0.2, px: float = 0.5, eps: float = 0.05) -> Problem:
    """Shat from S through BSC(d), X ~ Bern(px) independent of (S, Shat), BSC(eps)."""
    S, X, Y, Sh = (binary(n) for n in ("S", "X", "Y", "Shat"))
    source = prob.bernoulli("S", p)
    channel = prob.bsc(X, Y, eps)
    joint = prob.compose([source, prob.bsc(S, Sh, d), prob.bernoulli("X", px), channel])
    t = CoordinationTarget(source, channel, joint)
    v = check_separation(t)
    if not v.member:
        raise RegionError(f"separation_example({p}, {d}, {px}, {eps}) violates I(S;Shat) <= I(X;Y)")
    return Problem("separation_example", {"p": p, "d": d, "px": px, "eps": eps}, t,
                   {SEPARATION: v.witness, NONCAUSAL: separation_to_noncausal(t, v.witness)})


def identity(p: float = 0.5) -> Problem:
    """Noiseless degenerate case: X = Y = Shat = S and a constant U."""
    S, X, Y, Sh = (binary(n) for n in ("S", "X", "Y", "Shat"))
    U = Alphabet("U", (0,))
    source = prob.bernoulli("S", p)
    channel = prob.identity_channel(X, Y)
    t = make_target(source, prob.identity_channel(S, X), channel, _copy_map((S, X, Y), Sh, 0))
    w = Witness(NONCAUSAL, (ConditionalPmf((S,), U, [[1.0], [1.0]]),),
                (_copy_map((S, U), X, 0), _copy_map((U, Y), Sh, 1)), 0.0)
    return Problem("identity", {"p": p}, t, {NONCAUSAL: _with_slack(t, w)})


def _placeholder(source, channel) -> prob.JointPmf:
    # any valid joint with the right axes; only used to carry alphabets
    sh = Alphabet("Shat", source.alphabet.symbols)
    return prob.product(source, prob.uniform(channel.given[0]), prob.uniform(channel.out), prob.uniform(sh))


def _with_slack(t: CoordinationTarget, w: Witness) -> Witness:
    c = certify(t, w)
    if c.tv > 1e-9:
        raise RegionError(f"preset witness does not reproduce its target (TV {c.tv:.3g})")
    return Witness(w.scheme, w.factors, w.maps, c.slack)


PRESETS = {
    "binary_example": binary_example,
    "lossless_state": lossless_state,
    "causal_example": causal_example,
    "separation_example": separation_example,
    "identity": identity,
}


def get_preset(name: str, **params) -> Problem:
    try:
        fn = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return fn(**params)


def random_binary_target(rng, card_u: int = 2) -> Problem:
    """Target generated by a random noncausal witness over binary alphabets.

    P_S, a binary channel, P(U|S) and the maps x(s, u), shat(u, y) are all
    drawn at random, so the target satisfies the factorization but may or
    may not satisfy the information constraint.
    """
    rng = prob.make_rng(rng)
    S, X, Y, Sh = (binary(n) for n in ("S", "X", "Y", "Shat"))
    U = Alphabet.range("U", card_u)
    source = prob.Pmf(S, rng.dirichlet([1, 1]))
    flip = rng.uniform(0.0, 0.3, size=2)
    channel = ConditionalPmf((X,), Y, [[1 - flip[0], flip[0]], [flip[1], 1 - flip[1]]])
    u_s = ConditionalPmf((S,), U, rng.dirichlet(np.ones(card_u), size=2))
    x_map = SymbolMap((S, U), X, rng.integers(0, 2, size=(2, card_u)))
    sh_map = SymbolMap((U, Y), Sh, rng.integers(0, 2, size=(card_u, 2)))
    w = Witness(NONCAUSAL, (u_s,), (x_map, sh_map), 0.0)
    j = witness_joint(CoordinationTarget(source, channel, _placeholder(source, channel)), w)
    t = CoordinationTarget(source, channel, prob.marginalize(j, ["S", "X", "Y", "Shat"]))
    c = certify(t, w)
    return Problem("random_binary", {"card_u": card_u}, t,
                   {NONCAUSAL: Witness(NONCAUSAL, w.factors, w.maps, c.slack)})
