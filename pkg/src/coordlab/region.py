"""Membership of a coordination target in the achievable regions.

Three auxiliary-variable regions are searched (noncausal inner bound, causal,
strictly causal) plus the separation baseline, which needs no search.

Search strategy
---------------
For every region the auxiliary conditionals collapse into a single latent
variable ``W`` per source symbol, ``r[s, w] = P(W=w | S=s)``:

* noncausal:        W = U,      r = P(u|s)
* causal:           W = (U, V), r = P(u) P(v|s,u)   (U independent of S)
* strictly causal:  W = (X, V), r = P(x) P(v|x,s)

Once the deterministic maps are fixed, the (S, X, Y, Shat) marginal is
linear in ``r``, so matching the target is an LP (minimum TV). The
information constraint ``I(W;S) <= I(W;Y)`` is then maximised as a slack
over the matching polytope by a multi-start pattern search that only
moves toward polytope vertices.

Every witness returned is re-checked by :func:`certify`, which rebuilds
the joint from the witness factors with :func:`coordlab.prob.compose` and
never looks at the search state.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import prob
from .prob import (Alphabet, ConditionalPmf, JointPmf, Pmf, ProbabilityError, SymbolMap,
                   binary, binary_entropy, compose, condition, marginalize, mutual_information,
                   total_variation)

MEMBER = "member_with_witness"
NOT_FOUND = "not_found"
INFEASIBLE = "infeasible_factorization"

NONCAUSAL = "noncausal"
CAUSAL = "causal"
STRICT = "strictly_causal"
SEPARATION = "separation"
SCHEMES = (NONCAUSAL, CAUSAL, STRICT, SEPARATION)

TARGET_AXES = ("S", "X", "Y", "Shat")
TARGET_TOL = 1e-9


class RegionError(ValueError):
    pass


# ------------------------------------------------------------------ types

@dataclass(frozen=True, eq=False)
class CoordinationTarget:
    """A candidate joint over (S, X, Y, Shat) with the source and channel it must honour."""

    source: Pmf
    channel: ConditionalPmf
    joint: JointPmf

    def __post_init__(self):
        if sorted(self.joint.names) != sorted(TARGET_AXES):
            raise RegionError(f"target joint must have axes {TARGET_AXES}, got {self.joint.names}")
        j = self.joint.reorder(TARGET_AXES)
        object.__setattr__(self, "joint", j)
        if self.source.name != "S" or not self.source.alphabet.same_symbols(j.alphabet("S")):
            raise RegionError("source alphabet does not match the target's S axis")
        if self.channel.given_names != ("X",) or self.channel.name != "Y":
            raise RegionError("channel must be a conditional of Y given X")
        if not self.channel.given[0].same_symbols(j.alphabet("X")) or not self.channel.out.same_symbols(j.alphabet("Y")):
            raise RegionError("channel alphabets do not match the target's X/Y axes")

    def alphabet(self, name: str) -> Alphabet:
        return self.joint.alphabet(name)

    @property
    def sizes(self) -> tuple:
        return self.joint.mass.shape


@dataclass(frozen=True)
class TargetReport:
    status: str
    problems: tuple = ()

    @property
    def ok(self) -> bool:
        return self.status != INFEASIBLE


@dataclass(frozen=True, eq=False)
class Witness:
    """Auxiliary factors and symbol maps certifying membership in one region.

    ``factors`` holds the region's free conditionals (e.g. ``P(U|S)``);
    ``maps`` the deterministic maps (``X = x(S, U)``, ``Shat = shat(U, Y)``...).
    The source and channel come from the target.
    """

    scheme: str
    factors: tuple
    maps: tuple
    slack: float

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise RegionError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "maps", tuple(self.maps))

    def part(self, name: str):
        for f in self.factors + self.maps:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def aux_alphabets(self) -> dict:
        return {n: self.part(n).out if not isinstance(self.part(n), Pmf) else self.part(n).alphabet
                for n in ("U", "V") if self._has(n)}

    def _has(self, name: str) -> bool:
        try:
            self.part(name)
            return True
        except KeyError:
            return False


@dataclass
class MembershipVerdict:
    status: str
    witness: Witness | None = None
    search_log: dict = field(default_factory=dict)

    @property
    def member(self) -> bool:
        return self.status == MEMBER


@dataclass(frozen=True)
class Certificate:
    tv: float
    lhs: float
    rhs: float
    ok: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


@dataclass(frozen=True)
class SearchConfig:
    starts: int = 64
    match_tol: float = 1e-6
    slack_tol: float = 1e-9
    enum_cap: int = 4096          # map pairs enumerated exhaustively up to this count
    map_samples: int = 256        # pairs drawn when the map space is larger
    vertices: int = 12            # random-objective LPs per feasible map pair
    iters: int = 120
    seed: int = 0
    init: tuple = ()              # witnesses injected as extra start points


# --------------------------------------------------------------- validation

def validate_target(t: CoordinationTarget, tol: float = TARGET_TOL) -> TargetReport:
    """Check P_S, the channel and the Markov chain S - X - Y under the target."""
    j = t.joint.mass
    problems = []
    ps = j.sum(axis=(1, 2, 3))
    if np.max(np.abs(ps - t.source.mass)) > tol:
        problems.append(f"S marginal {ps.tolist()} differs from the source {t.source.mass.tolist()}")
    psxy = j.sum(axis=3)
    psx = psxy.sum(axis=2)
    px = psx.sum(axis=0)
    W = t.channel.table
    if np.max(np.abs(psxy.sum(axis=0) - px[:, None] * W)) > tol:
        problems.append("Y given X differs from the channel")
    if np.max(np.abs(psxy - psx[:, :, None] * W[None])) > tol:
        problems.append("Y depends on S given X (joint does not factor as P_S P_X|S P_Y|X P_Shat|SXY)")
    return TargetReport(INFEASIBLE if problems else "valid", tuple(problems))


def make_target(source: Pmf, x_given_s: ConditionalPmf, channel: ConditionalPmf,
                shat_given_sxy: ConditionalPmf | SymbolMap) -> CoordinationTarget:
    joint = compose([source, x_given_s, channel, shat_given_sxy])
    return CoordinationTarget(source, channel, joint)


def target_to_dict(t: CoordinationTarget) -> dict:
    return {"type": "target", "source": prob.to_dict(t.source), "channel": prob.to_dict(t.channel),
            "joint": prob.to_dict(t.joint)}


def target_from_dict(d: dict) -> CoordinationTarget:
    if d.get("type") != "target":
        raise RegionError(f"expected an object of type 'target', got {d.get('type')!r}")
    try:
        return CoordinationTarget(prob.from_dict(d["source"]), prob.from_dict(d["channel"]), prob.from_dict(d["joint"]))
    except KeyError as e:
        raise RegionError(f"target: missing field {e}") from None


def witness_to_dict(w: Witness) -> dict:
    return {"type": "witness", "scheme": w.scheme, "factors": [prob.to_dict(f) for f in w.factors],
            "maps": [prob.to_dict(m) for m in w.maps], "slack": w.slack}


def witness_from_dict(d: dict) -> Witness:
    if d.get("type") != "witness":
        raise RegionError(f"expected an object of type 'witness', got {d.get('type')!r}")
    try:
        return Witness(d["scheme"], [prob.from_dict(f) for f in d["factors"]],
                       [prob.from_dict(m) for m in d["maps"]], float(d.get("slack", 0.0)))
    except KeyError as e:
        raise RegionError(f"witness: missing field {e}") from None


# ------------------------------------------------------------ certificates

_ORDER = {
    NONCAUSAL: ("S", "U", "X", "Y", "Shat"),
    CAUSAL: ("U", "S", "V", "X", "Y", "Shat"),
    STRICT: ("S", "X", "V", "Y", "Shat"),
    SEPARATION: ("S", "Shat", "X", "Y"),
}

_CONSTRAINT = {
    NONCAUSAL: (("U",), ("S",), ("U",), ("Y",)),
    CAUSAL: (("U", "V"), ("S",), ("U", "V"), ("Y",)),
    STRICT: (("X", "V"), ("S",), ("X", "V"), ("Y",)),
    SEPARATION: (("S",), ("Shat",), ("X",), ("Y",)),
}


def witness_joint(t: CoordinationTarget, w: Witness) -> JointPmf:
    factors = []
    for name in _ORDER[w.scheme]:
        if name == "S":
            factors.append(t.source)
        elif name == "Y":
            factors.append(t.channel)
        else:
            factors.append(w.part(name))
    return compose(factors)


def constraint_sides(j: JointPmf, scheme: str) -> tuple:
    a, b, c, d = _CONSTRAINT[scheme]
    return mutual_information(j, a, b), mutual_information(j, c, d)


def certify(t: CoordinationTarget, w: Witness, match_tol: float = 1e-6, slack_tol: float = 1e-9) -> Certificate:
    """Independent check: recompose the witness and test marginal match plus the information constraint."""
    j = witness_joint(t, w)
    tv = total_variation(marginalize(j, TARGET_AXES).reorder(TARGET_AXES), t.joint)
    lhs, rhs = constraint_sides(j, w.scheme)
    return Certificate(tv, lhs, rhs, tv <= match_tol and rhs - lhs >= -slack_tol)


# ------------------------------------------------------------ separation

def check_separation(t: CoordinationTarget, match_tol: float = 1e-6, slack_tol: float = 1e-9) -> MembershipVerdict:
    """Deterministic test for the separation set: P = P_{S,Shat} x P_{X,Y} and I(S;Shat) <= I(X;Y)."""
    rep = validate_target(t)
    if not rep.ok:
        return MembershipVerdict(INFEASIBLE, None, {"problems": list(rep.problems)})
    j = t.joint
    sep = prob.product(marginalize(j, ["S", "Shat"]), marginalize(j, ["X", "Y"])).reorder(TARGET_AXES)
    residual = total_variation(sep, j)
    i_ss = mutual_information(j, "S", "Shat")
    i_xy = mutual_information(j, "X", "Y")
    log = {"residual": residual, "I_S_Shat": i_ss, "I_X_Y": i_xy, "slack": i_xy - i_ss}
    if residual > match_tol or i_ss > i_xy + slack_tol:
        return MembershipVerdict(NOT_FOUND, None, log)
    w = Witness(SEPARATION, (condition(j, ["S"], "Shat"), _pmf_of(j, "X")), (), i_xy - i_ss)
    return MembershipVerdict(MEMBER, w, log)


def _pmf_of(j: JointPmf, name: str) -> Pmf:
    m = marginalize(j, [name])
    return Pmf(m.axes[0], m.mass)


# ---------------------------------------------------------- binary example

def make_binary_example(p: float, eps: float, d: float) -> tuple:
    """Bern(p) source over BSC(eps), with P[S != X] = P[S != Shat] = d and Shat = X.

    The witness takes U = X with X ~ Bern((p - d) / (1 - 2d)), the minimum
    I(X;S) test channel at Hamming distortion d.
    """
    if not (0.0 <= eps <= d <= p <= 0.5) or d >= 0.5:
        raise RegionError(f"need 0 <= eps <= d <= p <= 1/2 and d < 1/2, got p={p}, eps={eps}, d={d}")
    q = (p - d) / (1.0 - 2.0 * d)
    S, X, Y, Sh, U = binary("S"), binary("X"), binary("Y"), binary("Shat"), binary("U")
    # joint of (S, X): S = X xor Bern(d)
    psx = np.array([[(1 - q) * (1 - d), q * d],
                    [(1 - q) * d, q * (1 - d)]])
    source = Pmf(S, [1 - p, p])
    ps = psx.sum(axis=1)
    x_given_s = np.where(ps[:, None] > 0, psx / np.where(ps > 0, ps, 1)[:, None], 0.5)
    channel = prob.bsc(X, Y, eps)
    target = make_target(source, ConditionalPmf((S,), X, x_given_s), channel,
                         SymbolMap((S, X, Y), Sh, np.broadcast_to(np.arange(2)[None, :, None], (2, 2, 2))))
    u_given_s = ConditionalPmf((S,), U, x_given_s, zero_rows=ps <= 0)
    x_map = SymbolMap((S, U), X, np.array([[0, 1], [0, 1]]))
    shat_map = SymbolMap((U, Y), Sh, np.array([[0, 0], [1, 1]]))
    qe = q * (1 - eps) + (1 - q) * eps
    slack = (binary_entropy(qe) - binary_entropy(eps)) - (binary_entropy(p) - binary_entropy(d))
    return target, Witness(NONCAUSAL, (u_given_s,), (x_map, shat_map), slack)


# ------------------------------------------------------- containment maps

def separation_to_noncausal(t: CoordinationTarget, w: Witness) -> Witness:
    """U = (X', Shat') with X' ~ P_X independent of S and Shat' ~ P(Shat|S)."""
    px = w.part("X").mass
    sh_s = w.part("Shat").table
    nx, nsh = px.size, sh_s.shape[1]
    S, X, Y, Sh = (t.alphabet(n) for n in TARGET_AXES)
    U = Alphabet.range("U", nx * nsh)
    table = (px[None, :, None] * sh_s[:, None, :]).reshape(S.size, nx * nsh)
    ux, ush = np.divmod(np.arange(nx * nsh), nsh)
    x_map = SymbolMap((S, U), X, np.broadcast_to(ux, (S.size, U.size)).copy())
    sh_map = SymbolMap((U, Y), Sh, np.broadcast_to(ush[:, None], (U.size, Y.size)).copy())
    return Witness(NONCAUSAL, (ConditionalPmf((S,), U, table),), (x_map, sh_map), w.slack)


def strict_to_causal(t: CoordinationTarget, w: Witness) -> Witness:
    """U plays the role of X: x(s, u) = u and shat(u, v, y) = shat(v, y)."""
    S, X, Y, Sh = (t.alphabet(n) for n in TARGET_AXES)
    U = Alphabet("U", X.symbols)
    px = w.part("X")
    v_xs = w.part("V")
    V = v_xs.out
    shat = w.part("Shat").table  # [v, y]
    x_map = SymbolMap((S, U), X, np.broadcast_to(np.arange(X.size), (S.size, X.size)).copy())
    sh_map = SymbolMap((U, V, Y), Sh, np.broadcast_to(shat, (X.size,) + shat.shape).copy())
    v_su = ConditionalPmf((S, U), V, np.transpose(v_xs.table, (1, 0, 2)))
    return Witness(CAUSAL, (Pmf(U, px.mass), v_su), (x_map, sh_map), w.slack)


# ------------------------------------------------------------ search core

def _all_tables(shape: tuple, k: int):
    size = int(np.prod(shape))
    for combo in itertools.product(range(k), repeat=size):
        yield np.array(combo, dtype=np.int64).reshape(shape)


def _count_tables(shape: tuple, k: int) -> int:
    return k ** int(np.prod(shape))


def _random_table(shape: tuple, k: int, rng) -> np.ndarray:
    return rng.integers(0, k, size=shape)


class _Layout:
    """Region-specific glue between latent W = (w1, w2) and the maps."""

    def __init__(self, t: CoordinationTarget, scheme: str, card_u: int = 1, card_v: int = 1):
        self.t = t
        self.scheme = scheme
        nS, nX, nY, nSh = t.sizes
        self.nS, self.nX, self.nY, self.nSh = nS, nX, nY, nSh
        if scheme == NONCAUSAL:
            self.latent = (card_u,)
            self.x_shape, self.sh_shape = (nS, card_u), (card_u, nY)
        elif scheme == CAUSAL:
            self.latent = (card_u, card_v)
            self.x_shape, self.sh_shape = (nS, card_u), (card_u, card_v, nY)
        elif scheme == STRICT:
            self.latent = (nX, card_v)
            self.x_shape, self.sh_shape = None, (card_v, nY)
        else:
            raise RegionError(f"no search for scheme {scheme!r}")
        self.L = int(np.prod(self.latent))
        self.coupled = scheme == CAUSAL
        self.card_u, self.card_v = card_u, card_v

    # map tables -> flat (S, L) and (L, Y) index arrays
    def flat_x(self, xm) -> np.ndarray:
        if self.scheme == NONCAUSAL:
            return xm
        if self.scheme == CAUSAL:
            return np.repeat(xm, self.card_v, axis=1)
        return np.broadcast_to(np.repeat(np.arange(self.nX), self.card_v), (self.nS, self.L))

    def flat_sh(self, sm) -> np.ndarray:
        if self.scheme == NONCAUSAL:
            return sm
        if self.scheme == CAUSAL:
            return sm.reshape(self.L, self.nY)
        return np.broadcast_to(sm, (self.nX,) + sm.shape).reshape(self.L, self.nY)

    def map_space(self) -> tuple:
        nx = 1 if self.x_shape is None else _count_tables(self.x_shape, self.nX)
        return nx, _count_tables(self.sh_shape, self.nSh)

    def x_tables(self):
        if self.x_shape is None:
            yield None
        else:
            yield from _all_tables(self.x_shape, self.nX)

    def sh_tables(self):
        yield from _all_tables(self.sh_shape, self.nSh)

    def random_pair(self, rng):
        xm = None if self.x_shape is None else _random_table(self.x_shape, self.nX, rng)
        return xm, _random_table(self.sh_shape, self.nSh, rng)

    def canonical(self, xm, sm) -> bool:
        """True when the pair is the lexicographically smallest under relabelling of free latent symbols."""
        key = self._key(xm, sm)
        for pu, pv in self._perms():
            if self._key(*self._permute(xm, sm, pu, pv)) < key:
                return False
        return True

    def _perms(self):
        pus = [None] if self.scheme == STRICT else list(itertools.permutations(range(self.card_u)))
        pvs = [None] if self.scheme == NONCAUSAL else list(itertools.permutations(range(self.card_v)))
        return itertools.product(pus, pvs)

    def _permute(self, xm, sm, pu, pv):
        if self.scheme == NONCAUSAL:
            return xm[:, list(pu)], sm[list(pu)]
        if self.scheme == CAUSAL:
            return xm[:, list(pu)], sm[list(pu)][:, list(pv)]
        return None, sm[list(pv)]

    @staticmethod
    def _key(xm, sm):
        return (() if xm is None else tuple(np.ravel(xm))) + tuple(np.ravel(sm))

    # witness <-> latent parametrisation
    def to_witness(self, r: np.ndarray, xm, sm) -> Witness:
        t = self.t
        S, X, Y, Sh = (t.alphabet(n) for n in TARGET_AXES)
        ps = t.source.mass
        r = _clean_rows(r)
        if self.scheme == NONCAUSAL:
            U = Alphabet.range("U", self.card_u)
            return Witness(NONCAUSAL, (ConditionalPmf((S,), U, r),),
                           (SymbolMap((S, U), X, xm), SymbolMap((U, Y), Sh, sm)), float("nan"))
        r3 = r.reshape(self.nS, *self.latent)
        first = r3.sum(axis=2)                               # [s, w1]
        marg = ps @ first if ps.sum() > 0 else first.mean(axis=0)
        marg = marg / marg.sum()
        cond = np.where(first[..., None] > 0, r3 / np.where(first > 0, first, 1)[..., None], 1.0 / self.latent[1])
        if self.scheme == CAUSAL:
            U, V = Alphabet.range("U", self.card_u), Alphabet.range("V", self.card_v)
            return Witness(CAUSAL, (Pmf(U, marg), ConditionalPmf((S, U), V, cond)),
                           (SymbolMap((S, U), X, xm), SymbolMap((U, V, Y), Sh, sm)), float("nan"))
        V = Alphabet.range("V", self.card_v)
        return Witness(STRICT, (Pmf(X, marg), ConditionalPmf((X, S), V, np.transpose(cond, (1, 0, 2)))),
                       (SymbolMap((V, Y), Sh, sm),), float("nan"))

    def from_witness(self, w: Witness):
        """Embed a (possibly smaller-cardinality) witness of the same scheme; None if it does not fit."""
        if w.scheme != self.scheme:
            return None
        try:
            if self.scheme == NONCAUSAL:
                tab = w.part("U").table
                k = tab.shape[1]
                if k > self.card_u:
                    return None
                r = np.zeros((self.nS, self.card_u))
                r[:, :k] = tab
                xm = np.zeros(self.x_shape, dtype=np.int64)
                xm[:, :k] = w.part("X").table
                sm = np.zeros(self.sh_shape, dtype=np.int64)
                sm[:k] = w.part("Shat").table
                return xm, sm, r
            if self.scheme == CAUSAL:
                pu, v = w.part("U").mass, w.part("V").table   # v[s, u, v]
                ku, kv = pu.size, v.shape[2]
                if ku > self.card_u or kv > self.card_v:
                    return None
                r = np.zeros((self.nS, self.card_u, self.card_v))
                r[:, :ku, :kv] = pu[None, :, None] * v
                xm = np.zeros(self.x_shape, dtype=np.int64)
                xm[:, :ku] = w.part("X").table
                sm = np.zeros(self.sh_shape, dtype=np.int64)
                sm[:ku, :kv] = w.part("Shat").table
                return xm, sm, r.reshape(self.nS, self.L)
            px, v = w.part("X").mass, w.part("V").table       # v[x, s, v]
            kv = v.shape[2]
            if kv > self.card_v:
                return None
            r = np.zeros((self.nS, self.nX, self.card_v))
            r[:, :, :kv] = px[None, :, None] * np.transpose(v, (1, 0, 2))
            sm = np.zeros(self.sh_shape, dtype=np.int64)
            sm[:kv] = w.part("Shat").table
            return None, sm, r.reshape(self.nS, self.L)
        except KeyError:
            return None


def _clean_rows(r: np.ndarray) -> np.ndarray:
    r = np.clip(r, 0.0, None)
    r[r < 1e-13] = 0.0
    s = r.sum(axis=-1, keepdims=True)
    return np.where(s > 0, r / np.where(s > 0, s, 1), 1.0 / r.shape[-1])


class _Pair:
    """One fixed choice of deterministic maps, with its linear matching system."""

    def __init__(self, lay: _Layout, xm, sm):
        self.lay, self.xm, self.sm = lay, xm, sm
        t = lay.t
        self.ps = t.source.mass
        self.W = t.channel.table
        self.T = t.joint.mass
        self.xf = lay.flat_x(xm)      # [s, w] -> x
        self.shf = lay.flat_sh(sm)    # [w, y] -> shat
        nS, nX, nY, nSh, L = lay.nS, lay.nX, lay.nY, lay.nSh, lay.L
        A = np.zeros((nS, L, nX, nY, nSh))
        s_idx, w_idx = np.meshgrid(np.arange(nS), np.arange(L), indexing="ij")
        for y in range(nY):
            xs = self.xf
            A[s_idx, w_idx, xs, y, self.shf[w_idx, y]] = self.W[xs, y]
        self.A = A
        self.wy = self.W[self.xf]      # [s, w, y]

    def support_ok(self) -> bool:
        """Necessary condition: every target cell (s,x,y,shat) is reachable by some latent symbol."""
        reach = self.A.max(axis=1) > 0               # [s, x, y, shat]
        need = self.T > 0
        return not np.any(need & ~reach)

    def marginal(self, r: np.ndarray) -> np.ndarray:
        return np.einsum("s,sw,swxyz->sxyz", self.ps, r, self.A)

    def tv(self, r: np.ndarray) -> float:
        return float(0.5 * np.abs(self.marginal(r) - self.T).sum())

    def slack(self, r: np.ndarray) -> np.ndarray:
        """I(W;Y) - I(W;S) for a batch r[..., s, w]."""
        ps = self.ps
        psw = ps[:, None] * r
        pw = psw.sum(axis=-2, keepdims=True)
        i_ws = _mi_terms(psw, ps[:, None] * pw)
        pwy = np.einsum("...sw,swy->...wy", psw, self.wy)
        py = pwy.sum(axis=-2, keepdims=True)
        i_wy = _mi_terms(pwy, np.swapaxes(pw, -1, -2) * py)
        return i_wy - i_ws

    def _lp_parts(self):
        lay = self.lay
        nS, L = lay.nS, lay.L
        C = lay.nX * lay.nY * lay.nSh
        nr, ne = nS * L, nS * C
        rows, rhs = [], []
        for s in range(nS):
            row = np.zeros(nr + 2 * ne)
            row[s * L:(s + 1) * L] = 1.0
            rows.append(row)
            rhs.append(1.0)
        Af = self.A.reshape(nS, L, C)
        Tf = self.T.reshape(nS, C)
        for s in range(nS):
            for c in range(C):
                row = np.zeros(nr + 2 * ne)
                row[s * L:(s + 1) * L] = self.ps[s] * Af[s, :, c]
                row[nr + s * C + c] = -1.0
                row[nr + ne + s * C + c] = 1.0
                rows.append(row)
                rhs.append(Tf[s, c])
        if lay.coupled:
            cu, cv = lay.latent
            for s in range(1, nS):
                for u in range(cu):
                    row = np.zeros(nr + 2 * ne)
                    row[s * L + u * cv:s * L + (u + 1) * cv] = 1.0
                    row[u * cv:(u + 1) * cv] -= 1.0
                    rows.append(row)
                    rhs.append(0.0)
        cost_e = np.zeros(nr + 2 * ne)
        cost_e[nr:] = 0.5
        return np.array(rows), np.array(rhs), cost_e, nr

    def min_tv(self):
        A_eq, b_eq, c, nr = self._lp_parts()
        res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if res.status != 0:
            return math.inf, None
        r = _clean_rows(res.x[:nr].reshape(self.lay.nS, self.lay.L))
        return self.tv(r), r

    def vertices(self, tv_cap: float, count: int, rng) -> list:
        A_eq, b_eq, c_e, nr = self._lp_parts()
        out = []
        for _ in range(count):
            c = np.zeros_like(c_e)
            c[:nr] = rng.normal(size=nr)
            res = linprog(c, A_ub=c_e[None], b_ub=[tv_cap], A_eq=A_eq, b_eq=b_eq,
                          bounds=(0, None), method="highs")
            if res.status == 0:
                out.append(_clean_rows(res.x[:nr].reshape(self.lay.nS, self.lay.L)))
        return out


def _mi_terms(pj: np.ndarray, pprod: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(pj > 0, pj * np.log2(np.where(pj > 0, pj, 1) / np.where(pprod > 0, pprod, 1)), 0.0)
    return t.sum(axis=(-1, -2))


def _pattern_search(pair: _Pair, pool: np.ndarray, starts: np.ndarray, iters: int) -> tuple:
    """Maximise slack by moves toward pool points, globally and (when rows decouple) row by row."""
    cur = starts.copy()
    val = pair.slack(cur)
    step = np.full(len(cur), 0.5)
    nS = cur.shape[1]
    rowwise = not pair.lay.coupled and nS > 1
    it = 0
    for it in range(iters):
        active = step > 1e-6
        if not active.any():
            break
        idx = np.flatnonzero(active)
        c = cur[idx][:, None]                                  # [b, 1, s, w]
        tt = step[idx][:, None, None, None]
        moves = [c + tt * (pool[None] - c)]                    # [b, k, s, w]
        if rowwise:
            for s in range(nS):
                m = np.repeat(c, len(pool), axis=1).copy()
                m[:, :, s] = c[:, :, s] + tt[..., 0] * (pool[None, :, s] - c[:, :, s])
                moves.append(m)
        cand = np.concatenate(moves, axis=1)
        cv = pair.slack(cand)
        best = cv.argmax(axis=1)
        bv = cv[np.arange(len(idx)), best]
        better = bv > val[idx] + 1e-13
        upd = idx[better]
        cur[upd] = cand[better, best[better]]
        val[upd] = bv[better]
        step[idx[~better]] *= 0.5
    return cur, val, it + 1


def _search(t: CoordinationTarget, lay: _Layout, cfg: SearchConfig) -> MembershipVerdict:
    rng = prob.make_rng(cfg.seed)
    nx, nsh = lay.map_space()
    total = nx * nsh
    pairs = []
    injected = []
    for w in cfg.init:
        emb = lay.from_witness(w)
        if emb is not None:
            injected.append(emb)
            pairs.append((emb[0], emb[1]))
    if total <= cfg.enum_cap:
        mode = "enumerated"
        for xm in lay.x_tables():
            for sm in lay.sh_tables():
                if lay.canonical(xm, sm):
                    pairs.append((xm, sm))
    else:
        mode = "sampled"
        seeds = [(a, b) for a, b in pairs]
        for i in range(cfg.map_samples):
            xm, sm = lay.random_pair(rng)
            if seeds and i % 2 == 0:
                # perturb a seeded pair on a random subset of entries
                bx, bs = seeds[(i // 2) % len(seeds)]
                if bx is not None:
                    mask = rng.random(bx.shape) < 0.25
                    xm = np.where(mask, xm, bx)
                mask = rng.random(bs.shape) < 0.25
                sm = np.where(mask, sm, bs)
            pairs.append((xm, sm))

    seen = set()
    results = []
    lp_count = 0
    screened = 0
    best_resid = (math.inf, None)
    for k, (xm, sm) in enumerate(pairs):
        key = _Layout._key(xm, sm)
        if key in seen:
            continue
        seen.add(key)
        pair = _Pair(lay, xm, sm)
        if not pair.support_ok():
            continue
        screened += 1
        tv0, r0 = pair.min_tv()
        lp_count += 1
        if r0 is None:
            continue
        if tv0 > cfg.match_tol:
            s0 = float(pair.slack(r0))
            resid = tv0 + max(0.0, -s0)
            if resid < best_resid[0]:
                best_resid = (resid, s0)
            continue
        n_vert = cfg.vertices if mode == "enumerated" else max(3, cfg.vertices // 4)
        verts = pair.vertices(tv0 + 1e-10 + 1e-6 * cfg.match_tol, n_vert, rng)
        lp_count += n_vert
        pool = [r0] + verts
        extra = [emb[2] for emb in injected if _Layout._key(emb[0], emb[1]) == key]
        pool_arr = np.array(pool + extra)
        n_starts = max(cfg.starts, len(pool_arr))
        mix = rng.dirichlet(np.full(len(pool_arr), 0.5), size=n_starts - len(pool_arr))
        starts = np.concatenate([pool_arr, np.einsum("bk,ksw->bsw", mix, pool_arr)])
        cur, val, _ = _pattern_search(pair, pool_arr, starts, cfg.iters)
        tvs = np.array([pair.tv(c) for c in cur])
        ok = tvs <= cfg.match_tol
        if not ok.any():
            continue
        i = int(np.flatnonzero(ok)[np.argmax(val[ok])])
        r = cur[i]
        pw = (pair.ps[:, None] * r).sum(axis=0)
        results.append((float(val[i]), int((pw > 1e-12).sum()), k, float(tvs[i]), xm, sm, r))
        resid = float(tvs[i]) + max(0.0, -float(val[i]))
        if resid < best_resid[0] or (resid == best_resid[0] and float(val[i]) > (best_resid[1] or -math.inf)):
            best_resid = (resid, float(val[i]))

    exact = lay.scheme != NONCAUSAL
    log = {
        "scheme": lay.scheme,
        "latent": list(lay.latent),
        "map_space": total,
        "map_mode": mode,
        "pairs_screened": screened,
        "pairs_matching": len(results),
        "lp_solves": lp_count,
        "best_residual": best_resid[0],
        "best_slack": best_resid[1],
        "note": ("region is exact but the search is heuristic; not_found is not a proof of non-membership"
                 if exact else "inner bound with heuristic search; not_found is not a proof of non-membership"),
    }
    # max slack, then fewest used latent symbols, then enumeration order
    results.sort(key=lambda x: (-x[0], x[1], x[2]))
    for slack, used, k, tv, xm, sm, r in results:
        if slack < -cfg.slack_tol:
            break
        w = lay.to_witness(r, xm, sm)
        cert = certify(t, w, cfg.match_tol, cfg.slack_tol)
        if cert.ok:
            w = Witness(w.scheme, w.factors, w.maps, cert.slack)
            log.update(best_residual=cert.tv, best_slack=cert.slack, used_latent=used)
            return MembershipVerdict(MEMBER, w, log)
    return MembershipVerdict(NOT_FOUND, None, log)


def default_card_u(t: CoordinationTarget) -> int:
    nS, nX, _, _ = t.sizes
    return nS * nX + 2


def default_card_v(t: CoordinationTarget) -> int:
    nS, nX, nY, _ = t.sizes
    return nS * nX * nY + 2


def _ladder(t: CoordinationTarget, scheme: str, cards: tuple, cfg: SearchConfig) -> MembershipVerdict:
    """Search at the requested cardinality; if that map space is too big to enumerate,
    first solve the largest enumerable smaller cardinality and inject its witness."""
    lay = _Layout(t, scheme, *cards)
    nx, nsh = lay.map_space()
    if nx * nsh <= cfg.enum_cap:
        return _search(t, lay, cfg)
    small = None
    for shrink in _smaller_cards(scheme, cards):
        l2 = _Layout(t, scheme, *shrink)
        a, b = l2.map_space()
        if a * b <= cfg.enum_cap:
            small = shrink
            break
    init = cfg.init
    pre_log = None
    if small is not None:
        pre = _search(t, _Layout(t, scheme, *small), cfg)
        pre_log = pre.search_log
        if pre.member:
            init = init + (pre.witness,)
    cfg2 = SearchConfig(**{**cfg.__dict__, "init": init})
    v = _search(t, lay, cfg2)
    if pre_log is not None:
        v.search_log["ladder"] = {"cards": list(small), **{k: pre_log[k] for k in ("map_space", "pairs_matching")}}
    return v


def _smaller_cards(scheme: str, cards: tuple):
    cu, cv = cards
    if scheme == NONCAUSAL:
        for k in range(cu - 1, 0, -1):
            yield (k, 1)
    elif scheme == STRICT:
        for k in range(cv - 1, 0, -1):
            yield (1, k)
    else:
        for total in range(cu + cv - 1, 1, -1):
            for a in range(min(cu, total - 1), 0, -1):
                b = total - a
                if 1 <= b <= cv and (a, b) != (cu, cv):
                    yield (a, b)


def check_noncausal_inner(t: CoordinationTarget, card_u: int | None = None,
                          cfg: SearchConfig = SearchConfig()) -> MembershipVerdict:
    """Search for U with P = P_S P_U|S x(s,u) P_Y|X shat(u,y) and I(U;S) <= I(U;Y)."""
    rep = validate_target(t)
    if not rep.ok:
        return MembershipVerdict(INFEASIBLE, None, {"problems": list(rep.problems)})
    card_u = card_u or default_card_u(t)
    if card_u < 1:
        raise RegionError("card_u must be >= 1")
    return _ladder(t, NONCAUSAL, (card_u, 1), cfg)


def check_causal(t: CoordinationTarget, card_u: int | None = None, card_v: int | None = None,
                 cfg: SearchConfig = SearchConfig()) -> MembershipVerdict:
    """Search for U independent of S and V with x(s,u), shat(u,v,y) and I(U,V;S) <= I(U,V;Y)."""
    rep = validate_target(t)
    if not rep.ok:
        return MembershipVerdict(INFEASIBLE, None, {"problems": list(rep.problems)})
    card_u = card_u or default_card_u(t)
    card_v = card_v or default_card_v(t)
    if card_u < 1 or card_v < 1:
        raise RegionError("cardinalities must be >= 1")
    return _ladder(t, CAUSAL, (card_u, card_v), cfg)


def check_strictly_causal(t: CoordinationTarget, card_v: int | None = None,
                          cfg: SearchConfig = SearchConfig()) -> MembershipVerdict:
    """Search for V with P = P_S P_X P_V|XS P_Y|X shat(v,y) and I(X,V;S) <= I(X,V;Y)."""
    rep = validate_target(t)
    if not rep.ok:
        return MembershipVerdict(INFEASIBLE, None, {"problems": list(rep.problems)})
    psx = t.joint.mass.sum(axis=(2, 3))
    dep = float(np.max(np.abs(psx - np.outer(psx.sum(axis=1), psx.sum(axis=0)))))
    if dep > TARGET_TOL:
        return MembershipVerdict(INFEASIBLE, None, {
            "problems": [f"X is not independent of S (max |P(s,x) - P(s)P(x)| = {dep:.3g}); "
                         "a strictly causal encoder cannot correlate X with the current source symbol"]})
    card_v = card_v or default_card_v(t)
    if card_v < 1:
        raise RegionError("card_v must be >= 1")
    return _ladder(t, STRICT, (1, card_v), cfg)


def check_region(t: CoordinationTarget, region: str, card_u: int | None = None, card_v: int | None = None,
                 cfg: SearchConfig = SearchConfig()) -> MembershipVerdict:
    if region == NONCAUSAL:
        return check_noncausal_inner(t, card_u, cfg)
    if region == CAUSAL:
        return check_causal(t, card_u, card_v, cfg)
    if region == STRICT:
        return check_strictly_causal(t, card_v, cfg)
    if region == SEPARATION:
        return check_separation(t, cfg.match_tol, cfg.slack_tol)
    raise RegionError(f"unknown region {region!r}")


# -------------------------------------------------------------- brute force

def simplex_grid(k: int, step: float) -> np.ndarray:
    """All points of the (k-1)-simplex with coordinates on multiples of ``step``."""
    N = int(round(1.0 / step))
    if abs(N * step - 1.0) > 1e-9:
        raise RegionError("grid_step must divide 1")
    pts = [c for c in itertools.product(range(N + 1), repeat=k - 1) if sum(c) <= N]
    return np.array([list(c) + [N - sum(c)] for c in pts], dtype=np.float64) / N


def simplex_grid_size(k: int, step: float) -> int:
    N = int(round(1.0 / step))
    return math.comb(N + k - 1, k - 1)


def brute_force_membership(t: CoordinationTarget, region: str, card_caps: dict | None = None,
                           grid_step: float = 0.05, match_tol: float | None = None,
                           slack_tol: float = 1e-9, guard: int = 10 ** 7) -> MembershipVerdict:
    """Exhaustive grid over the auxiliary factors and every deterministic map.

    Returns the grid point with the smallest residual TV + max(0, -slack),
    ties broken by larger slack. Membership is declared when the residual is
    at most ``match_tol`` (default: half the grid step, since off-grid
    witnesses can only be approximated).
    """
    card_caps = card_caps or {}
    match_tol = grid_step / 2 if match_tol is None else match_tol
    rep = validate_target(t)
    if not rep.ok:
        return MembershipVerdict(INFEASIBLE, None, {"problems": list(rep.problems)})
    nS, nX, nY, nSh = t.sizes
    ps, W, T = t.source.mass, t.channel.table, t.joint.mass
    S, X, Y, Sh = (t.alphabet(n) for n in TARGET_AXES)
    eyeX, eyeSh = np.eye(nX), np.eye(nSh)

    if region == NONCAUSAL:
        cu = card_caps.get("U", 2)
        grid_size = simplex_grid_size(cu, grid_step) ** nS
        maps = (_count_tables((nS, cu), nX), _count_tables((cu, nY), nSh))
    elif region == STRICT:
        cv = card_caps.get("V", 2)
        grid_size = simplex_grid_size(nX, grid_step) * simplex_grid_size(cv, grid_step) ** (nX * nS)
        maps = (1, _count_tables((cv, nY), nSh))
    elif region == CAUSAL:
        cu, cv = card_caps.get("U", 2), card_caps.get("V", 2)
        grid_size = simplex_grid_size(cu, grid_step) * simplex_grid_size(cv, grid_step) ** (nS * cu)
        maps = (_count_tables((nS, cu), nX), _count_tables((cu, cv, nY), nSh))
    else:
        raise RegionError(f"brute force not defined for {region!r}")
    work = grid_size * maps[0] * maps[1]
    if work > guard:
        raise RegionError(f"brute-force grid of {work} points exceeds the guard {guard}")

    def rows_product(grid, nrows):
        idx = np.array(list(itertools.product(range(len(grid)), repeat=nrows)), dtype=np.int64)
        return grid[idx]                                    # [G, nrows, k]

    def mi(pj):                                              # pj [G, a, b]
        pa = pj.sum(axis=2, keepdims=True)
        pb = pj.sum(axis=1, keepdims=True)
        return _mi_terms(pj, pa * pb)

    best = None

    def consider(resid, slack, tvs, make):
        nonlocal best
        order = np.lexsort((-slack, np.round(resid, 12)))
        i = int(order[0])
        cand = (round(float(resid[i]), 12), -float(slack[i]))
        if best is None or cand < best[0]:
            best = (cand, float(tvs[i]), float(slack[i]), make(i))

    if region == NONCAUSAL:
        g = simplex_grid(cu, grid_step)
        Q = rows_product(g, nS)                             # [G, s, u]
        psu = ps[None, :, None] * Q
        i_us = mi(psu)
        for xm in _all_tables((nS, cu), nX):
            X1 = eyeX[xm]                                   # [s, u, x]
            puy = np.einsum("gsu,sux,xy->guy", psu, X1, W)
            i_uy = mi(puy)
            slack = i_uy - i_us
            for sm in _all_tables((cu, nY), nSh):
                Sh1 = eyeSh[sm]                             # [u, y, z]
                M = np.einsum("gsu,sux,xy,uyz->gsxyz", psu, X1, W, Sh1)
                tvs = 0.5 * np.abs(M - T[None]).reshape(len(Q), -1).sum(axis=1)
                resid = tvs + np.maximum(0.0, -slack)
                U = Alphabet.range("U", cu)
                consider(resid, slack, tvs, lambda i, xm=xm, sm=sm: Witness(
                    NONCAUSAL, (ConditionalPmf((S,), U, Q[i]),),
                    (SymbolMap((S, U), X, xm), SymbolMap((U, Y), Sh, sm)), float(slack[i])))
    elif region == STRICT:
        gx, gv = simplex_grid(nX, grid_step), simplex_grid(cv, grid_step)
        PV = rows_product(gv, nX * nS).reshape(-1, nX, nS, cv)
        G = len(gx) * len(PV)
        PX = np.repeat(gx, len(PV), axis=0)
        PVb = np.tile(PV, (len(gx), 1, 1, 1))
        pxvs = np.einsum("gx,s,gxsv->gxvs", PX, ps, PVb).reshape(G, nX * cv, nS)
        i_s = mi(pxvs)
        pxvy = np.einsum("gxvs,xy->gxvy", pxvs.reshape(G, nX, cv, nS), W).reshape(G, nX * cv, nY)
        i_y = mi(pxvy)
        slack = i_y - i_s
        for sm in _all_tables((cv, nY), nSh):
            M = np.einsum("gx,s,gxsv,xy,vyz->gsxyz", PX, ps, PVb, W, eyeSh[sm])
            tvs = 0.5 * np.abs(M - T[None]).reshape(G, -1).sum(axis=1)
            resid = tvs + np.maximum(0.0, -slack)
            V = Alphabet.range("V", cv)
            consider(resid, slack, tvs, lambda i, sm=sm: Witness(
                STRICT, (Pmf(X, PX[i]), ConditionalPmf((X, S), V, PVb[i])),
                (SymbolMap((V, Y), Sh, sm),), float(slack[i])))
    else:
        gu, gv = simplex_grid(cu, grid_step), simplex_grid(cv, grid_step)
        PV = rows_product(gv, nS * cu).reshape(-1, nS, cu, cv)
        G = len(gu) * len(PV)
        PU = np.repeat(gu, len(PV), axis=0)
        PVb = np.tile(PV, (len(gu), 1, 1, 1))
        puvs = np.einsum("gu,s,gsuv->guvs", PU, ps, PVb).reshape(G, cu * cv, nS)
        i_s = mi(puvs)
        U, V = Alphabet.range("U", cu), Alphabet.range("V", cv)
        for xm in _all_tables((nS, cu), nX):
            X1 = eyeX[xm]
            puvy = np.einsum("gu,s,gsuv,sux,xy->guvy", PU, ps, PVb, X1, W).reshape(G, cu * cv, nY)
            slack = mi(puvy) - i_s
            for sm in _all_tables((cu, cv, nY), nSh):
                M = np.einsum("gu,s,gsuv,sux,xy,uvyz->gsxyz", PU, ps, PVb, X1, W, eyeSh[sm])
                tvs = 0.5 * np.abs(M - T[None]).reshape(G, -1).sum(axis=1)
                resid = tvs + np.maximum(0.0, -slack)
                consider(resid, slack, tvs, lambda i, xm=xm, sm=sm: Witness(
                    CAUSAL, (Pmf(U, PU[i]), ConditionalPmf((S, U), V, PVb[i])),
                    (SymbolMap((S, U), X, xm), SymbolMap((U, V, Y), Sh, sm)), float(slack[i])))

    (_, tv, slack, w) = best
    log = {"grid_points": grid_size, "map_pairs": maps[0] * maps[1], "best_residual": tv + max(0.0, -slack),
           "best_tv": tv, "best_slack": slack, "grid_step": grid_step}
    if tv <= match_tol and slack >= -slack_tol:
        return MembershipVerdict(MEMBER, w, log)
    log["best_point"] = w
    return MembershipVerdict(NOT_FOUND, None, log)
