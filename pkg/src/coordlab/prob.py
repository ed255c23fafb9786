"""Finite-alphabet probability arithmetic.

Every distribution lives on named axes; the axis name is the name of the
alphabet attached to it (``S``, ``X``, ``Y``, ``Shat``, ``U``, ``V``...).
Masses are float64 numpy arrays, frozen after construction. Logs are base 2.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

NORM_TOL = 1e-12
# sums closer to 1 than this are kept verbatim so decimal literals round-trip
_EXACT_TOL = 1e-14


class ProbabilityError(ValueError):
    """Raised for malformed distributions or invalid axis operations."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _normalize(mass: np.ndarray, axis=None, what="pmf") -> np.ndarray:
    if not np.all(np.isfinite(mass)):
        raise ProbabilityError(f"{what}: non-finite mass")
    if np.any(mass < -NORM_TOL):
        raise ProbabilityError(f"{what}: negative mass {mass.min()}")
    mass = np.where(mass < 0, 0.0, mass)
    total = mass.sum(axis=axis, keepdims=axis is not None)
    err = np.abs(total - 1.0)
    if np.any(err > NORM_TOL):
        raise ProbabilityError(f"{what}: mass sums to {np.ravel(total)[np.argmax(np.ravel(err))]!r}, not 1")
    if np.any(err > _EXACT_TOL):
        mass = mass / total
    return _frozen(mass)


@dataclass(frozen=True)
class Alphabet:
    name: str
    symbols: tuple

    def __post_init__(self):
        symbols = tuple(self.symbols)
        object.__setattr__(self, "symbols", symbols)
        if len(symbols) < 1:
            raise ProbabilityError(f"alphabet {self.name!r} is empty")
        if len(set(symbols)) != len(symbols):
            raise ProbabilityError(f"alphabet {self.name!r} has repeated symbols")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol) -> int:
        return self.symbols.index(symbol)

    def renamed(self, name: str) -> "Alphabet":
        return Alphabet(name, self.symbols)

    def same_symbols(self, other: "Alphabet") -> bool:
        return self.symbols == other.symbols

    @classmethod
    def range(cls, name: str, size: int) -> "Alphabet":
        return cls(name, tuple(range(size)))


def binary(name: str) -> Alphabet:
    return Alphabet(name, (0, 1))


@dataclass(frozen=True, eq=False)
class Pmf:
    alphabet: Alphabet
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.shape != (self.alphabet.size,):
            raise ProbabilityError(f"pmf on {self.alphabet.name}: shape {mass.shape} != ({self.alphabet.size},)")
        object.__setattr__(self, "mass", _normalize(mass, what=f"pmf on {self.alphabet.name}"))

    @property
    def name(self) -> str:
        return self.alphabet.name

    def to_joint(self) -> "JointPmf":
        return JointPmf((self.alphabet,), self.mass)


def bernoulli(name: str, p: float) -> Pmf:
    return Pmf(binary(name), [1.0 - p, p])


def uniform(alphabet: Alphabet) -> Pmf:
    return Pmf(alphabet, np.full(alphabet.size, 1.0 / alphabet.size))


def point_mass(alphabet: Alphabet, symbol) -> Pmf:
    m = np.zeros(alphabet.size)
    m[alphabet.index(symbol)] = 1.0
    return Pmf(alphabet, m)


@dataclass(frozen=True, eq=False)
class ConditionalPmf:
    """P(out | given...), stored as ``table[g1, ..., gk, o]``.

    ``zero_rows`` flags rows whose conditioning event had zero probability
    when the conditional was extracted by :func:`condition`; such rows are
    uniform placeholders and carry no constraint.
    """

    given: tuple
    out: Alphabet
    table: np.ndarray
    zero_rows: np.ndarray = field(default=None)

    def __post_init__(self):
        given = tuple(self.given)
        object.__setattr__(self, "given", given)
        shape = tuple(a.size for a in given) + (self.out.size,)
        table = np.asarray(self.table, dtype=np.float64)
        if table.shape != shape:
            raise ProbabilityError(f"conditional {self.out.name}|{self.given_names}: shape {table.shape} != {shape}")
        object.__setattr__(self, "table", _normalize(table, axis=-1, what=f"row of {self.out.name}|{self.given_names}"))
        zr = np.zeros(shape[:-1], dtype=bool) if self.zero_rows is None else np.asarray(self.zero_rows, dtype=bool)
        zr.setflags(write=False)
        object.__setattr__(self, "zero_rows", zr)

    @property
    def given_names(self) -> tuple:
        return tuple(a.name for a in self.given)

    @property
    def name(self) -> str:
        return self.out.name

    def row(self, *idx) -> np.ndarray:
        return self.table[tuple(idx)]


def bsc(given: Alphabet, out: Alphabet, eps: float) -> ConditionalPmf:
    return ConditionalPmf((given,), out, [[1 - eps, eps], [eps, 1 - eps]])


def identity_channel(given: Alphabet, out: Alphabet) -> ConditionalPmf:
    if given.size != out.size:
        raise ProbabilityError("identity channel needs equal alphabet sizes")
    return ConditionalPmf((given,), out, np.eye(given.size))


@dataclass(frozen=True, eq=False)
class SymbolMap:
    """Deterministic map ``out = f(given...)`` as an integer index table."""

    given: tuple
    out: Alphabet
    table: np.ndarray

    def __post_init__(self):
        given = tuple(self.given)
        object.__setattr__(self, "given", given)
        table = np.asarray(self.table)
        shape = tuple(a.size for a in given)
        if table.shape != shape:
            raise ProbabilityError(f"map to {self.out.name}: table shape {table.shape} != {shape}")
        if table.size and (table.min() < 0 or table.max() >= self.out.size or not np.issubdtype(table.dtype, np.integer)):
            raise ProbabilityError(f"map to {self.out.name}: entries must be indices into {self.out.symbols}")
        table = table.astype(np.int64)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def given_names(self) -> tuple:
        return tuple(a.name for a in self.given)

    @property
    def name(self) -> str:
        return self.out.name

    def to_conditional(self) -> ConditionalPmf:
        onehot = np.eye(self.out.size)[self.table]
        return ConditionalPmf(self.given, self.out, onehot)

    def apply(self, blocks: Sequence["SequenceBlock"]) -> "SequenceBlock":
        idx = tuple(b.symbols for b in blocks)
        return SequenceBlock(self.out, self.table[idx])


@dataclass(frozen=True, eq=False)
class JointPmf:
    axes: tuple
    mass: np.ndarray

    def __post_init__(self):
        axes = tuple(self.axes)
        object.__setattr__(self, "axes", axes)
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise ProbabilityError(f"duplicate axis names {names}")
        mass = np.asarray(self.mass, dtype=np.float64)
        shape = tuple(a.size for a in axes)
        if mass.shape != shape:
            raise ProbabilityError(f"joint over {names}: shape {mass.shape} != {shape}")
        object.__setattr__(self, "mass", _normalize(mass, what=f"joint over {names}"))

    @property
    def names(self) -> tuple:
        return tuple(a.name for a in self.axes)

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ProbabilityError(f"unknown axis {name!r}; have {self.names}") from None

    def alphabet(self, name: str) -> Alphabet:
        return self.axes[self.axis(name)]

    def reorder(self, names: Sequence[str]) -> "JointPmf":
        names = list(names)
        if sorted(names) != sorted(self.names):
            raise ProbabilityError(f"reorder {names} is not a permutation of {self.names}")
        perm = [self.axis(n) for n in names]
        return JointPmf(tuple(self.axes[i] for i in perm), np.transpose(self.mass, perm))

    def prob(self, **symbols) -> float:
        """Marginal probability of an event fixing some axes, e.g. ``j.prob(S=0, X=1)``."""
        m = marginalize(self, list(symbols))
        idx = tuple(m.alphabet(n).index(symbols[n]) for n in m.names)
        return float(m.mass[idx])


Distribution = Union[Pmf, JointPmf]
Factor = Union[Pmf, ConditionalPmf, SymbolMap]


@dataclass(frozen=True, eq=False)
class SequenceBlock:
    alphabet: Alphabet
    symbols: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.symbols)
        if s.ndim != 1 or s.size < 1:
            raise ProbabilityError("sequence block must be a non-empty 1-d array")
        if not np.issubdtype(s.dtype, np.integer) or s.min() < 0 or s.max() >= self.alphabet.size:
            raise ProbabilityError(f"block symbols outside alphabet {self.alphabet.name}")
        s = s.astype(np.int64)
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)

    def __len__(self) -> int:
        return int(self.symbols.size)

    @property
    def name(self) -> str:
        return self.alphabet.name

    def labels(self) -> list:
        return [self.alphabet.symbols[i] for i in self.symbols]


# ---------------------------------------------------------------- measures

def _names(group) -> list:
    if isinstance(group, str):
        return [group]
    return list(group)


def _as_joint(d) -> JointPmf:
    return d.to_joint() if isinstance(d, Pmf) else d


def entropy_array(mass: np.ndarray) -> float:
    p = np.ravel(mass)
    p = p[p > 0]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def binary_entropy(p: float) -> float:
    return entropy_array(np.array([p, 1.0 - p]))


def entropy(p: Distribution, group=None) -> float:
    """Entropy in bits of a pmf, of a joint, or of a group of a joint's axes."""
    j = _as_joint(p)
    if group is not None:
        j = marginalize(j, _names(group))
    return entropy_array(j.mass)


def _check_groups(j: JointPmf, *groups) -> list:
    out = []
    seen = set()
    for g in groups:
        g = _names(g)
        if not g:
            raise ProbabilityError("empty axis group")
        for n in g:
            j.axis(n)
            if n in seen:
                raise ProbabilityError(f"axis {n!r} appears in more than one group")
            seen.add(n)
        out.append(g)
    return out


def mutual_information(j: JointPmf, a, b) -> float:
    a, b = _check_groups(j, a, b)
    mi = entropy(j, a) + entropy(j, b) - entropy(j, a + b)
    return max(0.0, mi)


def conditional_mutual_information(j: JointPmf, a, b, c) -> float:
    a, b, c = _check_groups(j, a, b, c)
    cmi = entropy(j, a + c) + entropy(j, b + c) - entropy(j, a + b + c) - entropy(j, c)
    return max(0.0, cmi)


def total_variation(p: Distribution, q: Distribution) -> float:
    """Half the L1 distance; lies in [0, 1]."""
    p, q = _as_joint(p), _as_joint(q)
    if p.names != q.names or any(not a.same_symbols(b) for a, b in zip(p.axes, q.axes)):
        raise ProbabilityError(f"axes differ: {p.names} vs {q.names}")
    return float(0.5 * np.abs(p.mass - q.mass).sum())


# ---------------------------------------------------------- composition

def _factor_parts(f: Factor):
    if isinstance(f, Pmf):
        return (), f.alphabet, f.mass
    if isinstance(f, ConditionalPmf):
        return f.given, f.out, f.table
    if isinstance(f, SymbolMap):
        return f.given, f.out, f.to_conditional().table
    raise TypeError(f"cannot compose {type(f).__name__}")


def compose(factors: Iterable[Factor]) -> JointPmf:
    """Chain-rule product of factors, each conditioned only on earlier axes."""
    axes: list = []
    mass = np.ones(())
    letters = string.ascii_letters
    for f in factors:
        given, out, table = _factor_parts(f)
        names = [a.name for a in axes]
        if out.name in names:
            raise ProbabilityError(f"axis {out.name!r} produced twice")
        for g in given:
            if g.name not in names:
                raise ProbabilityError(f"factor for {out.name!r} conditions on {g.name!r}, which is not yet defined")
            if not axes[names.index(g.name)].same_symbols(g):
                raise ProbabilityError(f"alphabet of {g.name!r} differs between factors")
        if len(axes) + 1 > len(letters):
            raise ProbabilityError("too many axes")
        cur = letters[: len(axes)]
        new = letters[len(axes)]
        sub = "".join(cur[names.index(g.name)] for g in given) + new
        mass = np.einsum(f"{cur},{sub}->{cur}{new}", mass, table)
        axes.append(out)
    if not axes:
        raise ProbabilityError("compose needs at least one factor")
    return JointPmf(tuple(axes), mass)


def marginalize(j: JointPmf, keep):
    """Sum out every axis not in ``keep``; surviving axes keep j's order.

    Keeping no axis returns the total mass as a plain float.
    """
    keep = set(_names(keep))
    for n in keep:
        j.axis(n)
    if not keep:
        return float(j.mass.sum())
    drop = tuple(i for i, n in enumerate(j.names) if n not in keep)
    axes = tuple(a for a in j.axes if a.name in keep)
    return JointPmf(axes, j.mass.sum(axis=drop))


def condition(j: JointPmf, given, out: str | None = None, floor: float = 0.0) -> ConditionalPmf:
    """Extract P(out | given). Rows with conditioning mass <= floor come back uniform and flagged."""
    given = _names(given)
    for n in given:
        j.axis(n)
    rest = [n for n in j.names if n not in given]
    if out is None:
        if len(rest) != 1:
            raise ProbabilityError(f"ambiguous conditional: remaining axes {rest}; pass out=")
        out = rest[0]
    if out in given:
        raise ProbabilityError(f"{out!r} is both conditioned on and conditioned")
    sub = marginalize(j, given + [out]).reorder(given + [out])
    num = sub.mass
    den = num.sum(axis=-1, keepdims=True)
    zero = den[..., 0] <= floor
    size = num.shape[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        table = np.where(den > floor, num / np.where(den > 0, den, 1.0), 1.0 / size)
    return ConditionalPmf(sub.axes[:-1], sub.axes[-1], table, zero_rows=zero)


def product(*dists: Distribution) -> JointPmf:
    """Independent product of pmfs/joints over disjoint axes."""
    js = [_as_joint(d) for d in dists]
    axes = tuple(a for d in js for a in d.axes)
    mass = js[0].mass
    for d in js[1:]:
        mass = np.multiply.outer(mass, d.mass)
    return JointPmf(axes, mass)


# ------------------------------------------------------------- sampling

def make_rng(seed) -> np.random.Generator:
    """Seedable generator; ``seed`` may be an int, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def spawn(seed: int, count: int) -> list:
    """Independent child generators derived from one master seed."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(count)]


def _draw(cdf_rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(cdf_rows.shape[0])
    idx = (u[:, None] >= cdf_rows).sum(axis=1)
    return np.minimum(idx, cdf_rows.shape[1] - 1)


def sample_iid(p: Pmf, n: int, rng) -> SequenceBlock:
    if n < 1:
        raise ProbabilityError("n must be >= 1")
    rng = make_rng(rng)
    cdf = np.cumsum(p.mass)
    return SequenceBlock(p.alphabet, _draw(np.broadcast_to(cdf, (n, cdf.size)), rng))


def sample_through(c: ConditionalPmf | SymbolMap, inputs: Sequence[SequenceBlock], rng) -> SequenceBlock:
    """Memoryless pass: position i draws from the row picked by the input symbols at i."""
    inputs = list(inputs)
    if len(inputs) != len(c.given):
        raise ProbabilityError(f"{c.name} needs {len(c.given)} input blocks, got {len(inputs)}")
    n = len(inputs[0])
    if any(len(b) != n for b in inputs):
        raise ProbabilityError("input blocks have different lengths")
    for b, a in zip(inputs, c.given):
        if not b.alphabet.same_symbols(a):
            raise ProbabilityError(f"input block {b.name} does not match alphabet {a.name}")
    if isinstance(c, SymbolMap):
        return c.apply(inputs)
    rng = make_rng(rng)
    rows = c.table[tuple(b.symbols for b in inputs)]
    return SequenceBlock(c.out, _draw(np.cumsum(rows, axis=1), rng))


# -------------------------------------------------------- empirical pmfs

def empirical_counts(blocks: Sequence[SequenceBlock]) -> np.ndarray:
    n = len(blocks[0])
    if any(len(b) != n for b in blocks):
        raise ProbabilityError("blocks have different lengths")
    shape = tuple(b.alphabet.size for b in blocks)
    flat = np.ravel_multi_index(tuple(b.symbols for b in blocks), shape)
    return np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape)


def empirical_joint(blocks: Sequence[SequenceBlock], names: Sequence[str] | None = None) -> JointPmf:
    blocks = list(blocks)
    if not blocks:
        raise ProbabilityError("no blocks")
    counts = empirical_counts(blocks)
    axes = [b.alphabet for b in blocks]
    if names is not None:
        if len(names) != len(axes):
            raise ProbabilityError("one name per block required")
        axes = [a.renamed(nm) for a, nm in zip(axes, names)]
    return JointPmf(tuple(axes), counts / len(blocks[0]))


def is_typical(blocks: Sequence[SequenceBlock], target: JointPmf, eps: float, strict_support: bool = False) -> bool:
    """TV-typicality of the blocks' empirical joint against ``target`` (axes in block order).

    With ``strict_support`` tuples outside the target's support also make the
    blocks atypical.
    """
    if eps < 0:
        raise ProbabilityError("eps must be >= 0")
    emp = empirical_joint(blocks, target.names)
    if strict_support and np.any((emp.mass > 0) & (target.mass <= 0)):
        return False
    return total_variation(emp, target) <= eps


# ---------------------------------------------------------- serialization

def _alpha_dict(a: Alphabet) -> dict:
    return {"name": a.name, "symbols": list(a.symbols)}


def _alpha(d) -> Alphabet:
    return Alphabet(d["name"], tuple(d["symbols"]))


def to_dict(obj) -> dict:
    if isinstance(obj, Alphabet):
        return {"type": "alphabet", **_alpha_dict(obj)}
    if isinstance(obj, Pmf):
        return {"type": "pmf", "alphabet": _alpha_dict(obj.alphabet), "mass": obj.mass.tolist()}
    if isinstance(obj, ConditionalPmf):
        return {"type": "conditional", "given": [_alpha_dict(a) for a in obj.given],
                "out": _alpha_dict(obj.out), "table": obj.table.tolist()}
    if isinstance(obj, SymbolMap):
        return {"type": "map", "given": [_alpha_dict(a) for a in obj.given],
                "out": _alpha_dict(obj.out), "table": obj.table.tolist()}
    if isinstance(obj, JointPmf):
        return {"type": "joint", "axes": [_alpha_dict(a) for a in obj.axes], "mass": obj.mass.tolist()}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_dict(d: dict):
    kind = d.get("type")
    try:
        if kind == "alphabet":
            return _alpha(d)
        if kind == "pmf":
            return Pmf(_alpha(d["alphabet"]), d["mass"])
        if kind == "conditional":
            return ConditionalPmf(tuple(_alpha(a) for a in d["given"]), _alpha(d["out"]), d["table"])
        if kind == "map":
            return SymbolMap(tuple(_alpha(a) for a in d["given"]), _alpha(d["out"]), np.asarray(d["table"], dtype=np.int64))
        if kind == "joint":
            return JointPmf(tuple(_alpha(a) for a in d["axes"]), d["mass"])
    except KeyError as e:
        raise ProbabilityError(f"{kind}: missing field {e}") from None
    raise ProbabilityError(f"unknown object type {kind!r}")


def dumps(obj, **kw) -> str:
    return json.dumps(to_dict(obj), **kw)


def loads(text: str):
    return from_dict(json.loads(text))
