"""Index sets and the partial product/combination algebra on them.

An index set collects regularity indices (nonnegative rationals, or an
integer interval [0, k] with k possibly infinite).  A distributive
structure on such a set carries two partial binary maps, eps and delta,
tied together by two distributivity laws and idempotency of delta.
Built-in instances cover the pointwise C^k calculus (both maps are max),
the Lebesgue exponent calculus behind the Holder inequality, and the
convolution exponent calculus behind the Young inequality.

Partiality is explicit: eps and delta return None when a pair has no
result, and the law checker reports one-side-defined pairs separately
from genuine law violations.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

__all__ = [
    "INFINITY", "IndexSet", "DistributiveStructure", "AdditiveDegreeSet",
    "IndexAlgebraError", "UndefinedIndexError",
    "builtin_structure", "from_tables", "check_distributive_laws",
    "LawIssue", "LawReport", "eps_power", "beta_window",
    "integer_additive_set", "gamma_z", "is_ordinary", "OrdinaryReport",
]

INFINITY = math.inf


class IndexAlgebraError(ValueError):
    """Bad index, bad structure parameters, or misuse of a partial map."""


class UndefinedIndexError(IndexAlgebraError):
    """A required eps/delta application had no defined result."""


def _as_index(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float) and x == int(x):
        return Fraction(int(x))
    raise IndexAlgebraError(f"index {x!r} is not a rational number")


@dataclass(frozen=True, eq=False)
class IndexSet:
    """Finite ordered set of rational indices, or the integer interval
    [0, top] with top a nonnegative integer or infinity."""

    elements: tuple | None = None
    top: int | float | None = None

    def __post_init__(self):
        if (self.elements is None) == (self.top is None):
            raise IndexAlgebraError("give either elements or an interval top")
        if self.top is not None:
            t = self.top
            if t is not INFINITY and t != math.inf:
                if not isinstance(t, int) or t < 0:
                    raise IndexAlgebraError(
                        f"interval top must be a nonnegative integer or "
                        f"infinity, got {t!r}")

    @classmethod
    def of(cls, items: Iterable) -> "IndexSet":
        vals = sorted({_as_index(x) for x in items})
        for v in vals:
            if v < 0:
                raise IndexAlgebraError(f"negative index {v}")
        return cls(elements=tuple(vals))

    @classmethod
    def interval(cls, top) -> "IndexSet":
        if top == math.inf:
            return cls(top=INFINITY)
        return cls(top=int(top))

    @property
    def is_interval(self) -> bool:
        return self.top is not None

    @property
    def is_infinite(self) -> bool:
        return self.top == math.inf

    def contains(self, x) -> bool:
        try:
            v = _as_index(x)
        except IndexAlgebraError:
            return False
        if self.elements is not None:
            return v in self.elements
        if v < 0 or v.denominator != 1:
            return False
        return self.is_infinite or v <= self.top

    __contains__ = contains

    def members(self) -> tuple:
        """All members, smallest first.  Errors on [0, infinity)."""
        if self.elements is not None:
            return self.elements
        if self.is_infinite:
            raise IndexAlgebraError("cannot enumerate the infinite interval")
        return tuple(Fraction(i) for i in range(self.top + 1))

    def has_degree(self, r: int) -> bool:
        """True when every integer in [0, r] belongs to the set."""
        if self.is_interval:
            return self.is_infinite or r <= self.top
        return all(Fraction(i) in self.elements for i in range(r + 1))

    def __eq__(self, other):
        if not isinstance(other, IndexSet):
            return NotImplemented
        if self.is_infinite or other.is_infinite:
            return self.is_infinite and other.is_infinite
        return set(self.members()) == set(other.members())

    def __hash__(self):
        if self.is_infinite:
            return hash("interval-inf")
        return hash(frozenset(self.members()))

    def __repr__(self):
        if self.is_infinite:
            return "IndexSet[0,inf)"
        if self.is_interval:
            return f"IndexSet[0,{self.top}]"
        return f"IndexSet{{{', '.join(str(e) for e in self.elements)}}}"


@dataclass(frozen=True)
class DistributiveStructure:
    """Index set with partial maps eps and delta.

    eps(i, j) models the index of a product of two coefficient families;
    delta(i, j) the index of their combination.  Both return None when
    the pair has no defined result.
    """

    name: str
    base: IndexSet
    eps_map: Callable = field(repr=False)
    delta_map: Callable = field(repr=False)

    def _check_member(self, x) -> Fraction:
        v = _as_index(x)
        if not self.base.contains(v):
            raise IndexAlgebraError(f"index {v} is not in the base set")
        return v

    def eps(self, i, j) -> Fraction | None:
        return self.eps_map(self._check_member(i), self._check_member(j))

    def delta(self, i, j) -> Fraction | None:
        return self.delta_map(self._check_member(i), self._check_member(j))


def _holder_eps(base: IndexSet):
    # i*j/(i+j), kept only when it lands back in the base set
    def eps(i: Fraction, j: Fraction):
        v = i * j / (i + j)
        if v.denominator == 1 and base.contains(v):
            return v
        return None
    return eps


def _young_eps(base: IndexSet):
    def eps(i: Fraction, j: Fraction):
        den = i + j - i * j
        if den <= 0:
            return None
        v = i * j / den
        if v.denominator == 1 and base.contains(v):
            return v
        return None
    return eps


def builtin_structure(name: str, params) -> DistributiveStructure:
    """Construct one of the built-in structures.

    pointwise_ck(k) and max_interval(k): eps = delta = max on [0, k].
    holder_lp(exponents): delta = min; eps(i, j) = i*j/(i+j) when that
    is an integer in the exponent set, else undefined.
    young_conv(exponents): delta = min; eps(i, j) = i*j/(i+j-i*j) when
    the denominator is positive and the value an integer in the set.
    """
    if name in ("pointwise_ck", "max_interval"):
        k = params
        if not (isinstance(k, int) and k >= 0) and k != math.inf:
            raise IndexAlgebraError(f"{name} needs k >= 0, got {params!r}")
        base = IndexSet.interval(k)
        return DistributiveStructure(name, base, max, max)
    if name in ("holder_lp", "young_conv"):
        base = IndexSet.of(params)
        if not base.elements:
            raise IndexAlgebraError(f"{name} needs a nonempty exponent set")
        for e in base.elements:
            if e.denominator != 1 or e < 1:
                raise IndexAlgebraError(
                    f"{name} exponents must be positive integers, got {e}")
        eps = _holder_eps(base) if name == "holder_lp" else _young_eps(base)
        return DistributiveStructure(name, base, eps, min)
    raise IndexAlgebraError(f"unknown structure name {name!r}")


def from_tables(base: IndexSet, eps_table: Mapping | Iterable,
                delta_table: Mapping | Iterable) -> DistributiveStructure:
    """Custom structure from explicit tables.

    Each table is a mapping {(i, j): value} or an iterable of
    (i, j, value) triples; absent pairs are undefined.
    """
    def normalize(table):
        if isinstance(table, Mapping):
            items = [(k[0], k[1], v) for k, v in table.items()]
        else:
            items = [tuple(row) for row in table]
        out = {}
        for i, j, v in items:
            fi, fj, fv = _as_index(i), _as_index(j), _as_index(v)
            for x in (fi, fj, fv):
                if not base.contains(x):
                    raise IndexAlgebraError(
                        f"table entry {x} is not in the base set")
            out[(fi, fj)] = fv
        return out

    emap = normalize(eps_table)
    dmap = normalize(delta_table)
    return DistributiveStructure(
        "custom-table", base,
        lambda i, j: emap.get((i, j)),
        lambda i, j: dmap.get((i, j)))


# ---------------------------------------------------------------------------
# law checking

@dataclass(frozen=True)
class LawIssue:
    law: str                      # "left-distributive", "right-distributive",
    indices: tuple                # or "delta-idempotent"
    lhs: Fraction | None
    rhs: Fraction | None

    def describe(self) -> str:
        def s(v):
            return "undefined" if v is None else str(v)
        return (f"{self.law} at {tuple(map(str, self.indices))}: "
                f"{s(self.lhs)} vs {s(self.rhs)}")


@dataclass(frozen=True)
class LawReport:
    structure: str
    triples_checked: int
    violations: tuple[LawIssue, ...]   # both sides defined, unequal
    partial: tuple[LawIssue, ...]      # exactly one side defined
    undefined_eps: tuple = ()          # pairs where eps has no result
    undefined_delta: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.violations


_EXHAUSTIVE_LIMIT = 64


def check_distributive_laws(ds: DistributiveStructure,
                            sample: int | None = None,
                            seed: int = 0) -> LawReport:
    """Check both distributivity laws and delta idempotency.

    Exhaustive over all triples when the base is finite or an interval
    with top at most 64; larger bases need a sample budget.  A triple
    where both sides are defined but differ is a violation; a triple
    where exactly one side is defined is recorded as a partiality, not
    a failure.
    """
    base = ds.base
    if base.is_infinite or (base.is_interval and base.top > _EXHAUSTIVE_LIMIT):
        if sample is None:
            raise IndexAlgebraError(
                "base too large for exhaustive checking; give a sample budget")
        rng = random.Random(seed)
        hi = 10 ** 6 if base.is_infinite else base.top
        triples = [tuple(Fraction(rng.randint(0, hi)) for _ in range(3))
                   for _ in range(sample)]
        singles = sorted({t[0] for t in triples})
    else:
        members = base.members()
        if sample is not None:
            rng = random.Random(seed)
            triples = [tuple(rng.choice(members) for _ in range(3))
                       for _ in range(sample)]
        else:
            triples = [(i, j, k) for i in members for j in members
                       for k in members]
        singles = members

    violations: list[LawIssue] = []
    partial: list[LawIssue] = []

    def compare(law, idx, lhs, rhs):
        if lhs is None and rhs is None:
            return
        if lhs is None or rhs is None:
            partial.append(LawIssue(law, idx, lhs, rhs))
        elif lhs != rhs:
            violations.append(LawIssue(law, idx, lhs, rhs))

    eps, delta = ds.eps_map, ds.delta_map
    for (i, j, k) in triples:
        d = delta(j, k)
        lhs = eps(i, d) if d is not None else None
        a, b = eps(i, j), eps(i, k)
        rhs = delta(a, b) if a is not None and b is not None else None
        compare("left-distributive", (i, j, k), lhs, rhs)

        d = delta(i, j)
        lhs = eps(d, k) if d is not None else None
        a, b = eps(i, k), eps(j, k)
        rhs = delta(a, b) if a is not None and b is not None else None
        compare("right-distributive", (i, j, k), lhs, rhs)

    for i in singles:
        v = delta(i, i)
        if v != i:
            violations.append(LawIssue("delta-idempotent", (i,), v, i))

    # document the partial domains themselves
    pairs = sorted({(t[0], t[1]) for t in triples} |
                   {(t[1], t[2]) for t in triples})
    und_eps = tuple(p for p in pairs if eps(*p) is None)
    und_delta = tuple(p for p in pairs if delta(*p) is None)

    return LawReport(ds.name, len(triples), tuple(violations), tuple(partial),
                     und_eps, und_delta)


def eps_power(ds: DistributiveStructure, r: int, l, m) -> Fraction:
    """Right-nested iterate eps(l, eps(l, ... eps(l, m))) with r
    occurrences of l.  Errors name the first undefined pair."""
    if not isinstance(r, int) or r < 1:
        raise IndexAlgebraError(f"power must be a positive integer, got {r!r}")
    lv = ds._check_member(l)
    out = ds._check_member(m)
    for _ in range(r):
        nxt = ds.eps_map(lv, out)
        if nxt is None:
            raise UndefinedIndexError(f"eps undefined for pair ({lv}, {out})")
        out = nxt
    return out


# ---------------------------------------------------------------------------
# windows and additive degree sets

def beta_window(k, beta0_j: int) -> IndexSet:
    """Indices still available at offset beta0_j inside degree k: the
    integer interval [0, k - beta0_j], or [0, infinity) when k is."""
    if not isinstance(beta0_j, int) or beta0_j < 2:
        raise IndexAlgebraError(f"offset must be an integer >= 2, got {beta0_j!r}")
    if k == math.inf:
        return IndexSet.interval(INFINITY)
    if not isinstance(k, int) or beta0_j > k:
        raise IndexAlgebraError(f"offset {beta0_j} must be at most k={k}")
    return IndexSet.interval(k - beta0_j)


@dataclass(frozen=True)
class AdditiveDegreeSet:
    """Pair of index sets of degree k and 2k with a sum map between
    them that extends integer addition."""

    k: int | float
    gamma_k: IndexSet
    gamma_2k: IndexSet
    plus: Callable = field(repr=False)

    def __post_init__(self):
        if self.k != math.inf:
            if not isinstance(self.k, int) or self.k < 0:
                raise IndexAlgebraError(f"degree must be a nonnegative integer "
                                        f"or infinity, got {self.k!r}")
            if not self.gamma_k.has_degree(self.k):
                raise IndexAlgebraError(f"first set lacks degree {self.k}")
            if not self.gamma_2k.has_degree(2 * self.k):
                raise IndexAlgebraError(f"second set lacks degree {2 * self.k}")
            probe = min(self.k, 8)
            for a in range(probe + 1):
                for b in range(probe + 1):
                    if a + b <= 2 * self.k and \
                            self.plus(Fraction(a), Fraction(b)) != a + b:
                        raise IndexAlgebraError(
                            "sum map does not extend integer addition")


def integer_additive_set(k) -> AdditiveDegreeSet:
    """The standard instance: [0, k] and [0, 2k] with ordinary sum."""
    if k == math.inf:
        g = IndexSet.interval(INFINITY)
        return AdditiveDegreeSet(INFINITY, g, g, lambda a, b: a + b)
    if not isinstance(k, int) or k < 0:
        raise IndexAlgebraError(f"degree must be a nonnegative integer, got {k!r}")
    return AdditiveDegreeSet(k, IndexSet.interval(k),
                             IndexSet.interval(2 * k), lambda a, b: a + b)


def gamma_z(ads: AdditiveDegreeSet, beta0_j: int, z) -> IndexSet:
    """Indices l whose shift by z still lands in the window: the set of
    l in the degree-k set with plus(z, l) inside beta_window(k, beta0_j).

    For the standard integer instance this is [0, k - beta0_j - z]; it
    shrinks as z grows.
    """
    window = beta_window(ads.k, beta0_j)
    zv = _as_index(z)
    if not window.contains(zv):
        raise IndexAlgebraError(f"shift {zv} is outside the window "
                                f"[0, {window.top if window.is_interval else '?'}]")
    if ads.gamma_k.is_interval:
        if ads.gamma_k.is_infinite:
            return IndexSet.interval(INFINITY)
        return IndexSet.interval(int(ads.k - beta0_j - zv))
    keep = [l for l in ads.gamma_k.members() if window.contains(ads.plus(zv, l))]
    return IndexSet.of(keep)


# ---------------------------------------------------------------------------
# ordinary pairs

@dataclass(frozen=True)
class OrdinaryReport:
    ordinary: bool
    induced_theta: dict | None
    induced_vartheta: dict | None
    reason: str | None = None


def _as_table(m: Mapping) -> dict:
    return {_as_index(k): _as_index(v) for k, v in m.items()}


def is_ordinary(pairs: Sequence[tuple[Mapping, Mapping]],
                O: Sequence[Mapping], Q: Sequence[Mapping],
                X: IndexSet, z=None) -> OrdinaryReport:
    """Check a sequence of map pairs indexed by X for ordinariness.

    Each pair (theta_l, vartheta_l) must belong to O x Q, and the
    induced pair theta*(l) = theta_l(z), vartheta*(l) = vartheta_l(z)
    must again belong to O x Q; the induced tables are returned when the
    check passes.  With z omitted the evaluation point is l itself,
    which makes a constant sequence induce its own pair.  Membership of
    the induced pair is tested on the common index domain X.
    """
    ls = X.members()
    if len(pairs) != len(ls):
        raise IndexAlgebraError(
            f"{len(pairs)} pairs given for {len(ls)} indices")
    Ot = [_as_table(m) for m in O]
    Qt = [_as_table(m) for m in Q]
    thetas, varthetas = [], []
    for theta, vartheta in pairs:
        thetas.append(_as_table(theta))
        varthetas.append(_as_table(vartheta))
    dom_t = set(thetas[0]) if thetas else set()
    dom_v = set(varthetas[0]) if varthetas else set()
    for t in thetas:
        if set(t) != dom_t:
            raise IndexAlgebraError("first-component maps have mismatched domains")
    for v in varthetas:
        if set(v) != dom_v:
            raise IndexAlgebraError("second-component maps have mismatched domains")

    for l, t, v in zip(ls, thetas, varthetas):
        if t not in Ot:
            return OrdinaryReport(False, None, None,
                                  f"first map at index {l} is not in O")
        if v not in Qt:
            return OrdinaryReport(False, None, None,
                                  f"second map at index {l} is not in Q")

    induced_t, induced_v = {}, {}
    for l, t, v in zip(ls, thetas, varthetas):
        at = _as_index(z) if z is not None else l
        if at not in t or at not in v:
            raise IndexAlgebraError(
                f"maps at index {l} are not defined at evaluation point {at}")
        induced_t[l] = t[at]
        induced_v[l] = v[at]

    def matches(table, pool):
        return any(all(l in m and m[l] == val for l, val in table.items())
                   for m in pool)

    if not matches(induced_t, Ot):
        return OrdinaryReport(False, None, None,
                              "induced first map is not in O")
    if not matches(induced_v, Qt):
        return OrdinaryReport(False, None, None,
                              "induced second map is not in Q")
    return OrdinaryReport(True, induced_t, induced_v)
