"""Connective structures between regularity claims.

A connective structure couples two finite families of index maps (O for
primary-space indices, Q for complementary smoothness offsets) with
claim transformers: D-tables that translate between spaces named by two
maps of the same family, and xi transformers that move a function from
one (theta, vartheta) labelling to another.  The canonical instance
transforms nothing but the labels; the checks here are meaningful for
any user-supplied transformer.

Verification entry points: composition laws on the declared tables,
niceness (support preserving, bump preserving, unital), degree against
an atlas, partition preservation, and the globalization step that turns
one membership claim into a per-index family of claims over a shrinking
window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from . import expr as ex
from .atlas import Atlas, PartitionOfUnity, PiecewiseFn, partition_residual
from .index_algebra import (AdditiveDegreeSet, IndexAlgebraError, IndexSet,
                            OrdinaryReport, gamma_z, integer_additive_set,
                            is_ordinary)
from .spaces import (Box, Budget, ClaimTemplate, Domain, MEMBER,
                     MembershipClaim, check_membership, is_bumplike)

__all__ = [
    "ConnectiveError", "Transformer", "IDENTITY", "ConnectiveStructure",
    "identity_connective", "constant_map", "shifting_map",
    "check_composition_laws", "CompositionReport",
    "check_xi_distributive",
    "check_nice", "NicenessReport",
    "check_degree", "DegreeReport",
    "check_partition_preservation", "PreservationReport",
    "globalize_regularity", "GlobalizedReport",
]


class ConnectiveError(ValueError):
    """Invalid structure or failed precondition."""


@dataclass(frozen=True)
class Transformer:
    """Named claim transformer acting on expression data."""

    name: str
    fn: Callable[[ex.Expr], ex.Expr] = field(repr=False)

    def __call__(self, e):
        # piecewise data transforms piece by piece
        if hasattr(e, "map_exprs"):
            return e.map_exprs(self.fn)
        return self.fn(e)


IDENTITY = Transformer("identity", lambda e: e)


def _as_table(m: Mapping) -> dict:
    out = {}
    for k, v in m.items():
        out[Fraction(k)] = Fraction(v)
    return out


def constant_map(k: int, value) -> dict:
    """The constant index map on [0, k]."""
    return {Fraction(i): Fraction(value) for i in range(k + 1)}


def shifting_map(beta0_j) -> dict:
    """i -> beta0_j - i on [0, beta0_j]."""
    b = int(beta0_j)
    return {Fraction(i): Fraction(b - i) for i in range(b + 1)}


@dataclass(frozen=True)
class ConnectiveStructure:
    O: Mapping[str, Mapping]            # named maps, indices to indices
    Q: Mapping[str, Mapping]            # named maps, indices to offsets
    j: Fraction
    k: int
    xi_default: Transformer = IDENTITY
    d_o: Mapping[tuple, Transformer] = field(default_factory=dict)
    d_q: Mapping[tuple, Transformer] = field(default_factory=dict)
    xi: Mapping[tuple, Transformer] = field(default_factory=dict)
    ambient: str = "standard"
    compatible: tuple[str, ...] = ("standard",)

    def transformer(self, src_pair=None, dst_pair=None) -> Transformer:
        if src_pair is not None and dst_pair is not None:
            got = self.xi.get((tuple(src_pair), tuple(dst_pair)))
            if got is not None:
                return got
        return self.xi_default

    def d_o_transformer(self, src: str, dst: str) -> Transformer:
        return self.d_o.get((src, dst), self.xi_default)

    def d_q_transformer(self, src: str, dst: str) -> Transformer:
        return self.d_q.get((src, dst), self.xi_default)

    @property
    def alpha0_j(self) -> Fraction:
        return _as_table(self.O["alpha0"])[self.j]

    @property
    def beta0_j(self) -> Fraction:
        return _as_table(self.Q["beta0"])[self.j]


def identity_connective(O: Mapping[str, Mapping], Q: Mapping[str, Mapping],
                        j) -> ConnectiveStructure:
    """Canonical structure: every transformer is the identity on data.

    O must contain maps named "alpha" and "alpha0" plus the constant
    map with value alpha0(j) under some name; Q must contain "beta" and
    "beta0" plus the shifting map i -> beta0(j) - i.  All map domains
    must include the integers of [0, k], with k read off alpha0.
    """
    Ot = {name: _as_table(t) for name, t in O.items()}
    Qt = {name: _as_table(t) for name, t in Q.items()}
    for name in ("alpha", "alpha0"):
        if name not in Ot:
            raise ConnectiveError(f"O is missing the map named {name!r}")
    for name in ("beta", "beta0"):
        if name not in Qt:
            raise ConnectiveError(f"Q is missing the map named {name!r}")
    jv = Fraction(j)
    dom = set(Ot["alpha0"])
    ints = {d for d in dom if d.denominator == 1}
    if not ints:
        raise ConnectiveError("alpha0 has no integer domain points")
    k = int(max(ints))
    for i in range(k + 1):
        if Fraction(i) not in dom:
            raise ConnectiveError(f"alpha0 domain is missing {i}")
    if jv not in dom:
        raise ConnectiveError(f"j = {jv} is outside the alpha0 domain")
    if jv not in Qt["beta0"]:
        raise ConnectiveError(f"j = {jv} is outside the beta0 domain")
    b0j = Qt["beta0"][jv]
    if b0j.denominator != 1 or not 2 <= b0j <= k:
        raise ConnectiveError(f"beta0(j) = {b0j} must be an integer in [2, {k}]")

    a0j = Ot["alpha0"][jv]
    const = {Fraction(i): a0j for i in range(k + 1)}
    if not any(t == const for t in Ot.values()):
        raise ConnectiveError(
            f"O is missing the constant map with value alpha0(j) = {a0j}")
    shift = shifting_map(b0j)
    if not any(t == shift for t in Qt.values()):
        raise ConnectiveError(
            f"Q is missing the shifting map i -> {b0j} - i")

    return ConnectiveStructure(Ot, Qt, jv, k)


# ---------------------------------------------------------------------------
# composition laws

@dataclass(frozen=True)
class CompositionReport:
    checked: int
    failures: tuple  # (family, triple, worst diff, point)

    @property
    def passed(self) -> bool:
        return not self.failures


def check_composition_laws(cs: ConnectiveStructure, tests: Sequence[ex.Expr],
                           domain: Domain, grid: int = 16,
                           tol: float = 1e-10) -> CompositionReport:
    """D(a, c) must agree with D(b, c) after D(a, b), for every declared
    triple in each family; likewise for xi over pairs of (O, Q) labels.
    Agreement is pointwise on sample grids for every test expression."""
    pts = np.concatenate([b.midpoints(grid)[0] for b in domain.boxes])
    failures = []
    checked = 0

    def run(family: str, names, lookup):
        nonlocal checked
        for a in names:
            for b in names:
                for c in names:
                    direct = lookup(a, c)
                    first = lookup(a, b)
                    second = lookup(b, c)
                    checked += 1
                    for t in tests:
                        lhs = ex.evaluate_grid(direct(t), pts)
                        rhs = ex.evaluate_grid(second(first(t)), pts)
                        d = np.abs(lhs - rhs)
                        i = int(np.argmax(d))
                        if d[i] > tol:
                            failures.append((family, (a, b, c), float(d[i]),
                                             tuple(pts[i])))
                            break

    run("D_O", sorted(cs.O), cs.d_o_transformer)
    run("D_Q", sorted(cs.Q), cs.d_q_transformer)
    pairs = [(o, q) for o in sorted(cs.O) for q in sorted(cs.Q)]
    run("xi", pairs, lambda a, b: cs.transformer(a, b))
    return CompositionReport(checked, tuple(failures))


def check_xi_distributive(cs: ConnectiveStructure, tests: Sequence[ex.Expr],
                          domain: Domain, grid: int = 16,
                          tol: float = 1e-10) -> bool:
    """xi(f + g) = xi f + xi g and xi(f g) = (xi f)(xi g) on samples."""
    pts = np.concatenate([b.midpoints(grid)[0] for b in domain.boxes])
    t = cs.xi_default
    for i, f in enumerate(tests):
        for g in tests[i:]:
            s1 = ex.evaluate_grid(t(ex.add(f, g)), pts)
            s2 = ex.evaluate_grid(t(f), pts) + ex.evaluate_grid(t(g), pts)
            if np.max(np.abs(s1 - s2)) > tol:
                return False
            p1 = ex.evaluate_grid(t(ex.mul(f, g)), pts)
            p2 = ex.evaluate_grid(t(f), pts) * ex.evaluate_grid(t(g), pts)
            if np.max(np.abs(p1 - p2)) > tol:
                return False
    return True


# ---------------------------------------------------------------------------
# niceness

@dataclass(frozen=True)
class NicenessReport:
    support_preserving: bool
    bump_preserving: bool
    unital: bool
    witnesses: tuple  # (property, test index, point or label, value)

    @property
    def nice(self) -> bool:
        return self.support_preserving and self.bump_preserving and self.unital


def check_nice(cs: ConnectiveStructure, tests: Sequence[ex.Expr],
               bumps: Sequence[ex.Expr], domain: Domain, grid: int = 48,
               budget: Budget = Budget(grid=16)) -> NicenessReport:
    """Support preservation, bump preservation, and unitality of the
    structure's transformer, sampled on the given domain.

    Support: wherever a test or bump evaluates to exactly zero, the
    transformed function must vanish too.  Bump: transformed bumps must
    still vanish outside the domain and be C^k members on it.  Unital:
    the constant 1 must map to 1 everywhere, and transformed tests must
    equal 1 wherever the test does.
    """
    t = cs.xi_default
    pts = np.concatenate([b.midpoints(grid)[0] for b in domain.boxes])
    witnesses = []

    # support must be judged where inputs genuinely vanish, which for
    # bumps means outside the domain too; stretch each box by a quarter
    wide = []
    for b in domain.boxes:
        pad = tuple((hi - lo) * 0.25 for lo, hi in zip(b.lo, b.hi))
        wide.append(Box(tuple(l - p for l, p in zip(b.lo, pad)),
                        tuple(h + p for h, p in zip(b.hi, pad))))
    spts = np.concatenate([pts] + [b.grid(grid // 2 + 2) for b in wide])

    support_ok = True
    for idx, f in enumerate(list(tests) + list(bumps)):
        fv = ex.evaluate_grid(f, spts)
        gv = ex.evaluate_grid(t(f), spts)
        mask = fv == 0.0
        if mask.any():
            bad = mask & (np.abs(gv) > 1e-12)
            if bad.any():
                i = int(np.argmax(bad))
                witnesses.append(("support", idx, tuple(spts[i]), float(gv[i])))
                support_ok = False

    bump_ok = True
    alpha = {i: cs.k for i in range(cs.k + 1)}
    beta = {i: 0 for i in range(cs.k + 1)}
    template = ClaimTemplate(domain, "Ck", alpha, beta, cs.k, (0,))
    for idx, g in enumerate(bumps):
        tg = t(g)
        if not is_bumplike(tg, domain):
            witnesses.append(("bump", idx, "escapes the domain", math.nan))
            bump_ok = False
            continue
        claim = check_membership(tg, template, budget)
        if claim.verdict != MEMBER:
            witnesses.append(("bump", idx, f"verdict {claim.verdict}", math.nan))
            bump_ok = False

    unital_ok = True
    ones = ex.evaluate_grid(t(ex.ONE), pts)
    if np.max(np.abs(ones - 1.0)) > 1e-12:
        i = int(np.argmax(np.abs(ones - 1.0)))
        witnesses.append(("unital", -1, tuple(pts[i]), float(ones[i])))
        unital_ok = False
    for idx, f in enumerate(tests):
        fv = ex.evaluate_grid(f, pts)
        mask = np.abs(fv - 1.0) <= 1e-12
        if mask.any():
            gv = ex.evaluate_grid(t(f), pts)
            bad = mask & (np.abs(gv - 1.0) > 1e-10)
            if bad.any():
                i = int(np.argmax(bad))
                witnesses.append(("unital", idx, tuple(pts[i]), float(gv[i])))
                unital_ok = False

    return NicenessReport(support_ok, bump_ok, unital_ok, tuple(witnesses))


# ---------------------------------------------------------------------------
# degree

@dataclass(frozen=True)
class DegreeReport:
    r: int
    checked: int
    failures: tuple  # (src, dst, piece, component, multi-index, diff, point)

    @property
    def holds(self) -> bool:
        return not self.failures


def check_degree(cs: ConnectiveStructure, a: Atlas, r: int,
                 grid: int = 16, tol: float = 1e-10) -> DegreeReport:
    """Does the transformer send order-l transition derivatives to
    order-l transition derivatives, for every l up to r allowed by some
    offset map in Q?

    The transformed derivative must match the derivative of the same or
    of another declared transition branch on the same box.
    """
    if r > a.order:
        raise ConnectiveError(f"degree order {r} exceeds the atlas class "
                              f"{a.order}")
    levels = set()
    for table in cs.Q.values():
        for l in range(r + 1):
            v = table.get(Fraction(l))
            if v is not None and l <= v:
                levels.add(l)
    levels.add(0)
    t = cs.xi_default
    failures = []
    checked = 0
    from .spaces import multi_indices
    for tr in a.transitions:
        for pi, piece in enumerate(tr.pieces):
            pts, _ = piece.box.midpoints(grid)
            for ci, comp in enumerate(piece.exprs):
                for l in sorted(levels):
                    for mu in multi_indices(a.dimension, l):
                        orders = {i + 1: o for i, o in enumerate(mu) if o}
                        d = ex.differentiate(comp, orders)
                        got = ex.evaluate_grid(t(d), pts)
                        checked += 1
                        want = ex.evaluate_grid(d, pts)
                        diff = np.abs(got - want)
                        i = int(np.argmax(diff))
                        if diff[i] <= tol:
                            continue
                        # allow matching a different declared branch
                        matched = False
                        for tr2 in a.transitions:
                            for piece2 in tr2.pieces:
                                if piece2.box != piece.box:
                                    continue
                                for comp2 in piece2.exprs:
                                    d2 = ex.differentiate(comp2, orders)
                                    w2 = ex.evaluate_grid(d2, pts)
                                    if np.max(np.abs(got - w2)) <= tol:
                                        matched = True
                                        break
                                if matched:
                                    break
                            if matched:
                                break
                        if not matched:
                            failures.append((tr.src, tr.dst, pi, ci, mu,
                                             float(diff[i]), tuple(pts[i])))
    return DegreeReport(r, checked, tuple(failures))


# ---------------------------------------------------------------------------
# partition preservation

@dataclass(frozen=True)
class PreservationReport:
    residual: float
    worst: tuple | None
    support_ok: bool
    passed: bool
    note: str = ""


def check_partition_preservation(cs: ConnectiveStructure,
                                 pou: PartitionOfUnity,
                                 pairs: Sequence[tuple] = (),
                                 grid: int = 32,
                                 tol: float = 1e-12) -> PreservationReport:
    """Transform every chart weight and re-verify the partition.

    The transformed weights must still sum to one over sampled manifold
    points and must still vanish outside their declared supports.
    """
    transformers = [cs.transformer(src, dst) for src, dst in pairs] \
        if pairs else [cs.xi_default]
    worst_res, worst_at, support_ok = 0.0, None, True
    for t in transformers:
        new_psis = {name: psi.map_exprs(t.fn)
                    for name, psi in pou.psis.items()}
        moved = PartitionOfUnity(pou.atlas, new_psis, pou.bumps, pou.margin)
        res, at = partition_residual(moved, grid)
        if res > worst_res:
            worst_res, worst_at = res, at
        # the numerators vanish outside the shrunk boxes; transformed
        # weights must too (sample where the original is exactly zero)
        for name, psi in pou.psis.items():
            newpsi = new_psis[name]
            for box, _ in psi.pieces:
                pts, _w = box.midpoints(8)
                orig = psi.evaluate_grid(pts)
                mask = orig == 0.0
                if mask.any():
                    vals = newpsi.evaluate_grid(pts[mask])
                    if np.max(np.abs(vals)) > tol:
                        support_ok = False
    passed = worst_res <= tol and support_ok
    note = "" if passed else f"sum residual {worst_res:.3e}"
    return PreservationReport(worst_res, worst_at, support_ok, passed, note)


# ---------------------------------------------------------------------------
# globalization

@dataclass(frozen=True)
class GlobalizedReport:
    window: IndexSet
    per_level: dict            # l -> verdict
    claims: tuple              # MembershipClaim per l
    ordinary: OrdinaryReport

    @property
    def all_member(self) -> bool:
        return all(v == MEMBER for v in self.per_level.values())


def globalize_regularity(claim: MembershipClaim, cs: ConnectiveStructure,
                         z, theta: Mapping, vartheta: Mapping,
                         budget: Budget = Budget(grid=16),
                         ads: AdditiveDegreeSet | None = None) -> GlobalizedReport:
    """Spread one verified claim over the shrinking index window.

    Given f verified in the base spaces at offset z, emit and re-verify
    the derived claims: for each l in the window the order-l derivative
    block of (transformed) f lies in the primary space at theta(l) and
    in C^(k - vartheta(l)).  The pair (theta, vartheta) must be ordinary
    for the structure's map families over the window.
    """
    if claim.verdict != MEMBER:
        raise ConnectiveError(
            f"base claim is not a verified member (verdict {claim.verdict})")
    k = cs.k
    if ads is None:
        ads = integer_additive_set(k)
    window = gamma_z(ads, int(cs.beta0_j), z)
    ls = window.members()

    tt = _as_table(theta)
    vt = _as_table(vartheta)
    pairs = [(tt, vt)] * len(ls)
    ordinary = is_ordinary(pairs, list(cs.O.values()), list(cs.Q.values()),
                           window)
    if not ordinary.ordinary:
        raise ConnectiveError(f"pair is not ordinary: {ordinary.reason}")

    t = cs.xi_default
    moved = tuple(t(c) for c in claim.functions)
    per_level = {}
    claims = []
    kind = claim.template.kind
    for l in ls:
        li = int(l)
        template = ClaimTemplate(claim.domain, kind,
                                 {li: tt[l]}, {li: int(vt[l])}, k, (li,))
        sub = check_membership(moved, template, budget)
        per_level[li] = sub.verdict
        claims.append(sub)
    return GlobalizedReport(window, per_level, tuple(claims), ordinary)
