"""Chart-described manifolds: atlases, transitions, partitions of unity.

A manifold is presented as named charts (open boxes or unions of boxes
in R^n) plus user-declared transitions between ordered chart pairs.
Transitions are piecewise expression vectors: each piece is a box in
source-chart coordinates with one expression per target coordinate.
Piecewise data is unavoidable even for the circle, whose two-chart
transition shifts by +pi on one interval and -pi on the other.

The partition builder produces, per chart, an exact symbolic quotient
bump/(sum of bumps), stored as a PiecewiseFn because neighbour bumps
pull back through piecewise transitions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import expr as ex
from .spaces import (Box, Budget, ClaimTemplate, Domain, MEMBER,
                     MembershipClaim, check_membership)

__all__ = [
    "AtlasError", "Chart", "TransitionPiece", "Transition", "Atlas",
    "PiecewiseFn", "PartitionOfUnity",
    "verify_atlas", "PairCheck", "TripleCheck", "CocycleReport",
    "check_regular_structure", "StructureReport",
    "build_partition", "partition_residual",
]

_EDGE_TOL = 1e-12


class AtlasError(ValueError):
    """Inconsistent atlas data or failed construction."""


@dataclass(frozen=True)
class Chart:
    name: str
    image: Domain

    def __post_init__(self):
        if not self.name:
            raise AtlasError("chart needs a name")


@dataclass(frozen=True)
class TransitionPiece:
    """One branch of a transition: expressions valid on one box of the
    source chart."""

    box: Box
    exprs: tuple[ex.Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "exprs", tuple(self.exprs))
        if len(self.exprs) != self.box.dimension:
            raise AtlasError("transition needs one expression per coordinate")
        for e in self.exprs:
            if not isinstance(e, ex.Expr):
                raise AtlasError("transition components must be expressions")
            bad = [v for v in ex.free_variables(e) if v > self.box.dimension]
            if bad:
                raise AtlasError(f"transition uses x{bad[0]} beyond dimension "
                                 f"{self.box.dimension}")


def _contains_closed(box: Box, p, tol: float = _EDGE_TOL) -> bool:
    return all(a - tol <= x <= b + tol
               for a, x, b in zip(box.lo, p, box.hi))


@dataclass(frozen=True)
class Transition:
    """Coordinate change from chart src to chart dst, given piecewise on
    the declared overlap (the union of the piece boxes, in src
    coordinates)."""

    src: str
    dst: str
    pieces: tuple[TransitionPiece, ...]

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if not self.pieces:
            raise AtlasError(f"transition {self.src}->{self.dst} has no pieces")
        n = self.pieces[0].box.dimension
        if any(p.box.dimension != n for p in self.pieces):
            raise AtlasError("transition pieces differ in dimension")

    @property
    def dimension(self) -> int:
        return self.pieces[0].box.dimension

    def domain(self) -> Domain:
        return Domain(tuple(p.box for p in self.pieces))

    def piece_at(self, point) -> TransitionPiece | None:
        for p in self.pieces:
            if _contains_closed(p.box, point):
                return p
        return None

    def apply(self, point) -> tuple[float, ...]:
        p = self.piece_at(point)
        if p is None:
            raise AtlasError(f"point {tuple(point)} is outside the declared "
                             f"overlap {self.src}->{self.dst}")
        return tuple(ex.evaluate(e, point) for e in p.exprs)

    def apply_grid(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.full_like(pts, np.nan)
        assigned = np.zeros(pts.shape[0], dtype=bool)
        for p in self.pieces:
            lo = np.array(p.box.lo) - _EDGE_TOL
            hi = np.array(p.box.hi) + _EDGE_TOL
            mask = (~assigned) & np.all((pts >= lo) & (pts <= hi), axis=1)
            if mask.any():
                sub = pts[mask]
                cols = [ex.evaluate_grid(e, sub) for e in p.exprs]
                out[mask] = np.stack(cols, axis=-1)
                assigned |= mask
        if not assigned.all():
            i = int(np.argmax(~assigned))
            raise AtlasError(f"point {tuple(pts[i])} is outside the declared "
                             f"overlap {self.src}->{self.dst}")
        return out


@dataclass(frozen=True)
class Atlas:
    """Charts plus declared overlaps and transitions; k is the regularity
    order of the description (math.inf allowed, verified at k_check)."""

    charts: tuple[Chart, ...]
    transitions: tuple[Transition, ...]
    k: int | float
    k_check: int = 6

    def __post_init__(self):
        object.__setattr__(self, "charts", tuple(self.charts))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        if not self.charts:
            raise AtlasError("atlas needs at least one chart")
        names = [c.name for c in self.charts]
        if len(set(names)) != len(names):
            raise AtlasError("chart names must be distinct")
        n = self.charts[0].image.dimension
        if any(c.image.dimension != n for c in self.charts):
            raise AtlasError("charts must share one dimension")
        if self.k != math.inf and (not isinstance(self.k, int) or self.k < 1):
            raise AtlasError("regularity order k must be a positive integer "
                             "or infinity")
        by_name = {c.name: c for c in self.charts}
        tmap = {}
        for t in self.transitions:
            if t.src not in by_name or t.dst not in by_name:
                raise AtlasError(f"transition {t.src}->{t.dst} names an "
                                 f"unknown chart")
            if t.src == t.dst:
                raise AtlasError("transitions must join distinct charts")
            if t.dimension != n:
                raise AtlasError(f"transition {t.src}->{t.dst} has wrong "
                                 f"dimension")
            if (t.src, t.dst) in tmap:
                raise AtlasError(f"duplicate transition {t.src}->{t.dst}")
            tmap[(t.src, t.dst)] = t
        object.__setattr__(self, "_by_name", by_name)
        object.__setattr__(self, "_tmap", tmap)

    @property
    def dimension(self) -> int:
        return self.charts[0].image.dimension

    @property
    def order(self) -> int:
        """Order at which smooth claims are actually verified."""
        return self.k_check if self.k == math.inf else self.k

    def chart(self, name: str) -> Chart:
        try:
            return self._by_name[name]
        except KeyError:
            raise AtlasError(f"no chart named {name!r}") from None

    def transition(self, src: str, dst: str) -> Transition | None:
        return self._tmap.get((src, dst))

    def transitions_from(self, src: str) -> tuple[Transition, ...]:
        return tuple(t for (s, d), t in self._tmap.items() if s == src)

    def neighbors(self, src: str) -> tuple[str, ...]:
        return tuple(t.dst for t in self.transitions_from(src))


# ---------------------------------------------------------------------------
# piecewise functions

@dataclass(frozen=True)
class PiecewiseFn:
    """Function given by expressions on disjoint boxes, a fixed value
    (normally zero) elsewhere.  Points on shared box faces take the
    first matching piece; the construction sites in this package only
    produce piecewise data that is continuous across faces."""

    pieces: tuple[tuple[Box, ex.Expr], ...]
    outside: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))

    @classmethod
    def constant(cls, value, box: Box) -> "PiecewiseFn":
        return cls(((box, ex.as_expr(value)),))

    @property
    def dimension(self) -> int:
        if not self.pieces:
            raise AtlasError("empty piecewise function has no dimension")
        return self.pieces[0][0].dimension

    def evaluate(self, point) -> float:
        for box, e in self.pieces:
            if _contains_closed(box, point):
                return ex.evaluate(e, point)
        return self.outside

    def evaluate_grid(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.full(pts.shape[0], self.outside, dtype=float)
        assigned = np.zeros(pts.shape[0], dtype=bool)
        for box, e in self.pieces:
            lo = np.array(box.lo) - _EDGE_TOL
            hi = np.array(box.hi) + _EDGE_TOL
            mask = (~assigned) & np.all((pts >= lo) & (pts <= hi), axis=1)
            if mask.any():
                out[mask] = ex.evaluate_grid(e, pts[mask])
                assigned |= mask
        return out

    def map_exprs(self, fn: Callable[[ex.Expr], ex.Expr]) -> "PiecewiseFn":
        return PiecewiseFn(tuple((b, fn(e)) for b, e in self.pieces),
                           self.outside)

    def derive(self, var: int) -> "PiecewiseFn":
        if self.outside != 0.0:
            raise AtlasError("derivative of a piecewise function with a "
                             "nonzero outside value is not supported")
        return self.map_exprs(lambda e: ex.derive(e, var))

    def differentiate(self, orders: Mapping[int, int]) -> "PiecewiseFn":
        if self.outside != 0.0 and any(orders.values()):
            raise AtlasError("derivative of a piecewise function with a "
                             "nonzero outside value is not supported")
        return self.map_exprs(lambda e: ex.differentiate(e, orders))

    def _piece_for_cell(self, cell: Box) -> ex.Expr:
        mid = tuple((a + b) / 2 for a, b in zip(cell.lo, cell.hi))
        for box, e in self.pieces:
            if _contains_closed(box, mid):
                return e
        return ex.as_expr(self.outside)

    def combine(self, other: "PiecewiseFn",
                op: Callable[[ex.Expr, ex.Expr], ex.Expr]) -> "PiecewiseFn":
        """Pointwise combination on the common cell refinement."""
        if not self.pieces and not other.pieces:
            # both identically the outside value; zero stays zero
            return PiecewiseFn((), float(ex.evaluate(
                op(ex.as_expr(self.outside), ex.as_expr(other.outside)), ())))
        n = self.dimension if self.pieces else other.dimension
        breaks = []
        for axis in range(n):
            pts = set()
            for box, _ in itertools.chain(self.pieces, other.pieces):
                pts.add(box.lo[axis])
                pts.add(box.hi[axis])
            breaks.append(sorted(pts))
        cells = []
        for corner in itertools.product(*[range(len(b) - 1) for b in breaks]):
            lo = tuple(breaks[a][i] for a, i in enumerate(corner))
            hi = tuple(breaks[a][i + 1] for a, i in enumerate(corner))
            if all(h - l > _EDGE_TOL for l, h in zip(lo, hi)):
                cells.append(Box(lo, hi))
        out = []
        for cell in cells:
            e = op(self._piece_for_cell(cell), other._piece_for_cell(cell))
            if e != ex.ZERO:
                out.append((cell, e))
        return PiecewiseFn(tuple(out))

    def __add__(self, other):
        if isinstance(other, PiecewiseFn):
            return self.combine(other, ex.add)
        return self.map_exprs(lambda e: ex.add(e, ex.as_expr(other)))

    def __mul__(self, other):
        if isinstance(other, PiecewiseFn):
            return self.combine(other, ex.mul)
        return self.map_exprs(lambda e: ex.mul(e, ex.as_expr(other)))

    def __sub__(self, other):
        if isinstance(other, PiecewiseFn):
            return self.combine(other, ex.sub)
        return self.map_exprs(lambda e: ex.sub(e, ex.as_expr(other)))

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# atlas verification

@dataclass(frozen=True)
class PairCheck:
    src: str
    dst: str
    residual: float
    worst: tuple | None
    note: str = ""

    @property
    def invertible(self) -> bool:
        return self.residual <= 1e-4


@dataclass(frozen=True)
class TripleCheck:
    route: tuple[str, str, str]
    residual: float
    worst: tuple | None
    samples: int
    note: str = ""


@dataclass(frozen=True)
class CocycleReport:
    pairs: tuple[PairCheck, ...]
    triples: tuple[TripleCheck, ...]
    tol: float = 1e-8

    @property
    def passed(self) -> bool:
        return (all(p.residual <= self.tol for p in self.pairs) and
                all(t.residual <= self.tol for t in self.triples))

    @property
    def max_residual(self) -> float:
        vals = [p.residual for p in self.pairs] + \
               [t.residual for t in self.triples]
        return max(vals) if vals else 0.0


def _box_intersection(a: Box, b: Box) -> Box | None:
    lo = tuple(max(x, y) for x, y in zip(a.lo, b.lo))
    hi = tuple(min(x, y) for x, y in zip(a.hi, b.hi))
    if any(h - l <= _EDGE_TOL for l, h in zip(lo, hi)):
        return None
    return Box(lo, hi)


def verify_atlas(a: Atlas, grid: int = 12) -> CocycleReport:
    """Numeric consistency of the declared transitions.

    Per ordered pair with a declared reverse, samples the overlap and
    measures the round-trip residual |phi_back(phi(x)) - x|.  Per
    composable triple, measures the two-step against the direct
    transition.  A single chart with no overlaps passes vacuously.
    """
    pairs = []
    for t in a.transitions:
        rev = a.transition(t.dst, t.src)
        if rev is None:
            pairs.append(PairCheck(t.src, t.dst, math.inf, None,
                                   "reverse transition not declared"))
            continue
        worst, res, note = None, 0.0, ""
        for piece in t.pieces:
            pts, _ = piece.box.midpoints(grid)
            ys = np.stack([ex.evaluate_grid(e, pts) for e in piece.exprs],
                          axis=-1)
            back = np.full_like(pts, np.nan)
            covered = np.zeros(len(pts), dtype=bool)
            for rp in rev.pieces:
                lo = np.array(rp.box.lo) - _EDGE_TOL
                hi = np.array(rp.box.hi) + _EDGE_TOL
                m = (~covered) & np.all((ys >= lo) & (ys <= hi), axis=1)
                if m.any():
                    cols = [ex.evaluate_grid(e2, ys[m]) for e2 in rp.exprs]
                    back[m] = np.stack(cols, axis=-1)
                    covered |= m
            if not covered.all():
                i = int(np.argmax(~covered))
                res = math.inf
                worst = tuple(pts[i])
                note = (f"image point {tuple(ys[i])} not in the declared "
                        f"overlap {t.dst}->{t.src}")
                break
            err = np.max(np.abs(back - pts), axis=1)
            i = int(np.argmax(err))
            if err[i] > res:
                res, worst = float(err[i]), tuple(pts[i])
        pairs.append(PairCheck(t.src, t.dst, res, worst, note))

    triples = []
    names = [c.name for c in a.charts]
    for s, s1, s2 in itertools.permutations(names, 3):
        t01 = a.transition(s, s1)
        t12 = a.transition(s1, s2)
        t02 = a.transition(s, s2)
        if t01 is None or t12 is None or t02 is None:
            continue
        res, worst, count = 0.0, None, 0
        dom12 = t12.domain()
        for p01 in t01.pieces:
            for p02 in t02.pieces:
                cell = _box_intersection(p01.box, p02.box)
                if cell is None:
                    continue
                pts, _ = cell.midpoints(grid)
                ys = np.stack([ex.evaluate_grid(e, pts) for e in p01.exprs],
                              axis=-1)
                keep = np.array([any(_contains_closed(b, y, -_EDGE_TOL)
                                     for b in dom12.boxes) for y in ys])
                if not keep.any():
                    continue
                ptk, yk = pts[keep], ys[keep]
                z1 = t12.apply_grid(yk)
                z2 = t02.apply_grid(ptk)
                err = np.max(np.abs(z1 - z2), axis=1)
                count += len(ptk)
                i = int(np.argmax(err))
                if err[i] > res:
                    res, worst = float(err[i]), tuple(ptk[i])
        note = "" if count else "no sampled triple overlap"
        triples.append(TripleCheck((s, s1, s2), res, worst, count, note))

    return CocycleReport(tuple(pairs), tuple(triples))


# ---------------------------------------------------------------------------
# regular structure

@dataclass(frozen=True)
class StructureReport:
    entries: tuple  # (src, dst, piece index, component, MembershipClaim)
    holds: bool


def check_regular_structure(a: Atlas, kind: str, alpha: Mapping,
                            beta: Mapping, k: int,
                            budget: Budget = Budget()) -> StructureReport:
    """Membership of every transition component in the declared spaces.

    For each ordered pair, each branch of its transition, and each
    coordinate, the derivative blocks of orders 0..k are tested against
    B_alpha(i) and C^(k-beta(i)) on the branch box.  Vacuously true for
    a single chart.
    """
    entries = []
    holds = True
    S = tuple(range(k + 1))
    for t in a.transitions:
        for pi, piece in enumerate(t.pieces):
            dom = Domain((piece.box,))
            template = ClaimTemplate(dom, kind, alpha, beta, k, S)
            for ci, comp in enumerate(piece.exprs):
                claim = check_membership(comp, template, budget)
                entries.append((t.src, t.dst, pi, ci, claim))
                if claim.verdict != MEMBER:
                    holds = False
    return StructureReport(tuple(entries), holds)


# ---------------------------------------------------------------------------
# partitions of unity

@dataclass(frozen=True)
class PartitionOfUnity:
    atlas: Atlas
    psis: Mapping[str, PiecewiseFn]     # chart name -> weight in own coords
    bumps: Mapping[str, ex.Expr]        # numerator bumps per chart
    margin: float
    # pullbacks[s][s'] is the weight of chart s' written in chart-s
    # coordinates; it shares the cell denominators of psis[s], so on
    # every chart psi_s plus the pullbacks sums to one identically
    pullbacks: Mapping[str, Mapping[str, PiecewiseFn]] = field(default_factory=dict)

    def weight(self, name: str) -> PiecewiseFn:
        return self.psis[name]

    def weight_on(self, chart: str, other: str) -> PiecewiseFn:
        """Weight of chart `other` in the coordinates of `chart`."""
        if other == chart:
            return self.psis[chart]
        try:
            return self.pullbacks[chart][other]
        except KeyError:
            raise AtlasError(f"partition has no pullback of {other!r} onto "
                             f"{chart!r}") from None


def _chart_bump(image: Domain, margin: float, name: str) -> ex.Expr:
    total = ex.ZERO
    for box in image.boxes:
        sb = box.shrink(margin)
        if sb is None:
            raise AtlasError(f"margin {margin} leaves no room inside a box "
                             f"of chart {name!r}")
        term = ex.ONE
        for i, (lo, hi) in enumerate(zip(sb.lo, sb.hi)):
            arg = ex.div(ex.sub(ex.mul(2, ex.Var(i + 1)), lo + hi), hi - lo)
            term = ex.mul(term, ex.bump(arg))
        total = ex.add(total, term)
    return total


def _image_cells(image: Domain, overlap_boxes: Iterable[Box]) -> list[Box]:
    cells = []
    obs = list(overlap_boxes)
    for box in image.boxes:
        breaks = []
        for axis in range(box.dimension):
            pts = {box.lo[axis], box.hi[axis]}
            for ob in obs:
                for v in (ob.lo[axis], ob.hi[axis]):
                    if box.lo[axis] < v < box.hi[axis]:
                        pts.add(v)
            breaks.append(sorted(pts))
        for corner in itertools.product(*[range(len(b) - 1) for b in breaks]):
            lo = tuple(breaks[a][i] for a, i in enumerate(corner))
            hi = tuple(breaks[a][i + 1] for a, i in enumerate(corner))
            if all(h - l > _EDGE_TOL for l, h in zip(lo, hi)):
                cells.append(Box(lo, hi))
    return cells


def build_partition(a: Atlas, margin: float = 0.1,
                    coverage_grid: int = 9) -> PartitionOfUnity:
    """Partition of unity subordinate to the chart cover.

    Each chart gets a product-of-bumps numerator supported on its image
    shrunk by the margin; the denominator on a cell adds the neighbour
    bumps pulled back through the applicable transition branch.  The
    quotient is exact symbolically.  Construction fails, naming a point,
    if the shrunk supports do not cover the sampled manifold.
    """
    if margin <= 0:
        raise AtlasError("margin must be positive")
    if len(a.charts) == 1:
        c = a.charts[0]
        pieces = tuple((b, ex.ONE) for b in c.image.boxes)
        return PartitionOfUnity(a, {c.name: PiecewiseFn(pieces)},
                                {c.name: ex.ONE}, margin, {c.name: {}})

    bumps = {c.name: _chart_bump(c.image, margin, c.name) for c in a.charts}
    psis = {}
    pullbacks = {}
    for c in a.charts:
        outgoing = a.transitions_from(c.name)
        obs = [p.box for t in outgoing for p in t.pieces]
        cells = _image_cells(c.image, obs)
        pieces = []
        pulled_pieces = {t.dst: [] for t in outgoing}
        for cell in cells:
            mid = tuple((x + y) / 2 for x, y in zip(cell.lo, cell.hi))
            den = bumps[c.name]
            pulled_here = []
            for t in outgoing:
                piece = t.piece_at(mid)
                if piece is not None:
                    pulled = ex.substitute(
                        bumps[t.dst],
                        {i + 1: e for i, e in enumerate(piece.exprs)})
                    den = ex.add(den, pulled)
                    pulled_here.append((t.dst, pulled))
            # coverage: the summed bumps must be bounded away from zero
            pts = cell.grid(coverage_grid)
            vals = ex.evaluate_grid(den, pts)
            i = int(np.argmin(vals))
            if vals[i] <= 1e-9:
                raise AtlasError(
                    f"shrunk cover misses the manifold near point "
                    f"{tuple(pts[i])} of chart {c.name!r} "
                    f"(margin {margin} too large?)")
            pieces.append((cell, ex.div(bumps[c.name], den)))
            for dst, pulled in pulled_here:
                pulled_pieces[dst].append((cell, ex.div(pulled, den)))
        psis[c.name] = PiecewiseFn(tuple(pieces))
        pullbacks[c.name] = {dst: PiecewiseFn(tuple(ps))
                             for dst, ps in pulled_pieces.items() if ps}
    return PartitionOfUnity(a, psis, bumps, margin, pullbacks)


def partition_residual(pou: PartitionOfUnity, grid: int = 32) -> tuple[float, tuple | None]:
    """Worst deviation of the partition sum from 1 over sampled points.

    Points are sampled per chart; each neighbour weight is evaluated in
    its own coordinates through the declared transition.
    """
    a = pou.atlas
    worst, where = 0.0, None
    for c in a.charts:
        for box in c.image.boxes:
            pts, _ = box.midpoints(grid)
            total = pou.psis[c.name].evaluate_grid(pts)
            for t in a.transitions_from(c.name):
                psi_d = pou.psis[t.dst]
                taken = np.zeros(len(pts), dtype=bool)
                for piece in t.pieces:
                    lo = np.array(piece.box.lo) - _EDGE_TOL
                    hi = np.array(piece.box.hi) + _EDGE_TOL
                    m = (~taken) & np.all((pts >= lo) & (pts <= hi), axis=1)
                    if m.any():
                        ys = np.stack([ex.evaluate_grid(e, pts[m])
                                       for e in piece.exprs], axis=-1)
                        total[m] += psi_d.evaluate_grid(ys)
                        taken |= m
            err = np.abs(total - 1.0)
            i = int(np.argmax(err))
            if err[i] > worst:
                worst, where = float(err[i]), (c.name, tuple(pts[i]))
    return worst, where
