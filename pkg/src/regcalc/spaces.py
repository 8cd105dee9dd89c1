"""Function spaces over open boxes, checked numerically.

Supplies sup-seminorms of derivative blocks on compact boxes, L^p norms
by midpoint quadrature, three-valued membership verdicts (member,
not-member, inconclusive) driven by refinement stability, and the
closure check for families of spaces under multiplication by smooth
bumps.

True membership is undecidable from finitely many samples, so every
verdict follows explicit rules: "member" needs the last two refinements
of every requested norm to agree within 5 percent, "not-member" needs
monotone divergence across at least three refinements or an evaluation
failure, and everything else is "inconclusive".
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import expr as ex

__all__ = [
    "Box", "Domain", "multi_indices",
    "ck_seminorm", "lp_norm",
    "MEMBER", "NOT_MEMBER", "INCONCLUSIVE",
    "Budget", "ClaimTemplate", "EvidenceSeries", "MembershipClaim",
    "check_membership", "ClosureReport", "check_bkab_presheaf",
    "is_bumplike",
    "SpaceError",
]

MEMBER = "member"
NOT_MEMBER = "not-member"
INCONCLUSIVE = "inconclusive"

# relative change accepted between the last two refinements
_STABLE_REL = 0.05


class SpaceError(ValueError):
    """Bad domain, bad template, or unsupported space kind."""


def multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    """All derivative multi-indices over n variables with total order."""
    if n < 1:
        raise SpaceError("need at least one variable")
    if order == 0:
        return [(0,) * n]
    out = []
    for cuts in itertools.combinations_with_replacement(range(n), order):
        mu = [0] * n
        for c in cuts:
            mu[c] += 1
        out.append(tuple(mu))
    return out


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by lower and upper corners."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or not self.lo:
            raise SpaceError("corner dimensions differ or are empty")
        for a, b in zip(self.lo, self.hi):
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise SpaceError(f"degenerate box side [{a}, {b}]")

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        v = 1.0
        for a, b in zip(self.lo, self.hi):
            v *= b - a
        return v

    def shrink(self, margin: float) -> "Box | None":
        lo = tuple(a + margin for a in self.lo)
        hi = tuple(b - margin for b in self.hi)
        if any(a >= b for a, b in zip(lo, hi)):
            return None
        return Box(lo, hi)

    def contains(self, point: Sequence[float]) -> bool:
        return all(a < x < b for a, x, b in zip(self.lo, point, self.hi))

    def grid(self, m: int) -> np.ndarray:
        """Closed grid with m points per axis, endpoints included."""
        if m < 2:
            raise SpaceError("grid needs at least 2 points per axis")
        axes = [np.linspace(a, b, m) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    def midpoints(self, m: int) -> tuple[np.ndarray, float]:
        """Midpoint quadrature nodes (m cells per axis) and cell weight."""
        if m < 1:
            raise SpaceError("need at least one quadrature cell per axis")
        axes = [a + (np.arange(m) + 0.5) * (b - a) / m
                for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=-1)
        return pts, self.volume / m ** self.dimension


@dataclass(frozen=True)
class Domain:
    """Finite union of open axis-aligned boxes of one dimension.

    Compact exhaustion: level l shrinks every box by margin 2^-l and
    drops the boxes that become empty.
    """

    boxes: tuple[Box, ...]

    def __post_init__(self):
        boxes = tuple(self.boxes)
        object.__setattr__(self, "boxes", boxes)
        if not boxes:
            raise SpaceError("domain needs at least one box")
        n = boxes[0].dimension
        if any(b.dimension != n for b in boxes):
            raise SpaceError("all boxes must share one dimension")

    @classmethod
    def box(cls, lo, hi) -> "Domain":
        return cls((Box(tuple(lo), tuple(hi)),))

    @property
    def dimension(self) -> int:
        return self.boxes[0].dimension

    def compacts(self, level: int) -> tuple[Box, ...]:
        margin = 2.0 ** (-level)
        out = tuple(b for b in (bx.shrink(margin) for bx in self.boxes)
                    if b is not None)
        return out

    def first_nonempty_level(self) -> int:
        for level in range(1, 60):
            if self.compacts(level):
                return level
        raise SpaceError("no compact exhaustion level fits inside the domain")


def _is_function_like(f) -> bool:
    # expressions, or anything differentiable and grid-evaluable the
    # same way (piecewise functions from the atlas module qualify)
    return isinstance(f, ex.Expr) or (hasattr(f, "evaluate_grid")
                                      and hasattr(f, "differentiate"))


def _components(f) -> tuple:
    if _is_function_like(f):
        return (f,)
    comps = tuple(f)
    if not comps or not all(_is_function_like(c) for c in comps):
        raise SpaceError("expected an expression or a sequence of them")
    return comps


def _diff(f, orders: Mapping) -> object:
    return ex.differentiate(f, orders) if isinstance(f, ex.Expr) \
        else f.differentiate(orders)


def _geval(f, pts: np.ndarray) -> np.ndarray:
    return ex.evaluate_grid(f, pts) if isinstance(f, ex.Expr) \
        else f.evaluate_grid(pts)


def ck_seminorm(f, r: int, K: Box, grid: int = 64) -> float:
    """Order-r sup seminorm on the compact box K.

    Sum over components of the largest grid sup of any derivative of
    total order exactly r.  Nondecreasing under nested grid refinement.
    """
    comps = _components(f)
    if r < 0:
        raise SpaceError("seminorm order must be nonnegative")
    pts = K.grid(grid)
    total = 0.0
    for comp in comps:
        best = 0.0
        for mu in multi_indices(K.dimension, r):
            d = _diff(comp, {i + 1: o for i, o in enumerate(mu) if o})
            vals = _geval(d, pts)
            best = max(best, float(np.max(np.abs(vals))))
        total += best
    return total


def lp_norm(f, p: int, U, grid: int = 128) -> float:
    """L^p norm over a bounded domain by composite midpoint quadrature.

    For several components the p-th powers are summed before taking the
    root.  Only bounded domains are accepted, which keeps the rule
    "combine exponents with min" sound for intersections.
    """
    if not isinstance(p, int) or p < 1:
        raise SpaceError(f"exponent must be a positive integer, got {p!r}")
    comps = _components(f)
    if isinstance(U, Box):
        U = Domain((U,))
    acc = 0.0
    for box in U.boxes:
        pts, w = box.midpoints(grid)
        for comp in comps:
            vals = _geval(comp, pts)
            acc += float(np.sum(np.abs(vals) ** p)) * w
    return acc ** (1.0 / p)


# ---------------------------------------------------------------------------
# membership

@dataclass(frozen=True)
class Budget:
    """Sampling effort for membership checks."""

    grid: int = 32            # base resolution per axis
    refinements: int = 3      # successive doublings per norm
    levels: int = 3           # compact exhaustion levels for sup norms

    def grids(self) -> list[int]:
        return [self.grid * 2 ** j for j in range(self.refinements)]

    def nested_grids(self) -> list[int]:
        # closed grids that contain the previous points
        out = [self.grid]
        for _ in range(self.refinements - 1):
            out.append(2 * out[-1] - 1)
        return out


@dataclass(frozen=True)
class ClaimTemplate:
    """What to test: for every i in S, the order-i derivative block must
    lie in the primary space (kind Lp with exponent alpha[i], or Ck with
    order alpha[i]) and in C^(k - beta[i])."""

    domain: Domain
    kind: str                      # "Lp" or "Ck"
    alpha: Mapping
    beta: Mapping
    k: int
    S: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "S", tuple(int(i) for i in self.S))
        if self.kind not in ("Lp", "Ck"):
            raise SpaceError(f"unsupported space kind {self.kind!r}")
        if not isinstance(self.k, int) or self.k < 0:
            raise SpaceError("k must be a nonnegative integer")
        for i in self.S:
            if not 0 <= i <= self.k:
                raise SpaceError(f"derivative index {i} outside [0, {self.k}]")
            if i not in self.alpha or i not in self.beta:
                raise SpaceError(f"alpha/beta tables lack index {i}")
            b = self.beta[i]
            if not 0 <= int(b) <= self.k:
                raise SpaceError(f"beta({i}) = {b} outside [0, {self.k}]")
            a = self.alpha[i]
            if self.kind == "Lp" and (int(a) != a or int(a) < 1):
                raise SpaceError(f"alpha({i}) = {a} is not a Lebesgue exponent")
            if self.kind == "Ck" and (int(a) != a or int(a) < 0):
                raise SpaceError(f"alpha({i}) = {a} is not a derivative order")


@dataclass(frozen=True)
class EvidenceSeries:
    label: str
    values: tuple[float, ...]
    verdict: str
    note: str = ""


@dataclass(frozen=True)
class MembershipClaim:
    functions: tuple
    domain: Domain
    k: int
    S: tuple[int, ...]
    per_index: dict
    evidence: tuple[EvidenceSeries, ...]
    verdict: str
    template: "ClaimTemplate | None" = None


def series_verdict(values: Sequence[float]) -> str:
    """Apply the refinement-stability rules to a norm series."""
    vals = list(values)
    if len(vals) < 3:
        return INCONCLUSIVE
    if any(not math.isfinite(v) for v in vals):
        return NOT_MEMBER
    last, prev = vals[-1], vals[-2]
    if abs(last - prev) <= _STABLE_REL * max(abs(last), 1e-12):
        return MEMBER
    increasing = all(a < b for a, b in zip(vals, vals[1:]))
    if increasing and last - prev > _STABLE_REL * max(abs(last), 1e-12):
        return NOT_MEMBER
    return INCONCLUSIVE


def combine_verdicts(verdicts: Iterable[str]) -> str:
    out = MEMBER
    for v in verdicts:
        if v == NOT_MEMBER:
            return NOT_MEMBER
        if v == INCONCLUSIVE:
            out = INCONCLUSIVE
    return out


def _derivative_block(comps, n: int, order: int) -> list[ex.Expr]:
    block = []
    for comp in comps:
        for mu in multi_indices(n, order):
            block.append(_diff(comp, {i + 1: o for i, o in enumerate(mu) if o}))
    return block


def _lp_series(block, p: int, domain: Domain, budget: Budget,
               label: str) -> EvidenceSeries:
    vals, note = [], ""
    for g in budget.grids():
        try:
            vals.append(lp_norm(block, p, domain, g))
        except ex.DomainError as err:
            note = f"evaluation failed: {err}"
            return EvidenceSeries(label, tuple(vals), NOT_MEMBER, note)
    return EvidenceSeries(label, tuple(vals), series_verdict(vals))


def _ck_norm(block, m: int, K: Box, grid: int) -> float:
    return sum(ck_seminorm(block, r, K, grid) for r in range(m + 1))


def _ck_series(block, m: int, domain: Domain, budget: Budget,
               label: str) -> list[EvidenceSeries]:
    start = domain.first_nonempty_level()
    out = []
    for level in range(start, start + budget.levels):
        for K in domain.compacts(level):
            vals, note = [], ""
            failed = False
            for g in budget.nested_grids():
                try:
                    vals.append(_ck_norm(block, m, K, g))
                except ex.DomainError as err:
                    note = f"evaluation failed: {err}"
                    failed = True
                    break
            v = NOT_MEMBER if failed else series_verdict(vals)
            out.append(EvidenceSeries(f"{label} on K(level {level})",
                                      tuple(vals), v, note))
    return out


def check_membership(f, template: ClaimTemplate,
                     budget: Budget = Budget()) -> MembershipClaim:
    """Test the derivative blocks of f against the template's spaces.

    The overall verdict is the conjunction over i in S of both the
    primary-space test and the C^(k - beta(i)) test; the claim carries
    the norm series behind every verdict.
    """
    comps = _components(f)
    n = template.domain.dimension
    evidence: list[EvidenceSeries] = []
    per_index: dict[int, str] = {}

    for i in template.S:
        block = _derivative_block(comps, n, i)
        parts: list[str] = []

        if template.kind == "Lp":
            p = int(template.alpha[i])
            s = _lp_series(block, p, template.domain, budget,
                           f"L{p} of order-{i} block")
            evidence.append(s)
            parts.append(s.verdict)
        else:
            m = int(template.alpha[i])
            series = _ck_series(block, m, template.domain, budget,
                                f"C{m} of order-{i} block")
            evidence.extend(series)
            parts.append(combine_verdicts(s.verdict for s in series))

        m2 = template.k - int(template.beta[i])
        series = _ck_series(block, m2, template.domain, budget,
                            f"C{m2} of order-{i} block")
        evidence.extend(series)
        parts.append(combine_verdicts(s.verdict for s in series))

        per_index[i] = combine_verdicts(parts)

    verdict = combine_verdicts(per_index.values())
    return MembershipClaim(comps, template.domain, template.k, template.S,
                           per_index, tuple(evidence), verdict, template)


# ---------------------------------------------------------------------------
# closure under bump multiplication

@dataclass(frozen=True)
class ClosureReport:
    rejected: tuple   # (kind, index, reason) for bad inputs
    failures: tuple   # (bump index, function index, verdict)
    checked: int

    @property
    def closed(self) -> bool:
        return not self.failures


def is_bumplike(g: ex.Expr, domain: Domain, grid: int = 7) -> bool:
    """A bump must vanish identically outside the domain's closure."""
    shells = []
    for box in domain.boxes:
        for stretch in (1.1, 1.35):
            lo = tuple(a - (b - a) * (stretch - 1) for a, b in zip(box.lo, box.hi))
            hi = tuple(b + (b - a) * (stretch - 1) for a, b in zip(box.lo, box.hi))
            shells.append(Box(lo, hi))
    inside = lambda p: any(b.contains(p) for b in domain.boxes)
    for shell in shells:
        pts = shell.grid(grid)
        keep = np.array([not inside(p) for p in pts])
        if not keep.any():
            continue
        try:
            vals = ex.evaluate_grid(g, pts[keep])
        except ex.DomainError:
            return False
        if np.max(np.abs(vals)) > 1e-12:
            return False
    return True


def check_bkab_presheaf(template: ClaimTemplate, functions: Sequence,
                        bumps: Sequence[ex.Expr],
                        budget: Budget = Budget()) -> ClosureReport:
    """Closure of the template's spaces under bump multiplication.

    Inputs that fail their own precondition (non-member functions,
    non-bump multipliers) are rejected and listed, not counted as
    closure failures.  For every surviving pair the product bump*f is
    run through check_membership; any verdict other than member is a
    closure failure.
    """
    rejected = []
    good_fns = []
    for idx, f in enumerate(functions):
        claim = check_membership(f, template, budget)
        if claim.verdict == MEMBER:
            good_fns.append((idx, _components(f)))
        else:
            rejected.append(("function", idx,
                             f"not a member (verdict {claim.verdict})"))
    good_bumps = []
    for idx, g in enumerate(bumps):
        if not isinstance(g, ex.Expr):
            rejected.append(("bump", idx, "not an expression"))
        elif not is_bumplike(g, template.domain):
            rejected.append(("bump", idx,
                             "does not vanish outside the domain"))
        else:
            good_bumps.append((idx, g))

    failures = []
    checked = 0
    for bi, g in good_bumps:
        for fi, comps in good_fns:
            prod = tuple(ex.mul(g, c) for c in comps)
            claim = check_membership(prod, template, budget)
            checked += 1
            if claim.verdict != MEMBER:
                failures.append((bi, fi, claim.verdict))
    return ClosureReport(tuple(rejected), tuple(failures), checked)
