"""Coefficient families and the witness search for local difference.

A three-parameter family assigns n^3 functions per chart, like connection
coefficients but with no transformation law attached.  Two families are
additively different when their upper-index sums differ somewhere on
every chart; the theorem under test says smooth additively-different
families differ pointwise on open sets, coefficient by coefficient.  The
search here replaces the transversality argument with explicit boxes: a
grid scan finds a point of strict difference and the box grows around it
until a sign change or the chart edge stops it.  Failure to find a
witness within budget is reported as inconclusive, never as a refutation.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import expr as ex
from .spaces import (Box, Budget, ClaimTemplate, INCONCLUSIVE, MEMBER,
                     check_membership)
from .atlas import Atlas, PartitionOfUnity, build_partition
from .connective import ConnectiveStructure
from .connection import (LocalCoefficients, _coeff_keys, _normalize_coeffs,
                         glue)

__all__ = [
    "MultiplicityError", "ThreeParamFamily", "three_param_family",
    "additively_different", "DifferenceWitnesses", "locally_different",
    "ResidualReport", "residual",
]

# families count as different at a point when they disagree beyond this
_DIFF_TOL = 1e-12


class MultiplicityError(ValueError):
    """Mismatched families or an unmet theorem hypothesis."""


@dataclass(frozen=True)
class ThreeParamFamily:
    """Per-chart coefficient functions Omega^c_{ab}, keys (c, a, b)."""

    atlas: Atlas
    coeffs: Mapping[str, Mapping[tuple[int, int, int], ex.Expr]]
    claim: ClaimTemplate | None = None

    def coefficient(self, chart: str, c: int, a: int, b: int) -> ex.Expr:
        return self.coeffs[chart][(c, a, b)]

    def upper_sum(self, chart: str, c: int) -> ex.Expr:
        """Sum of the coefficients with upper index c."""
        n = self.atlas.dimension
        total = ex.ZERO
        for a, b in itertools.product(range(n), repeat=2):
            total = ex.add(total, self.coeffs[chart][(c, a, b)])
        return total


def three_param_family(a: Atlas, coeffs: Mapping,
                       claim: ClaimTemplate | None = None,
                       verify: bool = False,
                       budget: Budget = Budget(grid=16)) -> ThreeParamFamily:
    """Validate per-chart coefficient tables into a family.

    Tables may be keyed (c, a, b) or nested [c][a][b] with expressions,
    strings, or numbers; every chart of the atlas needs a table.  With
    verify=True each coefficient must pass the membership claim on its
    chart image (the claim's domain field is replaced per chart).
    """
    n = a.dimension
    out = {}
    for c in a.charts:
        if c.name not in coeffs:
            raise MultiplicityError(f"missing coefficients for chart "
                                    f"{c.name!r}")
        try:
            table = _normalize_coeffs(n, coeffs[c.name], c.name)
        except ValueError as err:
            raise MultiplicityError(str(err)) from None
        out[c.name] = table
        if verify:
            if claim is None:
                raise MultiplicityError("verify=True needs a claim template")
            template = ClaimTemplate(c.image, claim.kind, claim.alpha,
                                     claim.beta, claim.k, claim.S)
            for key, e in sorted(table.items()):
                v = check_membership(e, template, budget).verdict
                if v != MEMBER:
                    raise MultiplicityError(
                        f"coefficient {key} on chart {c.name!r} fails its "
                        f"membership claim (verdict {v})")
    return ThreeParamFamily(a, out, claim)


def _check_same_atlas(F: ThreeParamFamily, G: ThreeParamFamily,
                      a: Atlas) -> None:
    if F.atlas != a or G.atlas != a:
        raise MultiplicityError("families live on different atlases")


def additively_different(F: ThreeParamFamily, G: ThreeParamFamily,
                         a: Atlas, grid: int = 16) -> dict:
    """Per chart and upper index: do the coefficient sums differ?

    True iff the two upper-index sums disagree beyond tolerance at some
    sampled interior point.  Symmetric in the families, and blind to
    redistributions with equal sums.
    """
    _check_same_atlas(F, G, a)
    n = a.dimension
    out = {}
    for c in a.charts:
        pts = np.concatenate([b.midpoints(grid)[0] for b in c.image.boxes])
        for ci in range(n):
            d = ex.sub(F.upper_sum(c.name, ci), G.upper_sum(c.name, ci))
            vals = ex.evaluate_grid(d, pts)
            out[(c.name, ci)] = bool(np.max(np.abs(vals)) > _DIFF_TOL)
    return out


# --- witness search ---------------------------------------------------------

def _strict_on(d: ex.Expr, box: Box, m: int) -> bool:
    """All sampled values on one side of zero, beyond tolerance."""
    pts, _ = box.midpoints(m)
    vals = ex.evaluate_grid(d, pts)
    if np.min(np.abs(vals)) <= _DIFF_TOL:
        return False
    return bool(np.all(vals > 0) or np.all(vals < 0))


def _grow_box(d: ex.Expr, image: Box, peak: np.ndarray,
              halfwidth: np.ndarray, check_grid: int = 9) -> Box | None:
    """Grow a strict-difference box around the peak point.

    Doubles all halfwidths (clipped to the image) while the samples
    stay strictly one-signed; then backs off toward the peak if the
    final robustness pass disagrees.  Deterministic throughout.
    """
    lo = np.maximum(peak - halfwidth, image.lo)
    hi = np.minimum(peak + halfwidth, image.hi)
    box = Box(tuple(lo), tuple(hi))
    if not _strict_on(d, box, check_grid):
        box = None
        for _ in range(6):
            halfwidth = halfwidth / 2
            cand = Box(tuple(peak - halfwidth), tuple(peak + halfwidth))
            if _strict_on(d, cand, check_grid):
                box = cand
                break
        if box is None:
            return None
    while True:
        w = np.array(box.hi) - np.array(box.lo)
        lo = np.maximum(np.array(box.lo) - w / 2, image.lo)
        hi = np.minimum(np.array(box.hi) + w / 2, image.hi)
        cand = Box(tuple(lo), tuple(hi))
        if cand == box:
            break
        if not _strict_on(d, cand, check_grid):
            break
        box = cand
    # robustness: a finer pass must agree, else shrink toward the peak
    for _ in range(8):
        if _strict_on(d, box, 4 * check_grid):
            return box
        lo = peak + (np.array(box.lo) - peak) * 0.6
        hi = peak + (np.array(box.hi) - peak) * 0.6
        box = Box(tuple(lo), tuple(hi))
    return None


@dataclass(frozen=True)
class DifferenceWitnesses:
    """Outcome of the search: a box per coefficient, or inconclusive."""

    witnesses: Mapping[tuple, Box | None]   # keys (chart, c, a, b)
    outcomes: Mapping[tuple, str]           # "found" | "inconclusive"
    grid: int

    @property
    def all_found(self) -> bool:
        return all(v == "found" for v in self.outcomes.values())


def locally_different(F: ThreeParamFamily, G: ThreeParamFamily, a: Atlas,
                      grid: int = 16, jobs: int = 1) -> DifferenceWitnesses:
    """Open witness boxes of strict coefficient difference.

    Requires the smooth flag on the atlas and additive difference on
    every chart and upper index; both are theorem hypotheses and their
    failure rejects the call rather than producing a verdict.  For each
    coefficient the sampled point of largest difference seeds a box
    (ties resolve to the first grid point, so runs are reproducible);
    search failure within budget is recorded as inconclusive.
    """
    _check_same_atlas(F, G, a)
    if a.k != math.inf:
        raise MultiplicityError(
            "local difference is only checked for smooth atlases "
            "(k = infinity)")
    add_ok = additively_different(F, G, a, grid)
    for key, ok in sorted(add_ok.items()):
        if not ok:
            raise MultiplicityError(
                f"additive-difference hypothesis fails on chart "
                f"{key[0]!r}, upper index {key[1]}")
    n = a.dimension

    def search(task):
        chart, key = task
        d = ex.sub(F.coeffs[chart][key], G.coeffs[chart][key])
        best = None
        for image in a.chart(chart).image.boxes:
            pts, _ = image.midpoints(grid)
            vals = ex.evaluate_grid(d, pts)
            i = int(np.argmax(np.abs(vals)))
            if best is None or abs(vals[i]) > best[0]:
                best = (abs(vals[i]), image, pts[i])
        if best[0] <= _DIFF_TOL:
            return (chart, *key), None
        _, image, peak = best
        cell = (np.array(image.hi) - np.array(image.lo)) / grid
        box = _grow_box(d, image, peak, cell / 2)
        return (chart, *key), box

    tasks = [(c.name, key) for c in sorted(a.charts, key=lambda ch: ch.name)
             for key in _coeff_keys(n)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(search, tasks))
    else:
        results = [search(t) for t in tasks]
    witnesses = {key: box for key, box in results}
    outcomes = {key: ("found" if box is not None else INCONCLUSIVE)
                for key, box in results}
    return DifferenceWitnesses(witnesses, outcomes, grid)


# --- residual diagnostics ---------------------------------------------------

@dataclass(frozen=True)
class ResidualReport:
    values: Mapping[tuple, float]   # (chart, c) -> sup residual
    grid: int

    @property
    def worst(self) -> float:
        return max(self.values.values(), default=0.0)


def residual(locals_: Mapping[str, LocalCoefficients],
             cs: ConnectiveStructure, a: Atlas, omega: ThreeParamFamily,
             grid: int = 16,
             pou: PartitionOfUnity | None = None) -> ResidualReport:
    """Sup distance between the built sums and the target sums.

    Glues the local families, applies the structure's transformer to
    every coefficient, sums over the lower indices, and measures the
    sup difference to the family's upper-index sums per chart and upper
    index.  A diagnostic for how far a prescribed family is from being
    realized by a glued connection, not a solver.
    """
    if omega.atlas != a:
        raise MultiplicityError("family lives on a different atlas")
    if pou is None:
        pou = build_partition(a)
    g = glue(a, pou, locals_)
    xi = cs.transformer()
    n = a.dimension
    values = {}
    for c in sorted(a.charts, key=lambda ch: ch.name):
        pts = np.concatenate([b.midpoints(grid)[0] for b in c.image.boxes])
        for ci in range(n):
            total = np.zeros(len(pts))
            for ai, bi in itertools.product(range(n), repeat=2):
                total += xi(g.coeffs[c.name][(ci, ai, bi)]).evaluate_grid(pts)
            target = ex.evaluate_grid(omega.upper_sum(c.name, ci), pts)
            values[(c.name, ci)] = float(np.max(np.abs(total - target)))
    return ResidualReport(values, grid)
