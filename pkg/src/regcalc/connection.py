"""Affine connections from chart-local coefficient data.

A connection on a chart-described manifold is a family of n^3 coefficient
functions per chart that obey the classical coordinate-change rule on
overlaps.  This module validates local families, transports them across
transitions (symbolically through inverse Jacobians, or numerically by
finite differences), glues them through a partition of unity, tracks the
regularity indices the glued object inherits, and runs the full
constructive existence pipeline with its hypothesis checks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from . import expr as ex
from . import index_algebra as ia
from .spaces import (Budget, ClaimTemplate, Domain, MEMBER,
                     check_membership, ck_seminorm)
from .atlas import (Atlas, AtlasError, Chart, PartitionOfUnity, PiecewiseFn,
                    Transition, _chart_bump, build_partition,
                    check_regular_structure)
from .connective import (ConnectiveStructure, check_degree, check_nice,
                         check_partition_preservation, check_xi_distributive,
                         globalize_regularity)

__all__ = [
    "ConnectionBuildError", "LocalCoefficients", "GlobalConnection",
    "EndValuedOneForm", "CoefficientGrid", "local_connection", "flat_local",
    "change_coordinates", "glue", "verify_connection_law",
    "verify_one_form_law", "glued_regularity_indices",
    "regular_existence_pipeline", "PipelineResult", "difference", "add",
]

# default residual tolerances; symbolic derivatives are exact, finite
# differences carry truncation error
TOL_SYMBOLIC = 1e-6
TOL_GRID = 1e-3
_MIN_DET = 1e-8
_FD_STEP = 1e-4


class ConnectionBuildError(ValueError):
    """Invalid coefficient data or a failed construction step."""


def _coeff_keys(n: int):
    return itertools.product(range(n), repeat=3)


def _normalize_coeffs(n: int, coeffs, chart: str) -> dict:
    """Accept a mapping keyed (c, a, b) or a nested [c][a][b] sequence;
    entries may be expressions, parseable strings, or numbers."""
    table = {}
    if isinstance(coeffs, Mapping):
        items = coeffs.items()
    else:
        items = []
        outer = list(coeffs)
        for c, plane in enumerate(outer):
            for a, row in enumerate(plane):
                for b, entry in enumerate(row):
                    items.append(((c, a, b), entry))
    for key, entry in items:
        key = tuple(int(i) for i in key)
        if len(key) != 3 or not all(0 <= i < n for i in key):
            raise ConnectionBuildError(
                f"coefficient key {key} outside [0, {n})^3 for chart {chart!r}")
        if isinstance(entry, str):
            entry = ex.parse(entry)
        table[key] = ex.as_expr(entry)
    for key in _coeff_keys(n):
        if key not in table:
            raise ConnectionBuildError(
                f"missing coefficient {key} for chart {chart!r}")
    return table


@dataclass(frozen=True)
class LocalCoefficients:
    """Connection coefficients f^c_{ab} on a single chart.

    Keys are (c, a, b): upper index first, then the two derivative
    slots.  Validated to be at least C^2 on the chart image."""

    chart: str
    n: int
    coeffs: Mapping[tuple[int, int, int], ex.Expr]
    claim: ClaimTemplate | None = None
    verdicts: Mapping[tuple[int, int, int], str] | None = None

    def coefficient(self, c: int, a: int, b: int) -> ex.Expr:
        return self.coeffs[(c, a, b)]

    @property
    def is_zero(self) -> bool:
        return all(e == ex.ZERO for e in self.coeffs.values())


def local_connection(chart: Chart, coeffs, claim: ClaimTemplate | None = None,
                     verify: bool = False, budget: Budget = Budget(grid=16),
                     grid: int = 33) -> LocalCoefficients:
    """Validate a coefficient family as a local connection on the chart.

    Any C^2 family of functions on the image works; the check evaluates
    the order-0..2 seminorms on compacts of the exhaustion at an odd
    grid (so poles on symmetry axes are hit exactly) and rejects
    non-finite values or evaluation failures.  With verify=True every
    coefficient is additionally run through check_membership against
    the claim, and a not-member verdict rejects the family.
    """
    n = chart.image.dimension
    table = _normalize_coeffs(n, coeffs, chart.name)
    if grid % 2 == 0:
        grid += 1
    for key, e in table.items():
        bad = [v for v in ex.free_variables(e) if not 1 <= v <= n]
        if bad:
            raise ConnectionBuildError(
                f"coefficient {key} of chart {chart.name!r} uses variable "
                f"x{bad[0]} beyond dimension {n}")
        level = chart.image.first_nonempty_level()
        for K in chart.image.compacts(level):
            try:
                total = sum(ck_seminorm(e, r, K, grid) for r in range(3))
            except ex.DomainError as err:
                raise ConnectionBuildError(
                    f"coefficient {key} of chart {chart.name!r} is not C^2 "
                    f"on the image: {err}") from None
            if not math.isfinite(total):
                raise ConnectionBuildError(
                    f"coefficient {key} of chart {chart.name!r} is not C^2 "
                    f"on the image: order-2 norm is not finite")
    verdicts = None
    if verify:
        if claim is None:
            raise ConnectionBuildError("verify=True needs a claim template")
        verdicts = {}
        for key, e in sorted(table.items()):
            v = check_membership(e, claim, budget).verdict
            verdicts[key] = v
            if v == "not-member":
                raise ConnectionBuildError(
                    f"coefficient {key} of chart {chart.name!r} fails its "
                    f"membership claim")
    return LocalCoefficients(chart.name, n, table, claim, verdicts)


def flat_local(chart: Chart) -> LocalCoefficients:
    """The all-zero family: every chart carries a flat local connection."""
    n = chart.image.dimension
    return LocalCoefficients(chart.name, n,
                             {key: ex.ZERO for key in _coeff_keys(n)})


# ---------------------------------------------------------------------------
# coordinate change

def _adjugate_over_det(J):
    """Symbolic inverse of an expression matrix, sizes 1 to 3."""
    n = len(J)
    if n == 1:
        det = J[0][0]
        adj = [[ex.ONE]]
    elif n == 2:
        det = ex.sub(ex.mul(J[0][0], J[1][1]), ex.mul(J[0][1], J[1][0]))
        adj = [[J[1][1], ex.neg(J[0][1])],
               [ex.neg(J[1][0]), J[0][0]]]
    elif n == 3:
        def m2(r1, c1, r2, c2):
            return ex.sub(ex.mul(J[r1][c1], J[r2][c2]),
                          ex.mul(J[r1][c2], J[r2][c1]))
        det = ex.add(ex.sub(ex.mul(J[0][0], m2(1, 1, 2, 2)),
                            ex.mul(J[0][1], m2(1, 0, 2, 2))),
                     ex.mul(J[0][2], m2(1, 0, 2, 1)))
        rows = range(3)
        adj = [[None] * 3 for _ in rows]
        for i in rows:
            for j in rows:
                r = [r_ for r_ in rows if r_ != j]
                c = [c_ for c_ in rows if c_ != i]
                minor = m2(r[0], c[0], r[1], c[1])
                adj[i][j] = minor if (i + j) % 2 == 0 else ex.neg(minor)
    else:
        raise ConnectionBuildError(
            f"symbolic inverse Jacobians stop at dimension 3 (got {n}); "
            f"use grid mode")
    return adj, det


def _check_invertible(det_vals: np.ndarray, pts: np.ndarray, src: str,
                      dst: str, min_det: float) -> None:
    worst = int(np.argmin(np.abs(det_vals)))
    if abs(det_vals[worst]) <= min_det:
        raise ConnectionBuildError(
            f"transition {src}->{dst} has a singular Jacobian near "
            f"{tuple(pts[worst])} (|det| = {abs(det_vals[worst]):.3e})")


def _symbolic_frames(piece, n: int):
    """Jacobian, second derivatives, and inverse Jacobian as expressions."""
    J = [[ex.derive(piece.exprs[m], a + 1) for a in range(n)]
         for m in range(n)]
    H = [[[ex.derive(J[l][a], b + 1) for b in range(n)] for a in range(n)]
         for l in range(n)]
    adj, det = _adjugate_over_det(J)
    Jinv = [[ex.div(adj[c][l], det) for l in range(n)] for c in range(n)]
    return J, H, Jinv, det


def _fd_frames(piece, pts: np.ndarray, h: float = _FD_STEP):
    """Numeric transition frames by central differences of the map.

    Branch expressions extend smoothly past their box, so stencil
    points may leave the box without changing the branch."""
    n = pts.shape[1]
    npts = pts.shape[0]

    def emap(q):
        return np.stack([ex.evaluate_grid(e, q) for e in piece.exprs],
                        axis=-1)

    ys = emap(pts)
    J = np.empty((npts, n, n))
    H = np.empty((npts, n, n, n))
    shifted = {}
    for a in range(n):
        for sign in (1, -1):
            q = pts.copy()
            q[:, a] += sign * h
            shifted[(a, sign)] = emap(q)
    for a in range(n):
        J[:, :, a] = (shifted[(a, 1)] - shifted[(a, -1)]) / (2 * h)
        H[:, :, a, a] = (shifted[(a, 1)] - 2 * ys + shifted[(a, -1)]) / h ** 2
    for a in range(n):
        for b in range(a + 1, n):
            vals = 0.0
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                q2 = pts.copy()
                q2[:, a] += sa * h
                q2[:, b] += sb * h
                vals = vals + sa * sb * emap(q2)
            mixed = vals / (4 * h ** 2)
            H[:, :, a, b] = mixed
            H[:, :, b, a] = mixed
    return ys, J, H


@dataclass(frozen=True)
class CoefficientGrid:
    """Sampled coefficient values in target-chart coordinates."""

    chart: str
    points: np.ndarray
    values: Mapping[tuple[int, int, int], np.ndarray]


def _pulled_values(coeff_at, t: Transition,
                   pts: np.ndarray, piece, mode: str, min_det: float,
                   include_inhomogeneous: bool = True) -> np.ndarray:
    """Transformed coefficient values at source points of one branch.

    coeff_at(key, ys) supplies the untransformed values at the image
    points; returns an array indexed [point, c, a, b]."""
    n = pts.shape[1]
    if mode == "symbolic":
        J_e, H_e, _, det_e = _symbolic_frames(piece, n)
        ys = np.stack([ex.evaluate_grid(e, pts) for e in piece.exprs],
                      axis=-1)
        J = np.empty((len(pts), n, n))
        H = np.empty((len(pts), n, n, n))
        for m in range(n):
            for a in range(n):
                J[:, m, a] = ex.evaluate_grid(J_e[m][a], pts)
                for b in range(n):
                    H[:, m, a, b] = ex.evaluate_grid(H_e[m][a][b], pts)
        dets = ex.evaluate_grid(det_e, pts)
    elif mode == "grid":
        ys, J, H = _fd_frames(piece, pts)
        dets = np.linalg.det(J)
    else:
        raise ConnectionBuildError(f"unknown mode {mode!r}")
    _check_invertible(dets, pts, t.src, t.dst, min_det)
    Jinv = np.linalg.inv(J)
    F = np.empty((len(pts), n, n, n))
    for key in _coeff_keys(n):
        F[:, key[0], key[1], key[2]] = coeff_at(key, ys)
    out = np.einsum("ncl,nma,nob,nlmo->ncab", Jinv, J, J, F)
    if include_inhomogeneous:
        out = out + np.einsum("nlab,ncl->ncab", H, Jinv)
    return out


def change_coordinates(src: LocalCoefficients, t: Transition,
                       mode: str = "symbolic", grid: int = 8,
                       min_det: float = _MIN_DET):
    """Transport coefficients from chart t.dst onto chart t.src.

    The rule is the classical one: contract with the transition
    Jacobian on the two lower slots and with its inverse on the upper
    slot, then add the inverse-weighted second derivatives of the map.
    Symbolic mode (dimensions up to 3) returns a piecewise expression
    per coefficient with exact adjugate-over-determinant inverses; grid
    mode samples each branch and solves for the inverse numerically.
    The Jacobian must stay numerically invertible on the sampled
    overlap.
    """
    if t.dst != src.chart:
        raise ConnectionBuildError(
            f"transition maps into chart {t.dst!r} but the coefficients "
            f"live on {src.chart!r}")
    n = t.dimension
    if n != src.n:
        raise ConnectionBuildError("transition and coefficients disagree "
                                   "on the dimension")
    if mode == "grid":
        all_pts, all_vals = [], []
        for piece in t.pieces:
            pts, _ = piece.box.midpoints(grid)

            def coeff_at(key, ys):
                return ex.evaluate_grid(src.coeffs[key], ys)

            all_vals.append(_pulled_values(coeff_at, t, pts, piece,
                                           "grid", min_det))
            all_pts.append(pts)
        pts = np.concatenate(all_pts)
        vals = np.concatenate(all_vals)
        values = {key: vals[:, key[0], key[1], key[2]].copy()
                  for key in _coeff_keys(n)}
        return CoefficientGrid(t.src, pts, values)
    if mode != "symbolic":
        raise ConnectionBuildError(f"unknown mode {mode!r}")

    out_pieces = {key: [] for key in _coeff_keys(n)}
    for piece in t.pieces:
        # invertibility is checked at samples before trusting the branch
        pts, _ = piece.box.midpoints(max(grid, 4))
        J_e, H_e, Jinv, det_e = _symbolic_frames(piece, n)
        _check_invertible(ex.evaluate_grid(det_e, pts), pts, t.src, t.dst,
                          min_det)
        sub = {i + 1: e for i, e in enumerate(piece.exprs)}
        comp = {key: ex.substitute(src.coeffs[key], sub)
                for key in _coeff_keys(n)}
        for c, a, b in _coeff_keys(n):
            total = ex.ZERO
            for l, m, o in _coeff_keys(n):
                total = ex.add(total, ex.mul(
                    ex.mul(Jinv[c][l], ex.mul(J_e[m][a], J_e[o][b])),
                    comp[(l, m, o)]))
            for l in range(n):
                total = ex.add(total, ex.mul(H_e[l][a][b], Jinv[c][l]))
            out_pieces[(c, a, b)].append((piece.box, total))
    return {key: PiecewiseFn(tuple(ps)) for key, ps in out_pieces.items()}


# ---------------------------------------------------------------------------
# gluing

@dataclass(frozen=True)
class GlobalConnection:
    """Per-chart coefficient functions, keeping the partition and the
    local families they were glued from when known."""

    atlas: Atlas
    coeffs: Mapping[str, Mapping[tuple[int, int, int], PiecewiseFn]]
    partition: PartitionOfUnity | None = None
    locals: Mapping[str, LocalCoefficients] | None = None

    @property
    def n(self) -> int:
        return self.atlas.dimension

    def coefficient(self, chart: str, c: int, a: int, b: int) -> PiecewiseFn:
        return self.coeffs[chart][(c, a, b)]


def glue(a: Atlas, pou: PartitionOfUnity,
         locals: Mapping[str, LocalCoefficients]) -> GlobalConnection:
    """Combine local families into a global connection.

    On each chart the result is the weight-combined sum of the chart's
    own family and every neighbour family transported through the
    declared transition; the weights are the partition's, re-expressed
    in the chart's coordinates.  Since the weights sum to one, charts
    that agree keep their coefficients.  Accumulation runs in sorted
    chart order for reproducibility.
    """
    if pou.atlas != a:
        raise ConnectionBuildError("partition was built on a different atlas")
    n = a.dimension
    for c in a.charts:
        if c.name not in locals:
            raise ConnectionBuildError(f"missing local for chart {c.name!r}")
        loc = locals[c.name]
        if loc.chart != c.name or loc.n != n:
            raise ConnectionBuildError(
                f"local family for chart {c.name!r} carries the wrong chart "
                f"name or dimension")
    if len(a.charts) == 1:
        c = a.charts[0]
        coeffs = {c.name: {key: PiecewiseFn(tuple(
            (b, locals[c.name].coeffs[key]) for b in c.image.boxes))
            for key in _coeff_keys(n)}}
        return GlobalConnection(a, coeffs, pou, dict(locals))

    coeffs = {}
    for c in sorted(a.charts, key=lambda ch: ch.name):
        s = c.name
        acc = {key: pou.psis[s] * locals[s].coeffs[key]
               for key in _coeff_keys(n)}
        for s2 in sorted(a.neighbors(s)):
            t = a.transition(s, s2)
            moved = change_coordinates(locals[s2], t)
            try:
                w = pou.weight_on(s, s2)
            except AtlasError as err:
                raise ConnectionBuildError(str(err)) from None
            for key in _coeff_keys(n):
                acc[key] = acc[key] + w * moved[key]
        coeffs[s] = acc
    return GlobalConnection(a, coeffs, pou, dict(locals))


# ---------------------------------------------------------------------------
# transformation-law verification

@dataclass(frozen=True)
class ResidualEntry:
    src: str
    dst: str
    piece: int
    residual: float
    worst_point: tuple


@dataclass(frozen=True)
class ConnectionLawReport:
    entries: tuple[ResidualEntry, ...]
    mode: str
    tol: float

    @property
    def residual(self) -> float:
        return max((e.residual for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


def _law_residual(coeffs: Mapping, a: Atlas, grid: int, mode: str,
                  min_det: float,
                  include_inhomogeneous: bool) -> tuple[ResidualEntry, ...]:
    n = a.dimension
    entries = []
    for t in a.transitions:
        have = coeffs[t.src]
        other = coeffs[t.dst]

        def coeff_at(key, ys):
            return other[key].evaluate_grid(ys)

        for pi, piece in enumerate(t.pieces):
            pts, _ = piece.box.midpoints(grid)
            predicted = _pulled_values(coeff_at, t, pts, piece, mode,
                                       min_det, include_inhomogeneous)
            actual = np.empty_like(predicted)
            for key in _coeff_keys(n):
                actual[:, key[0], key[1], key[2]] = \
                    have[key].evaluate_grid(pts)
            err = np.max(np.abs(actual - predicted).reshape(len(pts), -1),
                         axis=1)
            i = int(np.argmax(err))
            entries.append(ResidualEntry(t.src, t.dst, pi, float(err[i]),
                                         tuple(pts[i])))
    return tuple(entries)


def verify_connection_law(g: GlobalConnection, a: Atlas | None = None,
                          grid: int = 10, tol: float | None = None,
                          mode: str = "symbolic",
                          min_det: float = _MIN_DET) -> ConnectionLawReport:
    """Residual of the coordinate-change rule on every declared overlap.

    For each ordered transition the target-chart coefficients are
    compared against the transported neighbour coefficients at sampled
    interior points.  Symbolic mode differentiates the transition
    exactly; grid mode rebuilds the frames by central differences,
    which bounds the achievable residual near the truncation error.  A
    single chart passes vacuously.
    """
    if a is None:
        a = g.atlas
    elif a != g.atlas:
        raise ConnectionBuildError("connection was built on a different atlas")
    if tol is None:
        tol = TOL_SYMBOLIC if mode == "symbolic" else TOL_GRID
    entries = _law_residual(g.coeffs, a, grid, mode, min_det, True)
    return ConnectionLawReport(entries, mode, tol)


# ---------------------------------------------------------------------------
# glued regularity indices

def _as_map(table) -> Callable:
    if callable(table):
        return table
    return lambda i: table[i]


def glued_regularity_indices(ds: ia.DistributiveStructure, alpha, beta,
                             alpha0, beta0) -> tuple[Fraction, Fraction]:
    """Regularity indices of the glued connection's coefficient space.

    alpha and beta are the structure's index maps (mappings or
    callables); alpha0 and beta0 are the local families' base indices.
    The glued upper index combines the cubed product index of
    alpha(1) against alpha0 with the product of alpha(2) and alpha(1);
    the lower index is the plain maximum of beta(1), beta(2), beta0.
    Undefined intermediate applications raise, naming the pair.
    """
    al, be = _as_map(alpha), _as_map(beta)
    if isinstance(alpha0, Mapping):
        alpha0 = alpha0[0]
    if isinstance(beta0, Mapping):
        beta0 = beta0[0]
    a1, a2 = al(1), al(2)
    cubed = ia.eps_power(ds, 3, a1, alpha0)
    pair = ds.eps(a2, a1)
    if pair is None:
        raise ia.UndefinedIndexError(f"eps undefined for pair ({a2}, {a1})")
    a0p = ds.delta(cubed, pair)
    if a0p is None:
        raise ia.UndefinedIndexError(
            f"delta undefined for pair ({cubed}, {pair})")
    b0p = max(Fraction(be(1)), Fraction(be(2)), Fraction(beta0))
    return a0p, b0p


# ---------------------------------------------------------------------------
# difference and add

@dataclass(frozen=True)
class EndValuedOneForm:
    """Difference object of two connections: transforms tensorially
    (no inhomogeneous second-derivative term) on overlaps."""

    atlas: Atlas
    coeffs: Mapping[str, Mapping[tuple[int, int, int], PiecewiseFn]]
    law: ConnectionLawReport | None = None

    def coefficient(self, chart: str, c: int, a: int, b: int) -> PiecewiseFn:
        return self.coeffs[chart][(c, a, b)]


def verify_one_form_law(w: EndValuedOneForm, a: Atlas | None = None,
                        grid: int = 10, tol: float = TOL_SYMBOLIC,
                        mode: str = "symbolic",
                        min_det: float = _MIN_DET) -> ConnectionLawReport:
    """Tensoriality residual: like the connection law but without the
    second-derivative term."""
    if a is None:
        a = w.atlas
    elif a != w.atlas:
        raise ConnectionBuildError("form was built on a different atlas")
    entries = _law_residual(w.coeffs, a, grid, mode, min_det, False)
    return ConnectionLawReport(entries, mode, tol)


def difference(g1: GlobalConnection, g2: GlobalConnection,
               verify: bool = True, grid: int = 8,
               tol: float = TOL_SYMBOLIC) -> EndValuedOneForm:
    """Chartwise difference of two connections on the same atlas.

    The inhomogeneous terms cancel, so the result transforms
    tensorially; with verify=True the report is attached.
    """
    if g1.atlas != g2.atlas:
        raise ConnectionBuildError("connections live on different atlases")
    n = g1.n
    coeffs = {}
    for c in g1.atlas.charts:
        coeffs[c.name] = {key: g1.coeffs[c.name][key] - g2.coeffs[c.name][key]
                          for key in _coeff_keys(n)}
    w = EndValuedOneForm(g1.atlas, coeffs)
    if verify:
        report = verify_one_form_law(w, grid=grid, tol=tol)
        w = EndValuedOneForm(g1.atlas, coeffs, report)
    return w


def add(g: GlobalConnection, w: EndValuedOneForm) -> GlobalConnection:
    """Shift a connection by a form; the result is again a connection."""
    if g.atlas != w.atlas:
        raise ConnectionBuildError("connection and form live on different "
                                   "atlases")
    n = g.n
    coeffs = {}
    for c in g.atlas.charts:
        coeffs[c.name] = {key: g.coeffs[c.name][key] + w.coeffs[c.name][key]
                          for key in _coeff_keys(n)}
    return GlobalConnection(g.atlas, coeffs, g.partition, g.locals)


# ---------------------------------------------------------------------------
# existence pipeline

@dataclass(frozen=True)
class CoefficientRegularity:
    chart: str
    key: tuple[int, int, int]
    base_verdict: str
    globalized: object | None   # GlobalizedReport when the base is a member

    @property
    def verdict(self) -> str:
        if self.globalized is None:
            return self.base_verdict
        if self.globalized.all_member:
            return MEMBER
        vals = set(self.globalized.per_level.values())
        return "not-member" if "not-member" in vals else "inconclusive"


@dataclass(frozen=True)
class PipelineResult:
    connection: GlobalConnection
    structure: object
    nice: object
    distributive: object
    degree: object
    ordinary: object
    preservation: object
    law: ConnectionLawReport
    memberships: tuple[CoefficientRegularity, ...]
    window: object

    @property
    def all_member(self) -> bool:
        return all(m.verdict == MEMBER for m in self.memberships)

    @property
    def passed(self) -> bool:
        return self.law.passed and self.all_member


def _probe_functions(image: Domain):
    """Desk-scale probes for the niceness check on a chart image: the
    constant one pins unitality, the interior product bump supplies
    exact zeros for the support test."""
    tests = [ex.ONE]
    poly = ex.ONE
    for i in range(image.dimension):
        poly = ex.mul(poly, ex.Var(i + 1))
    tests.append(poly)
    # a wide probe keeps the derivative peaks resolvable at desk grids
    bumps = [_chart_bump(image, 0.1 * min(
        hi - lo for b in image.boxes
        for lo, hi in zip(b.lo, b.hi)), "probe")]
    return tests, bumps


def regular_existence_pipeline(a: Atlas, kind: str, alpha: Mapping,
                               beta: Mapping, cs: ConnectiveStructure,
                               z, theta: Mapping, vartheta: Mapping,
                               locals: Mapping[str, LocalCoefficients] | None = None,
                               pou: PartitionOfUnity | None = None,
                               margin: float = 0.1,
                               budget: Budget = Budget(grid=16),
                               grid: int = 10,
                               tol: float = TOL_SYMBOLIC,
                               ads: ia.AdditiveDegreeSet | None = None) -> PipelineResult:
    """Construct a global connection and verify its regularity claims.

    Hypotheses are checked up front and abort the run by name: the
    atlas must carry the declared regular structure, the connective
    structure must be nice, distributive on samples, and of degree at
    least 2, and the index-map pair must be ordinary on the shrinking
    window with vartheta pointwise at least the derivative order.
    Then local families (all-flat unless supplied) are glued, the
    structure's transformer is applied to every coefficient, and the
    result is verified: the coordinate-change law on overlaps, and the
    per-chart window claims through globalize_regularity.
    """
    k = cs.k
    structure = check_regular_structure(a, kind, alpha, beta, a.order, budget)
    if not structure.holds:
        raise ConnectionBuildError(
            "hypothesis failed: the atlas does not carry the declared "
            "regular structure")

    nice_reports = []
    for c in a.charts:
        tests, bumps = _probe_functions(c.image)
        # the bump-preservation norms need fine nested grids to settle
        nice_reports.append(check_nice(cs, tests, bumps, c.image,
                                       budget=Budget(grid=64, refinements=3,
                                                     levels=2)))
    for rep in nice_reports:
        if not rep.support_preserving:
            raise ConnectionBuildError(
                "hypothesis failed: the structure is not support preserving")
        if not rep.bump_preserving:
            raise ConnectionBuildError(
                "hypothesis failed: the structure is not bump preserving")
        if not rep.unital:
            raise ConnectionBuildError(
                "hypothesis failed: the structure is not unital")

    tests0, _ = _probe_functions(a.charts[0].image)
    dist = check_xi_distributive(cs, tests0, a.charts[0].image)
    if not dist:
        raise ConnectionBuildError(
            "hypothesis failed: the transformer is not distributive over "
            "sums and products on samples")

    degree = check_degree(cs, a, 2)
    if not degree.holds:
        raise ConnectionBuildError(
            "hypothesis failed: the structure does not have degree 2")

    if ads is None:
        ads = ia.integer_additive_set(k)
    # gamma_z rejects shifts past the window, so levels is never empty
    window = ia.gamma_z(ads, int(cs.beta0_j), z)
    levels = window.members()
    pairs = [(theta, vartheta)] * len(levels)
    ordinary = ia.is_ordinary(pairs, list(cs.O.values()), list(cs.Q.values()),
                              window)
    if not ordinary.ordinary:
        raise ConnectionBuildError(
            f"hypothesis failed: the pair is not ordinary ({ordinary.reason})")
    vt = {Fraction(kk): Fraction(v) for kk, v in vartheta.items()}
    for l in levels:
        if vt[l] < l:
            raise ConnectionBuildError(
                f"hypothesis failed: vartheta({l}) = {vt[l]} is below the "
                f"derivative order")

    if pou is None:
        pou = build_partition(a, margin)
    preservation = check_partition_preservation(cs, pou)
    if not preservation.passed:
        raise ConnectionBuildError(
            "hypothesis failed: the transformer does not preserve the "
            "partition of unity")

    if locals is None:
        locals = {c.name: flat_local(c) for c in a.charts}
    glued = glue(a, pou, locals)
    xi = cs.transformer()
    coeffs = {s: {key: xi(pf) for key, pf in table.items()}
              for s, table in glued.coeffs.items()}
    out = GlobalConnection(a, coeffs, pou, dict(locals))

    law = verify_connection_law(out, grid=grid, tol=tol, mode="symbolic")

    tt = {Fraction(kk): v for kk, v in theta.items()}
    memberships = []
    for c in sorted(a.charts, key=lambda ch: ch.name):
        low = min(levels)
        base_template = ClaimTemplate(c.image, kind,
                                      {int(low): tt[low]},
                                      {int(low): int(vt[low])}, k,
                                      (int(low),))
        for key in _coeff_keys(a.dimension):
            pf = out.coeffs[c.name][key]
            base = check_membership(pf, base_template, budget)
            if base.verdict == MEMBER:
                rep = globalize_regularity(base, cs, z, theta, vartheta,
                                           budget, ads)
                memberships.append(CoefficientRegularity(c.name, key,
                                                         base.verdict, rep))
            else:
                memberships.append(CoefficientRegularity(c.name, key,
                                                         base.verdict, None))
    return PipelineResult(out, structure, nice_reports[0], dist, degree,
                          ordinary, preservation, law, tuple(memberships),
                          window)
