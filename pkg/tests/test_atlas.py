"""Atlas validation, transition consistency, partitions of unity."""

import math

import numpy as np
import pytest

from regcalc import atlas as at
from regcalc import expr as ex
from regcalc import spaces as sp
from regcalc.atlas import (Atlas, AtlasError, Chart, PiecewiseFn, Transition,
                           TransitionPiece)
from regcalc.spaces import Box, Domain

from conftest import (PI, TAU, X1, X2, circle_atlas, frac, half_turn_pieces,
                      interior_points, single_chart_atlas, torus_atlas)


# ---------------------------------------------------------------------------
# construction and validation


def test_chart_and_piece_validation():
    with pytest.raises(AtlasError):
        Chart("", Domain.box((0.0,), (1.0,)))
    box = Box((0.0, 0.0), (1.0, 1.0))
    with pytest.raises(AtlasError):
        TransitionPiece(box, (X1,))                # one expr for two coords
    with pytest.raises(AtlasError):
        TransitionPiece(box, (X1, "x2"))           # not an expression
    with pytest.raises(AtlasError):
        TransitionPiece(Box((0.0,), (1.0,)), (X2,))  # variable beyond dim


def test_transition_apply_and_domain():
    t = Transition("A", "B", half_turn_pieces())
    assert t.dimension == 1
    assert t.domain() == Domain((Box((0.0,), (PI,)), Box((PI,), (TAU,))))
    assert t.apply((1.0,)) == pytest.approx((1.0 + PI,))
    assert t.apply((4.0,)) == pytest.approx((4.0 - PI,))
    with pytest.raises(AtlasError):
        t.apply((7.0,))
    assert t.piece_at((7.0,)) is None

    pts = np.array([[0.5], [2.0], [5.0]])
    out = t.apply_grid(pts)
    assert out[:, 0] == pytest.approx([0.5 + PI, 2.0 + PI, 5.0 - PI])
    with pytest.raises(AtlasError):
        t.apply_grid(np.array([[0.5], [9.0]]))
    with pytest.raises(AtlasError):
        Transition("A", "B", ())


def test_atlas_validation():
    a = Chart("A", Domain.box((0.0,), (TAU,)))
    b = Chart("B", Domain.box((0.0,), (TAU,)))
    t = Transition("A", "B", half_turn_pieces())

    with pytest.raises(AtlasError):
        Atlas((), (), 2)
    with pytest.raises(AtlasError):
        Atlas((a, Chart("A", a.image)), (), 2)
    with pytest.raises(AtlasError):
        Atlas((a,), (t,), 2)                       # transition names B
    with pytest.raises(AtlasError):
        Atlas((a, b), (Transition("A", "A", half_turn_pieces()),), 2)
    with pytest.raises(AtlasError):
        Atlas((a, b), (t, t), 2)                   # duplicate pair
    with pytest.raises(AtlasError):
        Atlas((a, b), (t,), 0)
    with pytest.raises(AtlasError):
        Atlas((a, b), (t,), 2.5)
    with pytest.raises(AtlasError):
        Atlas((a, Chart("B", Domain.box((0.0, 0.0), (1.0, 1.0)))), (), 2)

    smooth = Atlas((a, b), (t, Transition("B", "A", half_turn_pieces())),
                   math.inf, k_check=5)
    assert smooth.order == 5
    finite = circle_atlas(k=3)
    assert finite.order == 3
    assert finite.chart("A").name == "A"
    with pytest.raises(AtlasError):
        finite.chart("Z")
    assert finite.transition("A", "B") is not None
    assert finite.transition("B", "Z") is None
    assert finite.neighbors("A") == ("B",)
    assert finite.dimension == 1


# ---------------------------------------------------------------------------
# piecewise functions


def test_piecewise_evaluation():
    box = Box((0.0,), (1.0,))
    f = PiecewiseFn(((box, X1),), outside=3.0)
    assert f.dimension == 1
    assert f.evaluate((0.25,)) == pytest.approx(0.25)
    assert f.evaluate((2.0,)) == 3.0
    vals = f.evaluate_grid(np.array([[0.5], [-1.0]]))
    assert vals.tolist() == [0.5, 3.0]

    c = PiecewiseFn.constant(7, box)
    assert c.evaluate((0.5,)) == 7.0

    with pytest.raises(AtlasError):
        PiecewiseFn(()).dimension
    with pytest.raises(AtlasError):
        f.derive(1)                                # nonzero outside value
    g = PiecewiseFn(((box, ex.mul(X1, X1)),))
    assert g.derive(1).evaluate((0.5,)) == pytest.approx(1.0)
    assert g.differentiate({1: 2}).evaluate((0.5,)) == pytest.approx(2.0)


def test_piecewise_combination_on_refined_cells():
    left = PiecewiseFn(((Box((0.0,), (2.0,)), X1),))
    right = PiecewiseFn(((Box((1.0,), (3.0,)), frac(10)),))
    s = left + right
    assert s.evaluate((0.5,)) == pytest.approx(0.5)
    assert s.evaluate((1.5,)) == pytest.approx(11.5)
    assert s.evaluate((2.5,)) == pytest.approx(10.0)
    assert s.evaluate((5.0,)) == 0.0
    # cells come from the merged breakpoints
    assert {tuple(b.lo) + tuple(b.hi) for b, _ in s.pieces} == {
        (0.0, 1.0), (1.0, 2.0), (2.0, 3.0)}

    threes = PiecewiseFn(((Box((0.0,), (2.0,)), frac(3)),))
    d = threes - threes
    assert not d.pieces                            # folded zeros are dropped
    assert d.evaluate((1.0,)) == 0.0
    zeros = PiecewiseFn(((Box((0.0,), (2.0,)), ex.ZERO),))
    assert not (left * zeros).pieces

    p = left * right
    assert p.evaluate((0.5,)) == 0.0
    assert p.evaluate((1.5,)) == pytest.approx(15.0)
    assert (2 * left).evaluate((1.5,)) == pytest.approx(3.0)
    assert (left - 1).evaluate((1.5,)) == pytest.approx(0.5)


def test_piecewise_combining_empty_functions():
    # the zero function occurs naturally once zero pieces are dropped;
    # adding two of them must stay well defined
    z = PiecewiseFn(())
    s = z + z
    assert not s.pieces and s.outside == 0.0
    t = PiecewiseFn((), 2.0).combine(PiecewiseFn((), 0.5), ex.sub)
    assert not t.pieces and t.outside == pytest.approx(1.5)
    # empty against nonempty still refines against the real pieces
    one = PiecewiseFn(((Box((0.0,), (1.0,)), ex.ONE),))
    assert (z + one).evaluate((0.5,)) == 1.0


def test_piecewise_works_in_membership_checks():
    box = Box((0.0,), (TAU,))
    pw = PiecewiseFn(((box, ex.sin(X1)),))
    t = sp.ClaimTemplate(Domain.box((0.5,), (6.0,)), "Ck",
                         {0: 1}, {0: 1}, 2, (0,))
    claim = sp.check_membership(pw, t, sp.Budget(grid=16))
    assert claim.verdict == sp.MEMBER


# ---------------------------------------------------------------------------
# transition verification


def test_verify_atlas_circle_is_exact():
    rep = at.verify_atlas(circle_atlas(), grid=16)
    assert rep.passed
    assert rep.max_residual <= 1e-12
    assert {(p.src, p.dst) for p in rep.pairs} == {("A", "B"), ("B", "A")}
    assert all(p.invertible for p in rep.pairs)
    assert rep.triples == ()                       # no composable triple


def test_verify_atlas_torus_checks_triples():
    rep = at.verify_atlas(torus_atlas(), grid=4)
    assert rep.passed
    assert len(rep.pairs) == 12
    assert rep.triples and all(t.samples > 0 for t in rep.triples)
    assert rep.max_residual <= 1e-12


def test_verify_atlas_flags_missing_reverse():
    a = Chart("A", Domain.box((0.0,), (TAU,)))
    b = Chart("B", Domain.box((0.0,), (TAU,)))
    one_way = Atlas((a, b), (Transition("A", "B", half_turn_pieces()),), 2)
    rep = at.verify_atlas(one_way, grid=4)
    assert not rep.passed
    assert rep.pairs[0].residual == math.inf
    assert "reverse" in rep.pairs[0].note


def test_verify_atlas_detects_corrupted_transition():
    good = circle_atlas()
    bad_pieces = tuple(
        TransitionPiece(p.box, (ex.add(p.exprs[0], frac(0.001)),))
        for p in good.transition("A", "B").pieces)
    bad = Atlas(good.charts,
                (Transition("A", "B", bad_pieces),
                 good.transition("B", "A")), good.k)
    rep = at.verify_atlas(bad, grid=8)
    assert not rep.passed
    worst = max(p.residual for p in rep.pairs)
    assert worst == pytest.approx(0.001, rel=1e-6)


def test_verify_atlas_single_chart_vacuous():
    rep = at.verify_atlas(single_chart_atlas())
    assert rep.passed and rep.pairs == () and rep.max_residual == 0.0


# ---------------------------------------------------------------------------
# regular structure of the description


def test_regular_structure_of_circle_transitions():
    a = circle_atlas(k=2)
    rep = at.check_regular_structure(
        a, "Ck", {i: 2 for i in range(3)}, {i: 1 for i in range(3)}, 2,
        sp.Budget(grid=8))
    assert rep.holds
    # two transitions, two branches each, one coordinate
    assert len(rep.entries) == 4
    assert all(e[4].verdict == sp.MEMBER for e in rep.entries)


def test_regular_structure_detects_nonmember_component():
    a = Chart("A", Domain.box((0.0,), (1.0,)))
    b = Chart("B", Domain.box((1.0,), (100.0,)))
    t = Transition("A", "B", (TransitionPiece(Box((0.0,), (1.0,)),
                                              (ex.div(frac(1), X1),)),))
    atlas = Atlas((a, b), (t,), 2)
    rep = at.check_regular_structure(
        atlas, "Lp", {i: 1 for i in range(3)}, {i: 2 for i in range(3)}, 2,
        sp.Budget(grid=16))
    assert not rep.holds


# ---------------------------------------------------------------------------
# partitions of unity


def test_partition_single_chart_is_constant_one():
    pou = at.build_partition(single_chart_atlas())
    psi = pou.weight("C")
    assert psi.evaluate((0.3,)) == 1.0
    assert pou.weight_on("C", "C") is psi
    with pytest.raises(AtlasError):
        pou.weight_on("C", "D")
    worst, _ = at.partition_residual(pou, grid=16)
    assert worst == 0.0


def test_partition_circle_sums_to_one_exactly():
    a = circle_atlas()
    pou = at.build_partition(a, margin=0.5)
    rng = np.random.default_rng(7)
    for c in a.charts:
        total = pou.weight(c.name)
        for other in a.neighbors(c.name):
            total = total + pou.weight_on(c.name, other)
        for box in c.image.boxes:
            for p in interior_points(box, rng, 25):
                # shared cell denominators make the sum exact, not just close
                assert total.evaluate(p) == pytest.approx(1.0, abs=1e-15)
    worst, _ = at.partition_residual(pou, grid=64)
    assert worst <= 1e-12


def test_partition_supports_are_strictly_interior():
    a = circle_atlas()
    margin = 0.5
    pou = at.build_partition(a, margin=margin)
    for c in a.charts:
        bump = pou.bumps[c.name]
        for x in (0.0, margin / 2, TAU - margin / 2, TAU):
            assert ex.evaluate(bump, (x,)) == 0.0
        assert ex.evaluate(bump, (PI,)) > 0.0


def test_partition_torus_residual():
    pou = at.build_partition(torus_atlas(), margin=0.4)
    worst, _ = at.partition_residual(pou, grid=12)
    assert worst <= 1e-12


def test_partition_margin_validation():
    a = circle_atlas()
    with pytest.raises(AtlasError):
        at.build_partition(a, margin=0.0)
    with pytest.raises(AtlasError, match="no room"):
        at.build_partition(a, margin=PI + 0.1)
    # supports shrunk this far no longer cover the circle
    with pytest.raises(AtlasError, match="misses the manifold"):
        at.build_partition(a, margin=3.0)


def test_partition_residual_detects_broken_weights():
    a = circle_atlas()
    pou = at.build_partition(a, margin=0.5)
    halved = at.PartitionOfUnity(
        a, {n: psi * frac(0.5) for n, psi in pou.psis.items()},
        pou.bumps, pou.margin, pou.pullbacks)
    worst, where = at.partition_residual(halved, grid=16)
    assert worst == pytest.approx(0.5, abs=1e-12)
    assert where is not None and where[0] in ("A", "B")
