"""Connective structures: validation, laws, niceness, globalization."""

from fractions import Fraction

import pytest

from regcalc import connective as cn
from regcalc import expr as ex
from regcalc import index_algebra as ia
from regcalc import atlas as at
from regcalc import spaces as sp
from regcalc.spaces import Box, Budget, ClaimTemplate, Domain

from conftest import (X1, circle_atlas, frac, identity_cs, identity_tables,
                      single_chart_atlas)

UNIT = Domain.box((0.0,), (1.0,))


def unit_bump():
    return ex.bump(ex.sub(ex.mul(frac(2), X1), frac(1)))


def heavy_budget():
    # bump derivatives need resolution before their sup series settle
    return Budget(grid=64, refinements=3, levels=2)


# ---------------------------------------------------------------------------
# construction


def test_identity_connective_reads_k_and_offsets():
    O, Q = identity_tables(k=6, beta0=3)
    cs = cn.identity_connective(O, Q, 0)
    assert cs.k == 6
    assert cs.beta0_j == 3
    assert cs.alpha0_j == 3
    assert cs.j == Fraction(0)
    assert cs.transformer()(X1) is X1


def test_identity_connective_validation():
    O, Q = identity_tables()
    with pytest.raises(cn.ConnectiveError, match="missing the map named 'alpha'"):
        cn.identity_connective({"alpha0": O["alpha0"]}, Q, 0)
    with pytest.raises(cn.ConnectiveError, match="missing the map named 'beta'"):
        cn.identity_connective(O, {"beta0": Q["beta0"], "shift": Q["shift"]}, 0)
    with pytest.raises(cn.ConnectiveError, match="outside the alpha0 domain"):
        cn.identity_connective(O, Q, 9)
    with pytest.raises(cn.ConnectiveError, match="domain is missing"):
        gap = dict(O)
        gap["alpha0"] = {i: 2 for i in (0, 1, 2, 4)}
        cn.identity_connective(gap, Q, 0)

    # beta0(j) must be an integer in [2, k]
    bad_q = dict(Q)
    bad_q["beta0"] = {i: 1 for i in range(5)}
    with pytest.raises(cn.ConnectiveError, match="must be an integer"):
        cn.identity_connective(O, bad_q, 0)

    # the constant map with value alpha0(j) must be present in O
    bent = dict(O)
    bent["alpha0"] = {0: 2, 1: 2, 2: 2, 3: 2, 4: 3}
    with pytest.raises(cn.ConnectiveError, match="constant map"):
        cn.identity_connective(bent, Q, 0)

    # likewise the shifting map in Q
    with pytest.raises(cn.ConnectiveError, match="shifting map"):
        cn.identity_connective(O, {"beta": Q["beta"], "beta0": Q["beta0"]}, 0)


def test_helper_maps():
    assert cn.constant_map(2, 5) == {0: 5, 1: 5, 2: 5}
    assert cn.shifting_map(3) == {0: 3, 1: 2, 2: 1, 3: 0}


def test_transformer_dispatches_on_piecewise_data():
    double = cn.Transformer("double", lambda e: ex.mul(frac(2), e))
    assert ex.evaluate(double(X1), (3.0,)) == pytest.approx(6.0)
    pw = at.PiecewiseFn(((Box((0.0,), (1.0,)), X1),))
    out = double(pw)
    assert isinstance(out, at.PiecewiseFn)
    assert out.evaluate((0.5,)) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# composition and distributivity


def test_composition_laws_hold_for_identity():
    cs = identity_cs()
    tests = [ex.sin(X1), ex.mul(X1, X1)]
    rep = cn.check_composition_laws(cs, tests, UNIT, grid=8)
    assert rep.passed
    # 2^3 + 3^3 triples over the map families, 6^3 over (O, Q) label pairs
    assert rep.checked == 8 + 27 + 216


def test_composition_laws_catch_inconsistent_tables():
    cs = identity_cs()
    shift = cn.Transformer("plus-one", lambda e: ex.add(e, ex.ONE))
    broken = cn.ConnectiveStructure(cs.O, cs.Q, cs.j, cs.k,
                                    d_o={("alpha", "alpha0"): shift})
    rep = cn.check_composition_laws(broken, [X1], UNIT, grid=4)
    assert not rep.passed
    assert any(f[0] == "D_O" for f in rep.failures)


def test_xi_distributivity():
    cs = identity_cs()
    tests = [ex.sin(X1), X1, frac(2)]
    assert cn.check_xi_distributive(cs, tests, UNIT, grid=8)
    plus = cn.ConnectiveStructure(
        cs.O, cs.Q, cs.j, cs.k,
        xi_default=cn.Transformer("plus-one", lambda e: ex.add(e, ex.ONE)))
    assert not cn.check_xi_distributive(plus, tests, UNIT, grid=8)


# ---------------------------------------------------------------------------
# niceness


def test_identity_structure_is_nice():
    cs = identity_cs()
    rep = cn.check_nice(cs, [ex.sin(X1), ex.ONE], [unit_bump()], UNIT,
                        budget=heavy_budget())
    assert rep.nice
    assert rep.support_preserving and rep.bump_preserving and rep.unital
    assert rep.witnesses == ()


def test_niceness_rejects_support_movers():
    cs = identity_cs()
    slide = cn.Transformer(
        "slide", lambda e: ex.substitute(e, {1: ex.add(X1, frac(0.3))}))
    moved = cn.ConnectiveStructure(cs.O, cs.Q, cs.j, cs.k, xi_default=slide)
    rep = cn.check_nice(moved, [ex.sin(X1)], [unit_bump()], UNIT,
                        budget=heavy_budget())
    assert not rep.nice
    assert not rep.support_preserving
    assert any(w[0] == "support" for w in rep.witnesses)


def test_niceness_rejects_non_unital_transformers():
    cs = identity_cs()
    double = cn.Transformer("double", lambda e: ex.mul(frac(2), e))
    scaled = cn.ConnectiveStructure(cs.O, cs.Q, cs.j, cs.k, xi_default=double)
    rep = cn.check_nice(scaled, [ex.ONE], [unit_bump()], UNIT,
                        budget=heavy_budget())
    assert not rep.unital
    assert rep.support_preserving              # doubling keeps zero sets
    assert any(w[0] == "unital" for w in rep.witnesses)


# ---------------------------------------------------------------------------
# degree against an atlas


def test_degree_holds_for_identity_on_circle():
    cs = identity_cs()
    rep = cn.check_degree(cs, circle_atlas(), r=2, grid=6)
    assert rep.holds
    assert rep.checked > 0


def test_degree_order_must_fit_the_atlas():
    cs = identity_cs()
    with pytest.raises(cn.ConnectiveError, match="exceeds the atlas class"):
        cn.check_degree(cs, circle_atlas(k=2), r=3)


def test_degree_catches_order_breaking_transformers():
    cs = identity_cs()
    plus = cn.ConnectiveStructure(
        cs.O, cs.Q, cs.j, cs.k,
        xi_default=cn.Transformer("plus-one", lambda e: ex.add(e, ex.ONE)))
    rep = cn.check_degree(plus, circle_atlas(), r=1, grid=4)
    assert not rep.holds
    src, dst, _pi, _ci, _mu, diff, _pt = rep.failures[0]
    assert (src, dst) in {("A", "B"), ("B", "A")}
    assert diff == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# partition preservation


def test_partition_preservation_identity():
    pou = at.build_partition(circle_atlas(), margin=0.5)
    cs = identity_cs()
    rep = cn.check_partition_preservation(cs, pou, grid=16)
    assert rep.passed
    assert rep.residual <= 1e-12
    assert rep.support_ok
    # explicit label pairs route through the xi table, same identity here
    rep2 = cn.check_partition_preservation(
        cs, pou, pairs=[(("alpha", "beta"), ("alpha0", "beta0"))], grid=8)
    assert rep2.passed


def test_partition_preservation_catches_scaling():
    pou = at.build_partition(circle_atlas(), margin=0.5)
    cs = identity_cs()
    scaled = cn.ConnectiveStructure(
        cs.O, cs.Q, cs.j, cs.k,
        xi_default=cn.Transformer("double", lambda e: ex.mul(frac(2), e)))
    rep = cn.check_partition_preservation(scaled, pou, grid=8)
    assert not rep.passed
    assert rep.residual == pytest.approx(1.0, abs=1e-10)
    assert "sum residual" in rep.note


# ---------------------------------------------------------------------------
# globalization


def _member_claim(budget=Budget(grid=16)):
    t = ClaimTemplate(UNIT, "Ck", {0: 2}, {0: 2}, 4, (0,))
    return sp.check_membership(ex.sin(X1), t, budget)


def full_theta(k=4, value=2):
    return {i: value for i in range(k + 1)}


def full_vartheta(k=4):
    return {i: i for i in range(k + 1)}


def test_globalize_spreads_claim_over_window():
    cs = identity_cs()
    rep = cn.globalize_regularity(_member_claim(), cs, 0,
                                  full_theta(), full_vartheta())
    assert list(rep.window.members()) == [0, 1, 2]
    assert set(rep.per_level) == {0, 1, 2}
    assert rep.all_member
    assert rep.ordinary.ordinary
    assert len(rep.claims) == 3


def test_globalize_window_shrinks_with_z():
    cs = identity_cs()
    rep = cn.globalize_regularity(_member_claim(), cs, 2,
                                  full_theta(), full_vartheta())
    assert list(rep.window.members()) == [0]
    with pytest.raises(ia.IndexAlgebraError):
        cn.globalize_regularity(_member_claim(), cs, 3,
                                full_theta(), full_vartheta())


def test_globalize_requires_member_base_claim():
    cs = identity_cs()
    starved = _member_claim(Budget(grid=8, refinements=1, levels=1))
    assert starved.verdict == sp.INCONCLUSIVE
    with pytest.raises(cn.ConnectiveError, match="not a verified member"):
        cn.globalize_regularity(starved, cs, 0, full_theta(), full_vartheta())


def test_globalize_requires_ordinary_pair():
    cs = identity_cs()
    with pytest.raises(cn.ConnectiveError, match="not ordinary"):
        cn.globalize_regularity(_member_claim(), cs, 0,
                                full_theta(value=3), full_vartheta())
