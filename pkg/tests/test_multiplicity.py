"""Coefficient families, additive difference, and the witness search."""

import math

import numpy as np
import pytest

from regcalc import expr as ex
from regcalc import multiplicity as mu
from regcalc.atlas import build_partition
from regcalc.connection import flat_local, local_connection
from regcalc.spaces import Box, ClaimTemplate, Domain

from conftest import (TAU, X1, X2, circle_atlas, frac, identity_cs,
                      single_chart_atlas)


def smooth_circle():
    return circle_atlas(k=math.inf)


def plane(k=math.inf):
    return single_chart_atlas(lo=(0.0, 0.0), hi=(1.0, 1.0), k=k, name="C")


def family(a, table_for_chart):
    return mu.three_param_family(
        a, {c.name: table_for_chart for c in a.charts})


def zero_family(a):
    n = a.dimension
    zeros = {key: ex.ZERO for key in
             ((c, i, j) for c in range(n) for i in range(n)
              for j in range(n))}
    return family(a, zeros)


# ---------------------------------------------------------------------------
# construction


def test_family_construction_and_upper_sum():
    a = plane()
    f = family(a, {(0, 0, 0): 1, (0, 0, 1): 2, (0, 1, 0): 3, (0, 1, 1): 4,
                   (1, 0, 0): "x1", (1, 0, 1): 0, (1, 1, 0): 0,
                   (1, 1, 1): "sin(x2)"})
    assert ex.evaluate(f.upper_sum("C", 0), (0.3, 0.4)) == pytest.approx(10.0)
    assert ex.evaluate(f.upper_sum("C", 1), (0.3, 0.4)) == pytest.approx(
        0.3 + math.sin(0.4))
    assert ex.evaluate(f.coefficient("C", 0, 1, 0), (0.5, 0.5)) == 3.0


def test_family_validation():
    a = smooth_circle()
    with pytest.raises(mu.MultiplicityError, match="missing coefficients"):
        mu.three_param_family(a, {"A": {(0, 0, 0): 1}})
    with pytest.raises(mu.MultiplicityError, match="outside"):
        family(a, {(0, 0, 1): 1})
    with pytest.raises(mu.MultiplicityError, match="needs a claim"):
        mu.three_param_family(a, {"A": {(0, 0, 0): 1},
                                  "B": {(0, 0, 0): 1}}, verify=True)


def test_family_verify_redomains_claim_per_chart():
    a = smooth_circle()
    placeholder = Domain.box((0.0,), (1.0,))
    ck = ClaimTemplate(placeholder, "Ck", {0: 2}, {0: 2}, 4, (0,))
    f = mu.three_param_family(a, {"A": {(0, 0, 0): "sin(x1)"},
                                  "B": {(0, 0, 0): "cos(x1)"}},
                              claim=ck, verify=True)
    assert f.claim is ck
    lp = ClaimTemplate(placeholder, "Lp", {0: 1}, {0: 2}, 2, (0,))
    with pytest.raises(mu.MultiplicityError, match="fails its membership"):
        mu.three_param_family(a, {"A": {(0, 0, 0): "1 / x1"},
                                  "B": {(0, 0, 0): "cos(x1)"}},
                              claim=lp, verify=True)


# ---------------------------------------------------------------------------
# additive difference


def test_additively_different_constants():
    a = smooth_circle()
    twos = family(a, {(0, 0, 0): 2})
    zero = zero_family(a)
    out = mu.additively_different(twos, zero, a)
    assert out == {("A", 0): True, ("B", 0): True}


def test_additive_difference_is_blind_to_redistribution():
    a = plane()
    base = {(c, i, j): 0 for c in range(2) for i in range(2)
            for j in range(2)}
    f = family(a, {**base, (0, 0, 1): "x1"})
    g = family(a, {**base, (0, 1, 0): "x1"})      # same sum, moved slot
    out = mu.additively_different(f, g, a)
    assert out[("C", 0)] is False
    assert out[("C", 1)] is False


def test_additive_difference_respects_tolerance():
    a = smooth_circle()
    tiny = family(a, {(0, 0, 0): frac(1e-13)})
    out = mu.additively_different(tiny, zero_family(a), a)
    assert out == {("A", 0): False, ("B", 0): False}


def test_families_must_share_the_atlas():
    a, b = smooth_circle(), circle_atlas(k=4)
    twos = family(a, {(0, 0, 0): 2})
    with pytest.raises(mu.MultiplicityError, match="different atlases"):
        mu.additively_different(twos, zero_family(b), a)


# ---------------------------------------------------------------------------
# witness search


def test_locally_different_needs_a_smooth_atlas():
    a = circle_atlas(k=4)
    f, g = family(a, {(0, 0, 0): 2}), zero_family(a)
    with pytest.raises(mu.MultiplicityError, match="smooth atlases"):
        mu.locally_different(f, g, a)


def test_locally_different_rejects_equal_sums():
    a = plane()
    base = {(c, i, j): 0 for c in range(2) for i in range(2)
            for j in range(2)}
    f = family(a, {**base, (0, 0, 1): "x1", (1, 0, 0): "x2"})
    g = family(a, {**base, (0, 1, 0): "x1", (1, 0, 0): "x2"})
    with pytest.raises(mu.MultiplicityError,
                       match="chart 'C', upper index 0"):
        mu.locally_different(f, g, a)


def test_witnesses_for_onesided_difference_cover_the_chart():
    a = smooth_circle()
    f = family(a, {(0, 0, 0): "2 + sin(x1) / 2"})
    w = mu.locally_different(f, zero_family(a), a)
    assert w.all_found
    for chart in ("A", "B"):
        box = w.witnesses[(chart, 0, 0, 0)]
        # nothing stops the growth, so the box reaches the chart image
        assert box == Box((0.0,), (TAU,))


def test_witness_boxes_avoid_sign_changes():
    a = smooth_circle()
    f = family(a, {(0, 0, 0): "sin(x1)"})
    w = mu.locally_different(f, zero_family(a), a)
    assert w.all_found
    for chart in ("A", "B"):
        box = w.witnesses[(chart, 0, 0, 0)]
        # growth must stop before the sign change at pi (the open box
        # may still abut the boundary zero of the chart image at 0)
        assert box.hi[0] < math.pi
        # independent strictness check on a fine grid
        pts, _ = box.midpoints(257)
        vals = np.sin(pts[:, 0])
        assert np.min(np.abs(vals)) > 1e-12
        assert np.all(vals > 0)


def test_identically_equal_coefficient_is_inconclusive():
    a = plane()
    base = {(c, i, j): 0 for c in range(2) for i in range(2)
            for j in range(2)}
    f = family(a, {**base, (0, 0, 0): "2 + x1", (1, 1, 1): "1 / 2"})
    g = zero_family(a)
    w = mu.locally_different(f, g, a)
    assert not w.all_found
    assert w.outcomes[("C", 0, 0, 0)] == "found"
    assert w.outcomes[("C", 0, 0, 1)] == "inconclusive"
    assert w.witnesses[("C", 0, 0, 1)] is None


def test_parallel_search_matches_serial():
    a = smooth_circle()
    f = family(a, {(0, 0, 0): "2 + sin(x1) / 2 + cos(x1)"})
    g = zero_family(a)
    serial = mu.locally_different(f, g, a)
    parallel = mu.locally_different(f, g, a, jobs=4)
    assert serial.witnesses == parallel.witnesses
    assert serial.outcomes == parallel.outcomes


# ---------------------------------------------------------------------------
# residual diagnostics


def test_residual_zero_for_realized_family():
    a = single_chart_atlas(lo=(0.0,), hi=(1.0,), k=4, name="C")
    chart = a.charts[0]
    loc = local_connection(chart, {(0, 0, 0): "sin(x1)"})
    omega = family(a, {(0, 0, 0): "sin(x1)"})
    rep = mu.residual({"C": loc}, identity_cs(), a, omega, grid=20)
    assert rep.worst == 0.0
    assert set(rep.values) == {("C", 0)}


def test_residual_measures_unrealized_targets():
    a = circle_atlas(k=4)
    flats = {c.name: flat_local(c) for c in a.charts}
    omega = family(a, {(0, 0, 0): 2})
    rep = mu.residual(flats, identity_cs(), a, omega, grid=16,
                      pou=build_partition(a, margin=0.5))
    # glued flat sums vanish identically, so the gap is the constant
    assert rep.worst == pytest.approx(2.0, abs=1e-12)
    assert all(v == pytest.approx(2.0, abs=1e-12)
               for v in rep.values.values())


def test_residual_checks_the_atlas():
    a, b = circle_atlas(k=4), circle_atlas(k=2)
    flats = {c.name: flat_local(c) for c in a.charts}
    omega = family(b, {(0, 0, 0): 2})
    with pytest.raises(mu.MultiplicityError, match="different atlas"):
        mu.residual(flats, identity_cs(), a, omega)
