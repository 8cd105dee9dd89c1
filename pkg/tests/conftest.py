"""Shared builders: reference manifolds, structures, and expression corpus."""

import itertools
import math
from fractions import Fraction

import numpy as np

from regcalc import expr as ex
from regcalc.spaces import Box, Domain
from regcalc.atlas import Atlas, Chart, Transition, TransitionPiece
from regcalc.connective import identity_connective
from regcalc.connection import local_connection

PI = math.pi
TAU = 2 * math.pi
X1, X2 = ex.Var(1), ex.Var(2)


def frac(v) -> ex.Const:
    return ex.Const(Fraction(str(v)))


def half_turn_pieces():
    # (0, pi) shifts up, (pi, 2pi) shifts down; inverse of itself
    return (TransitionPiece(Box((0.0,), (PI,)), (ex.add(X1, PI),)),
            TransitionPiece(Box((PI,), (TAU,)), (ex.sub(X1, PI),)))


def circle_atlas(k=4) -> Atlas:
    """Two interval charts glued by half-turn shifts."""
    a = Chart("A", Domain.box((0.0,), (TAU,)))
    b = Chart("B", Domain.box((0.0,), (TAU,)))
    return Atlas((a, b), (Transition("A", "B", half_turn_pieces()),
                          Transition("B", "A", half_turn_pieces())), k)


def torus_atlas(k=4) -> Atlas:
    """Four square charts; transitions shift the axes whose labels differ."""
    names = ["AA", "AB", "BA", "BB"]
    charts = tuple(Chart(n, Domain.box((0.0, 0.0), (TAU, TAU)))
                   for n in names)

    def branches(shifted, var):
        if not shifted:
            return [((0.0, TAU), var)]
        return [((0.0, PI), ex.add(var, PI)), ((PI, TAU), ex.sub(var, PI))]

    transitions = []
    for src, dst in itertools.permutations(names, 2):
        pieces = []
        for b1, b2 in itertools.product(
                branches(src[0] != dst[0], X1),
                branches(src[1] != dst[1], X2)):
            (l1, h1), e1 = b1
            (l2, h2), e2 = b2
            pieces.append(TransitionPiece(Box((l1, l2), (h1, h2)), (e1, e2)))
        transitions.append(Transition(src, dst, tuple(pieces)))
    return Atlas(charts, tuple(transitions), k)


def single_chart_atlas(lo=(-1.0,), hi=(1.0,), k=math.inf,
                       name="C") -> Atlas:
    return Atlas((Chart(name, Domain.box(lo, hi)),), (), k)


def identity_tables(k=4, beta0=2):
    O = {"alpha": {i: i for i in range(k + 1)},
         "alpha0": {i: beta0 for i in range(k + 1)}}
    Q = {"beta": {i: i for i in range(k + 1)},
         "beta0": {i: beta0 for i in range(k + 1)},
         "shift": {i: beta0 - i for i in range(beta0 + 1)}}
    return O, Q


def identity_cs(k=4, beta0=2, j=0):
    O, Q = identity_tables(k, beta0)
    return identity_connective(O, Q, j)


def random_trig(rng) -> ex.Expr:
    c = [round(v, 3) for v in rng.uniform(-1.0, 1.0, 3)]
    return ex.add(ex.add(frac(c[0]), ex.mul(frac(c[1]), ex.sin(X1))),
                  ex.mul(frac(c[2]), ex.cos(X1)))


def random_circle_locals(a: Atlas, rng) -> dict:
    return {c.name: local_connection(c, {(0, 0, 0): random_trig(rng)})
            for c in a.charts}


# expression corpus with boxes on which every node is defined; used by
# the derivative oracle, the printer round trip, and the space checks
def expression_corpus():
    b1 = Box((0.2,), (2.0,))
    b2 = Box((0.2, 0.2), (1.8, 1.4))
    sym = Box((-3.0,), (3.0,))
    return [
        (frac(2.5), sym),
        (X1, sym),
        (ex.add(ex.mul(frac(3), X1), frac(1)), sym),
        (ex.sub(ex.mul(X1, X1), ex.mul(frac(2), X1)), sym),
        (ex.power(X1, 3), sym),
        (ex.power(X1, -2), b1),
        (ex.neg(ex.power(X1, 2)), sym),
        (ex.div(ex.add(X1, frac(1)), ex.add(ex.mul(X1, X1), frac(1))), sym),
        (ex.sin(X1), sym),
        (ex.cos(ex.mul(frac(3), X1)), sym),
        (ex.exp(ex.neg(ex.mul(X1, X1))), sym),
        (ex.log(ex.add(X1, frac(3.5))), sym),
        (ex.log(X1), b1),
        (ex.sqrt(ex.add(ex.mul(X1, X1), frac(1))), sym),
        (ex.mul(ex.sin(X1), ex.exp(ex.cos(X1))), sym),
        (ex.div(ex.sin(X1), ex.add(frac(2), ex.cos(X1))), sym),
        (ex.bump(ex.div(X1, frac(4)), 0), sym),
        (ex.bump(ex.div(X1, frac(4)), 2), sym),
        (ex.add(ex.mul(X1, ex.sin(X2)), ex.power(X2, 2)), b2),
        (ex.mul(ex.exp(ex.mul(frac(0.5), X1)), ex.cos(X2)), b2),
        (ex.log(ex.mul(X1, X2)), b2),
        (ex.sqrt(ex.add(X1, X2)), b2),
        (ex.div(X1, X2), b2),
    ]


def central_difference(e: ex.Expr, var: int, pts: np.ndarray,
                       h: float = 1e-4) -> np.ndarray:
    """Independent first-derivative oracle."""
    up, dn = pts.copy(), pts.copy()
    up[:, var - 1] += h
    dn[:, var - 1] -= h
    return (ex.evaluate_grid(e, up) - ex.evaluate_grid(e, dn)) / (2 * h)


def interior_points(box: Box, rng, count: int) -> np.ndarray:
    lo, hi = np.array(box.lo), np.array(box.hi)
    width = hi - lo
    # stay away from edges so difference stencils remain inside
    return rng.uniform(lo + 0.05 * width, hi - 0.05 * width,
                       size=(count, len(lo)))
