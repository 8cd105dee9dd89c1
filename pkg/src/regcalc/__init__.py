"""Regularity calculus for glued affine connections on chart-described
manifolds.

Submodules:

- expr: symbolic expressions with exact differentiation
- index_algebra: partial product/combination tables on index sets
- spaces: numeric membership checks for classical function spaces
- atlas: charts, overlaps, transitions, partitions of unity
- connective: structures acting on coefficient functions
- connection: Christoffel data, coordinate change, gluing
- multiplicity: prescribed-tensor comparison and residuals
- cli: command line front end
"""

__version__ = "0.1.0"
