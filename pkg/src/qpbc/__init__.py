"""qpbc: quadratic programming bounds and branch and cut.

Affine-multiplier semidefinite lower bounds for quadratic programs over
polytopes, their moment relaxations and exactness certificates, and a
branch-and-cut solver for concave quadratic minimization built on them.
"""

__version__ = "0.1.0"
