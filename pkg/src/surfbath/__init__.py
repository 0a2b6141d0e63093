"""Surface-code fidelity under a correlated bosonic bath.

Geometry lives in ``lattice`` and bath physics in ``bath``.  Exact sums over
the constrained configurations are in ``spinmodel``, the critical-coupling
machinery in ``cam``, and the command-line driver in ``cli``.
"""

__version__ = "0.1.0"
