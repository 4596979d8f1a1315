"""Interface conductivity of 2D continuum Hamiltonians.

Bulk invariants of the symbol (zero counting, Gauss-map degree, winding and a
resolvent integral) are compared with a filtered spectral trace of the
operator discretized on a periodic lattice.
"""
__version__ = "0.1.0"
