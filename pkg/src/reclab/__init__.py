"""Exact computational laboratory for recurrence sets and torus harmonics.

Everything that can be exact is exact: torus points carry Fraction
coordinates, set memberships are integer decisions, and measures are
rational numbers.  Floating point only enters where a quantity is
genuinely transcendental (Fourier magnitudes, equidistribution gaps),
and every such value is checked against an independent oracle in the
test suite.
"""

__version__ = "0.1.0"
