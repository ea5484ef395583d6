"""abc-torus - finite-stage approximation-by-conjugation maps of the 2-torus."""

__version__ = "0.1.0"
