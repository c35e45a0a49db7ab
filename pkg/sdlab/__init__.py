"""sdlab: numerical laboratory for singular semilinear elliptic problems."""
__version__ = "0.1.0"
