"""Super-form calculus on R^n: exact pointwise algebra, grid operators and weighted L2 solves."""

__version__ = "0.1.0"
