"""Stage-based simulation of reductions between equivalence relations on c.e. sets."""

__version__ = "0.1.0"
