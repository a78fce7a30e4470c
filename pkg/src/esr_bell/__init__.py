"""Detection-level hidden-variable models and Bell inequalities."""

__version__ = "0.1.0"
