"""stochadjoint - Discrete stochastic integrals, their adjoints and the classical inequalities."""

__version__ = "0.1.0"
