"""markov-bounds - certified lower bounds for stochastic optimal control."""

__version__ = "0.3.0"
__license__ = "MIT"
