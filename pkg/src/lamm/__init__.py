"""Learning automata with multiple-model reinforcement, plus a Monte Carlo benchmark harness."""

from lamm._jit import BACKEND

__version__ = "0.1.0"
