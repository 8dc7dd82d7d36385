"""nmq: non-Markovian cavity-QED dynamics, feedback and stability certificates.

Modules
-------
model      physical parameter bundles and validation
kernel     memory-kernel Riccati dynamics, closed forms, steady values
ltv        single-cavity mean-value systems (undriven and driven)
feedback   homodyne measurement feedback, deterministic and stochastic
lattice    coupled-cavity array and its stable/unstable split
stability  logarithmic norms, transition matrices, Lyapunov and BIBO probes
oracle     truncated-Fock density-matrix reference solver
numerics   steppers, seeded noise streams, ensemble statistics
cli        scenario files and the ``nmq`` command
"""
from ._accel import USE_NUMBA
from .errors import ConfigError, DivergenceError, NMQError, NumericalError

__version__ = "0.1.0"

__all__ = ["USE_NUMBA", "ConfigError", "DivergenceError", "NMQError", "NumericalError",
           "__version__"]
