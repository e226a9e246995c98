"""Classical and quantum simulators of stochastic processes: compression,
accuracy measures and maximum-likelihood learning."""

__version__ = "0.1.0"
