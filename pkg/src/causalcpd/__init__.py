"""Change point detection in the causal mechanisms of discrete multivariate time series."""

__version__ = "0.1.0"
