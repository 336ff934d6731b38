"""Black-box modelling of time-varying audio effects."""

__version__ = "0.1.0"
