"""Traffic, coverage and mobility predictors for carrier traffic steering."""

__version__ = "0.1.0"
