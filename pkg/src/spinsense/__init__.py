"""Monte Carlo energy-resolution limits for dipolar-coupled spin ensembles."""

__version__ = "0.1.0"
