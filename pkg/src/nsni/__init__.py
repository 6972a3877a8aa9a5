"""First-order nonlinear interference model for WDM coherent links."""

__version__ = "0.1.0"
