"""Heat-load forecasting with PSO-tuned kernel support vector regression."""

__version__ = "0.1.0"
