"""Federated unsupervised anomaly detection benchmark for tabular data."""

__version__ = "0.1.0"
