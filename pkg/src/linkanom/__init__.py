"""Streaming anomaly detection on link streams with history-graph features."""

__version__ = "0.1.0"
