"""Forecasting for regions without observations via selective sub-graph
masking and graph contrastive learning."""

__version__ = "0.1.0"
