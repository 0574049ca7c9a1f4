"""Finite-size key lengths for prepare-and-measure QKD from entropy accumulation."""

__version__ = "0.1.0"
