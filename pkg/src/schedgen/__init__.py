"""Scheduling and code generation for layer DAGs on homogeneous multicores."""

__version__ = "0.1.0"
