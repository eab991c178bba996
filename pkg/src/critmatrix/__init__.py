"""Fault-criticality workbench for collaborating cyber-physical systems."""

__version__ = "0.1.0"
