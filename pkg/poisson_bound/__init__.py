"""Poisson-equation bias bounds for MAP/GI/1 and M/GI/1-WCL queues."""

__version__ = "1.0.0"
