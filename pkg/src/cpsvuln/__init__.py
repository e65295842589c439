"""Model-driven vulnerability assessment for cyber-physical systems."""

__version__ = "0.1.0"
