"""Core-periphery typology: hub-and-spoke vs layered block models."""

__version__ = "0.1.0"
