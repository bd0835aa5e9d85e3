"""Point-scatterer trace formula on the modular surface."""

__version__ = "0.1.0"
