"""Personalized CPAP mask interface design from a facial range scan."""
__version__ = "0.1.0"
