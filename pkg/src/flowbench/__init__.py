"""Desk-scale 2D flow/heat benchmark generation and evaluation toolkit."""

__version__ = "0.1.0"
