"""Hierarchical garment color naming: palette extraction, Berlin-Kay/CSS
naming, constrained LAB prediction, and evaluation metrics."""

__version__ = "0.1.0"
