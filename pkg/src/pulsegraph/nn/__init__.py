"""Numpy network layers, model assembly, gradient checking and training."""
