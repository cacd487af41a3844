"""Gaussian free field level-set percolation toolkit."""
__version__ = "0.1.0"
