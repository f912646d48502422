"""Exact workbench for graph C*-algebras and their gauge spectral triples."""

__version__ = "0.1.0"
