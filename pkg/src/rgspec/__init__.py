"""Rely/guarantee specification commands with a finite trace semantics and
bounded refinement checking."""

__version__ = "0.1.0"
