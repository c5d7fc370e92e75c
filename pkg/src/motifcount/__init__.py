"""Graphlet counting by color coding and adaptive treelet sampling."""

__version__ = "0.1.0"
