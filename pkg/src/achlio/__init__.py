"""Achlioptas-style l-vertex random graph processes and their coagulation ODEs."""

__version__ = "0.1.0"
