"""Corpus-to-graph toolkit: turn a directory of relational databases into a
weighted inter-database similarity graph with profiled node and edge
properties."""

__version__ = "0.1.0"
