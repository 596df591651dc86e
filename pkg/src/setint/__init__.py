"""Solver for finite sets with cardinality constraints and integer intervals."""
