"""Catamorphism elimination for constrained Horn clauses over ADTs."""
