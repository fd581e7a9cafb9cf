"""Composite finite element de Rham complexes with enhanced continuity, in exact arithmetic."""
