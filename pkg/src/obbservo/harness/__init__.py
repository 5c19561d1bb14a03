"""Experiment protocol: robot profiles, initial-error grids, metrics and suite outputs."""
