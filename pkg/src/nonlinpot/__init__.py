"""Nonlinear potentials, pointwise estimates and singular-solution constructions."""
