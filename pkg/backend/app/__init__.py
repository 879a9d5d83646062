"""Analytic discs attached to CR manifolds."""
