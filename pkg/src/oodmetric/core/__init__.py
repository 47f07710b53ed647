"""Geometry, matching and the extended confusion matrix."""
