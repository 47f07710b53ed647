"""Metrics computed from matched detections."""
