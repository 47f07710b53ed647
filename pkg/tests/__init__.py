"""Tests for the oodmetric project."""
