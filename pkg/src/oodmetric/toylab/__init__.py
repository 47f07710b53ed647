"""Synthetic experiments comparing cross-entropy training with ME training."""
