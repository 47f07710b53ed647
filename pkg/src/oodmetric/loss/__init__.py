"""The Margin Entropy loss and its gradient check."""
