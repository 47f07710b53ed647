"""Records of detection datasets."""
