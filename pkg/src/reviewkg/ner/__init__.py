"""Sequence labeling for entity extraction: feature templates, the
linear-chain CRF, and the review-level extraction pipeline."""
