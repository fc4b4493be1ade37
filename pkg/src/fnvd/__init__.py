"""Norm-violation detection: logistic model trees, taxonomy-backed explanations,
and a moderation workflow service."""

__version__ = "0.1.0"
