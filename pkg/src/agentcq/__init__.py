"""Clarifying-question generation, filtering, user simulation, multi-judge
evaluation, question analysis, and retrieval-impact measurement for
conversational search."""

__version__ = "0.1.0"
