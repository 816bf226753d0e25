"""Benchmark generation and evaluation: splits, KGC, MKQA and MFC."""
from .splits import Split, SplitAssignment, assign_split

__all__ = ["Split", "SplitAssignment", "assign_split"]
