"""Deterministic builder for a grounded multilingual fact graph and its benchmark tasks."""

__version__ = "0.1.0"
TOOL_VERSION = f"factforge/{__version__}"
