"""Requirements extraction from app reviews via sequence tagging."""

__version__ = "0.1.0"
