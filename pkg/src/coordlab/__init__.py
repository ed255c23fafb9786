"""Coordination-coding laboratory for point-to-point discrete memoryless channels."""

__version__ = "0.1.0"
