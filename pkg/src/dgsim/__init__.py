"""Agent-based simulator and evaluation toolkit for text-attributed dynamic graphs."""

__version__ = "0.1.0"
