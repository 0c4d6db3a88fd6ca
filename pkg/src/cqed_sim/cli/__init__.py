"""Command-line entry point."""

__all__ = []
