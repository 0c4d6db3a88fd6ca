"""Immutable value types shared by the physics modules."""
