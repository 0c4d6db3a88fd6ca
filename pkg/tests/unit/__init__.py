"""
Unit tests for cqed-sim.
"""
