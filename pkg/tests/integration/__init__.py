"""
Integration tests for cqed-sim.

End-to-end runs of the CLI, long trajectories and full measurement traces.
"""
