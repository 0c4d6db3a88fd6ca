"""Unit tests for the thread-pool map and logging helpers."""

import logging

import pytest

from cqed_sim.utils.logging_config import simulation_stage_logger
from cqed_sim.utils.parallel import parallel_map, resolve_threads


class TestParallelMap:
    """Test ordering and error propagation of parallel_map."""

    def test_order_preserved_with_threads(self):
        items = list(range(50))
        assert parallel_map(lambda x: x * x, items, threads=4) == [x * x for x in items]

    def test_single_thread_path(self):
        assert parallel_map(str, [3, 1, 2], threads=1) == ["3", "1", "2"]

    def test_empty_input(self):
        assert parallel_map(lambda x: x, [], threads=2) == []

    def test_exception_propagates(self):
        def fail_on_three(x):
            if x == 3:
                raise RuntimeError("bad cell")
            return x

        with pytest.raises(RuntimeError, match="bad cell"):
            parallel_map(fail_on_three, list(range(6)), threads=3)

    def test_explicit_thread_count_wins(self):
        assert resolve_threads(5) == 5
        assert resolve_threads(None) >= 1


class TestStageLogger:
    """Test the simulation stage context manager."""

    def test_yields_named_logger(self):
        with simulation_stage_logger("unit_stage", cells=4) as stage_logger:
            assert isinstance(stage_logger, logging.Logger)
            assert stage_logger.name == "cqed_sim.unit_stage"

    def test_reraises_failures(self):
        with pytest.raises(ValueError):
            with simulation_stage_logger("failing_stage"):
                raise ValueError("boom")
