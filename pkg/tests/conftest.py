"""Shared device fixtures: the characterized reference device and a bistable variant."""

import pytest

from cqed_sim.config import RunConfig
from cqed_sim.models.device import TWO_PI
from cqed_sim.models.noise import NoiseEnvironment


@pytest.fixture
def reference_config():
    """Default run configuration (reference device at -18 dBm)."""
    return RunConfig()


@pytest.fixture
def cavity(reference_config):
    return reference_config.cavity_params()


@pytest.fixture
def spins(reference_config):
    return reference_config.spin_params()


@pytest.fixture
def env():
    return NoiseEnvironment()


@pytest.fixture
def single_line_spins(spins):
    """Reference ensemble with only the resonant hyperfine line."""
    return spins.with_updates(n_hyperfine=1)


@pytest.fixture
def bistable_spins(spins):
    """Narrow single line without thermalization: cooperativity far above threshold."""
    return spins.with_updates(gamma_inh=TWO_PI * 1e3, gamma_0=0.0, n_hyperfine=1)
