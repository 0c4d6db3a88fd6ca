"""
Cavity-QED Spin-Ensemble Magnetometer Simulator

This package models an NV spin ensemble coupled to a microwave cavity read out in
reflection: linear spectroscopy, saturation and bistability, time-domain dynamics,
the spin-cooled noise floor, magnetic sensitivity, design-space maps and a
synthetic measurement chain.

**Version**: 0.1.0
**Python**: >=3.11
**Key Dependencies**: numpy, scipy, pydantic, contourpy, loguru
"""

__version__ = "0.1.0"

# Sub-packages
SUBPACKAGES = ["models", "physics", "utils", "cli"]

__all__ = [
    "__version__",
    "SUBPACKAGES",
]
