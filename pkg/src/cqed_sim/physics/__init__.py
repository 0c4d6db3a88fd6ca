"""
Numerical operations of the simulator.

- linear_response.py: weak-drive reflection, polaritons and spectral dips
- nonlinear.py: saturable steady states, branches, bistability and saturation
- dynamics.py: binned equations of motion, adaptive integration, hysteresis
- noise.py: bath fractions, thermal and phase noise, spin cooling
- sensitivity.py: signal, η and operating-point optimization
- design.py: diamond and cavity design maps
- measurement.py: trace synthesis, Welch spectra and field recovery
"""

__all__ = [
    "linear_response",
    "nonlinear",
    "dynamics",
    "noise",
    "sensitivity",
    "design",
    "measurement",
]
