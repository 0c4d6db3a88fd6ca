"""
Shared utilities.

- file_io.py: JSON/CSV/trace reading and writing
- logging_config.py: loguru sink, stdlib intercept and stage timing
- parallel.py: ordered thread-pool map with a progress bar
"""

__all__ = [
    "file_io",
    "logging_config",
    "parallel",
]
