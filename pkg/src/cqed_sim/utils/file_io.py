"""File I/O utilities for simulation outputs.

Supports JSON, CSV and time-trace files. Floats written to CSV keep full double
precision (17 significant digits) so outputs can be diffed for regressions.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)


# ============================================================================
# JSON Functions
# ============================================================================


def _json_default(value: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers for json.dump."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def read_json(file_path: Union[str, Path]) -> Dict[str, Any]:
    """Read JSON file and return parsed dictionary.

    Args:
        file_path: Path to JSON file

    Returns:
        Parsed JSON as dictionary

    Raises:
        FileNotFoundError: If file doesn't exist
        json.JSONDecodeError: If file contains invalid JSON
    """
    file_path = Path(file_path)
    logger.debug(f"Reading JSON from {file_path}")

    with open(file_path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_json(
    data: Union[Dict[str, Any], List[Any]],
    file_path: Union[str, Path],
    indent: int = 2,
) -> None:
    """Write data to JSON file with pretty printing.

    Creates parent directories if they don't exist. numpy values are converted to
    plain Python types.

    Args:
        data: Data to write (dict or list)
        file_path: Path to output JSON file
        indent: Number of spaces for indentation (default: 2)
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)

    logger.debug(f"Writing JSON to {file_path}")

    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=indent, default=_json_default)

    logger.info(f"Wrote JSON to {file_path}")


# ============================================================================
# CSV Functions
# ============================================================================


def format_value(value: Any) -> str:
    """Format a CSV cell; floats keep 17 significant digits.

    Args:
        value: Cell value

    Returns:
        String representation

    Example:
        >>> format_value(0.1)
        '0.10000000000000001'
    """
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def read_csv(
    file_path: Union[str, Path], delimiter: str = ","
) -> List[Dict[str, str]]:
    """Read CSV file and return list of dictionaries.

    Args:
        file_path: Path to CSV file
        delimiter: Field delimiter (default: ',')

    Returns:
        List of dictionaries, one per row (header as keys)

    Raises:
        FileNotFoundError: If file doesn't exist
    """
    file_path = Path(file_path)
    logger.debug(f"Reading CSV from {file_path} (delimiter={repr(delimiter)})")

    with open(file_path, "r", encoding="utf-8") as f:
        rows = list(csv.DictReader(f, delimiter=delimiter))

    logger.info(f"Read {len(rows)} rows from {file_path}")
    return rows


def write_csv(
    data: Sequence[Dict[str, Any]],
    file_path: Union[str, Path],
    delimiter: str = ",",
) -> None:
    """Write list of dictionaries to CSV file.

    Creates parent directories if they don't exist.

    Args:
        data: Rows to write; the first row's keys define the header
        file_path: Path to output CSV file
        delimiter: Field delimiter (default: ',')

    Raises:
        ValueError: If data is empty
    """
    if not data:
        raise ValueError("Cannot write empty data to CSV")

    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)

    logger.debug(f"Writing CSV to {file_path} (delimiter={repr(delimiter)})")

    fieldnames = list(data[0].keys())

    with open(file_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, delimiter=delimiter)
        writer.writeheader()
        for row in data:
            writer.writerow({k: format_value(v) for k, v in row.items()})

    logger.info(f"Wrote {len(data)} rows to {file_path}")


# ============================================================================
# Time Traces
# ============================================================================


def write_trace(
    samples: np.ndarray, fs: float, file_path: Union[str, Path]
) -> None:
    """Write a sampled voltage trace.

    ``.npy`` paths store the raw float64 samples; any other suffix writes a CSV
    with columns t_s, v.

    Args:
        samples: Voltage samples (V)
        fs: Sample rate (Hz)
        file_path: Output path
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)

    if file_path.suffix == ".npy":
        np.save(file_path, np.asarray(samples, dtype=np.float64))
        logger.info(f"Wrote {len(samples)} samples to {file_path}")
        return

    t = np.arange(len(samples)) / fs
    write_csv(
        [{"t_s": ti, "v": vi} for ti, vi in zip(t.tolist(), samples.tolist())],
        file_path,
    )
