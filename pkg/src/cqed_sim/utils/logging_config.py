"""Logging configuration for the simulator.

Standard-library loggers (one per module, ``logging.getLogger(__name__)``) are routed
into loguru, which owns the actual sinks. JSON output uses loguru's serializer.
"""

import inspect
import logging
import sys
from contextlib import contextmanager
from datetime import datetime
from datetime import timezone
from pathlib import Path
from typing import Optional, Union

from loguru import logger as loguru_logger

from constants import LOG_FORMAT

UTC = timezone.utc


class InterceptHandler(logging.Handler):
    """Forward standard logging records to loguru, keeping ``extra`` context."""

    def emit(self, record: logging.LogRecord) -> None:
        # Get corresponding Loguru level if it exists.
        try:
            level: Union[str, int] = loguru_logger.level(record.levelname).name
        except ValueError:
            level = record.levelno

        # Find caller from where originated the logged message.
        frame, depth = inspect.currentframe(), 0
        while frame:
            filename = frame.f_code.co_filename
            is_logging = filename == logging.__file__
            is_frozen = "importlib" in filename and "_bootstrap" in filename
            if depth > 0 and not (is_logging or is_frozen):
                break
            frame = frame.f_back
            depth += 1

        context = {
            k: v for k, v in record.__dict__.items() if k not in _STANDARD_ATTRS
        }
        loguru_logger.bind(logger_name=record.name, **context).opt(
            depth=depth, exception=record.exc_info
        ).log(level, record.getMessage())


_STANDARD_ATTRS = set(
    logging.LogRecord("", 0, "", 0, "", None, None).__dict__.keys()
) | {"message", "asctime", "taskName"}


def configure_logging(
    level: Union[str, int] = logging.INFO,
    log_file: Optional[Union[str, Path]] = None,
    json_format: Optional[bool] = None,
    console_output: bool = True,
) -> None:
    """Configure logging for cqed_sim.

    Args:
        level: Logging level name or number (default: INFO)
        log_file: Optional file path for log output (default: None = console only)
        json_format: Serialize records as JSON; None falls back to LOG_FORMAT=json
        console_output: If True, log to stderr (default: True)

    Example:
        >>> configure_logging(level="DEBUG", log_file="logs/run.log", json_format=True)
    """
    if isinstance(level, int):
        level = logging.getLevelName(level)
    if json_format is None:
        json_format = LOG_FORMAT == "json"

    loguru_logger.remove()

    if console_output:
        loguru_logger.add(
            sys.stderr,
            level=level,
            backtrace=True,
            diagnose=False,
            serialize=json_format,
        )

    if log_file:
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        loguru_logger.add(
            str(log_file),
            level=level,
            backtrace=True,
            diagnose=False,
            serialize=json_format,
            encoding="utf-8",
        )

    logging.basicConfig(handlers=[InterceptHandler()], level=0, force=True)

    logging.getLogger(__name__).info(
        f"Logging configured: level={level}, json_format={json_format}"
    )


@contextmanager
def simulation_stage_logger(stage_name: str, **context):
    """Context manager for logging a long-running simulation stage.

    Logs entry and exit of the stage with timing information.

    Args:
        stage_name: Name of the stage (e.g. "design_map", "hysteresis_sweep")
        **context: Additional context fields to include in logs

    Yields:
        Logger instance for the stage

    Example:
        >>> with simulation_stage_logger("design_map", cells=400) as logger:
        ...     logger.info("Evaluating cells")
    """
    logger = logging.getLogger(f"cqed_sim.{stage_name}")

    start_time = datetime.now(UTC)
    logger.info(
        f"Starting stage: {stage_name}",
        extra={"stage": stage_name, "status": "started", **context},
    )

    try:
        yield logger

        duration_ms = (datetime.now(UTC) - start_time).total_seconds() * 1000
        logger.info(
            f"Completed stage: {stage_name}",
            extra={
                "stage": stage_name,
                "status": "completed",
                "duration_ms": round(duration_ms, 2),
                **context,
            },
        )

    except Exception as e:
        duration_ms = (datetime.now(UTC) - start_time).total_seconds() * 1000
        logger.error(
            f"Failed stage: {stage_name}",
            extra={
                "stage": stage_name,
                "status": "failed",
                "duration_ms": round(duration_ms, 2),
                "error": str(e)[:200],
                **context,
            },
            exc_info=True,
        )
        raise

