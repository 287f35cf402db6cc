"""Logging for simulations, searches and CLI runs: JSON records in production, one-line text otherwise."""
import json
import logging
import sys
import time
import traceback
import uuid
from contextlib import contextmanager
from datetime import datetime, timezone
from functools import wraps
from typing import Optional

from armd.config import settings


_CONTEXT_FIELDS = ("trace_id", "stage", "latency_ms", "status")
_RESERVED = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


def _extra_fields(record) -> dict:
    """Collect keyword context passed through ``extra``."""
    return {
        key: value for key, value in vars(record).items()
        if key not in _RESERVED and key not in _CONTEXT_FIELDS
    }


class StructuredFormatter(logging.Formatter):
    """JSON formatter used when app_env is production."""

    def format(self, record):
        """One JSON object per record."""
        log_entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        for key in _CONTEXT_FIELDS:
            if hasattr(record, key):
                log_entry[key] = getattr(record, key)

        log_entry.update(_extra_fields(record))

        if record.exc_info:
            log_entry["exception"] = {
                "type": record.exc_info[0].__name__,
                "message": str(record.exc_info[1]),
                "traceback": traceback.format_exception(*record.exc_info),
            }

        return json.dumps(log_entry, default=str)


class HumanReadableFormatter(logging.Formatter):
    """Text formatter for terminals."""

    def format(self, record):
        """[LEVEL] message followed by bracketed context."""
        formatted = f"[{record.levelname}] {record.getMessage()}"

        if hasattr(record, "trace_id"):
            formatted += f" [trace_id={record.trace_id}]"
        if hasattr(record, "stage"):
            formatted += f" [stage={record.stage}]"
        if hasattr(record, "latency_ms"):
            formatted += f" [latency={record.latency_ms}ms]"
        if hasattr(record, "status"):
            formatted += f" [status={record.status}]"

        for key, value in _extra_fields(record).items():
            formatted += f" [{key}={value}]"

        return formatted


class TraceLogger:
    """Named logger that stamps every record with a run trace_id."""

    def __init__(self, name: str, trace_id: Optional[str] = None):
        self.logger = logging.getLogger(name)
        self.trace_id = trace_id or str(uuid.uuid4())

    def _log_with_context(self, level: int, message: str, **kwargs):
        extra = {"trace_id": self.trace_id, **kwargs}
        self.logger.log(level, message, extra=extra)

    def debug(self, message: str, **kwargs):
        self._log_with_context(logging.DEBUG, message, **kwargs)

    def info(self, message: str, **kwargs):
        self._log_with_context(logging.INFO, message, **kwargs)

    def warning(self, message: str, **kwargs):
        self._log_with_context(logging.WARNING, message, **kwargs)

    def error(self, message: str, **kwargs):
        self._log_with_context(logging.ERROR, message, **kwargs)

    def exception(self, message: str, **kwargs):
        """Log exception with traceback."""
        extra = {"trace_id": self.trace_id, **kwargs}
        self.logger.exception(message, extra=extra)


_HANDLER_NAME = "armd-console"


def setup_logging():
    """Configure toolkit logging on standard error."""
    if settings.app_env == "production":
        formatter = StructuredFormatter()
    else:
        formatter = HumanReadableFormatter()

    root_logger = logging.getLogger()
    for handler in list(root_logger.handlers):
        if handler.get_name() == _HANDLER_NAME:
            root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.set_name(_HANDLER_NAME)
    console_handler.setFormatter(formatter)

    root_logger.setLevel(getattr(logging, settings.log_level.upper()))
    root_logger.addHandler(console_handler)

    logging.getLogger("armd").setLevel(getattr(logging, settings.log_level.upper()))

    logging.getLogger("armd").debug("Logging configured", extra={
        "app_env": settings.app_env,
        "log_level": settings.log_level,
    })


def get_trace_logger(name: str, trace_id: Optional[str] = None) -> TraceLogger:
    """Get a logger with trace ID support."""
    return TraceLogger(name, trace_id)


@contextmanager
def log_stage_execution(stage: str, trace_id: Optional[str] = None, **context):
    """Context manager for logging a pipeline stage with timing."""
    logger = get_trace_logger(f"armd.stage.{stage}", trace_id)
    start_time = time.time()

    try:
        logger.info(f"Starting {stage}", stage=stage, status="started", **context)
        yield logger
        latency_ms = (time.time() - start_time) * 1000
        logger.info(f"Completed {stage}",
                    stage=stage,
                    status="success",
                    latency_ms=round(latency_ms, 2),
                    **context)
    except Exception as e:
        latency_ms = (time.time() - start_time) * 1000
        logger.error(f"Failed {stage}: {str(e)}",
                     stage=stage,
                     status="failed",
                     latency_ms=round(latency_ms, 2),
                     error_type=type(e).__name__,
                     **context)
        raise


def log_gate_report(label: str, report, trace_id: Optional[str] = None, **context):
    """Log the headline numbers of a gate report."""
    logger = get_trace_logger("armd.gates", trace_id)
    logger.info(f"Gate report for {label}: error={report.error:.3e}",
                error=report.error,
                conditional_phase_rad=report.conditional_phase_rad,
                status="scored",
                **context)


def log_restart_completed(restart: int, objective: float, n_evals: int,
                          trace_id: Optional[str] = None, **context):
    """Log one finished optimizer restart."""
    logger = get_trace_logger("armd.optimize", trace_id)
    logger.info(f"Restart {restart} finished: objective={objective:.3e}",
                restart=restart,
                objective=objective,
                n_evals=n_evals,
                status="restart_done",
                **context)


def log_search_completed(objective: float, error: float, reached: bool,
                         trace_id: Optional[str] = None, **context):
    """Log the outcome of a full search."""
    logger = get_trace_logger("armd.optimize", trace_id)
    level_method = logger.info if reached else logger.warning
    level_method(f"Search finished: verified error={error:.3e}",
                 objective=objective,
                 error=error,
                 status="success" if reached else "above_threshold",
                 **context)


def log_error(error: Exception, context: str, trace_id: Optional[str] = None, **extra_context):
    """Log error with context."""
    logger = get_trace_logger("armd.error", trace_id)
    logger.error(f"Error in {context}: {str(error)}",
                 error_type=type(error).__name__,
                 error_message=str(error),
                 context=context,
                 status="error",
                 **extra_context)


def log_function_call(func_name: str, trace_id: Optional[str] = None):
    """Decorator to log function calls with timing."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            logger = get_trace_logger(f"armd.function.{func_name}", trace_id)
            start_time = time.time()

            try:
                logger.info(f"Calling {func_name}", function=func_name, status="started")
                result = func(*args, **kwargs)
                latency_ms = (time.time() - start_time) * 1000
                logger.info(f"Completed {func_name}",
                            function=func_name,
                            status="success",
                            latency_ms=round(latency_ms, 2))
                return result
            except Exception as e:
                latency_ms = (time.time() - start_time) * 1000
                logger.error(f"Failed {func_name}: {str(e)}",
                             function=func_name,
                             status="failed",
                             latency_ms=round(latency_ms, 2),
                             error_type=type(e).__name__)
                raise
        return wrapper
    return decorator
