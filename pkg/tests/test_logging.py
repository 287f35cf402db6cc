"""Unit tests for logging functionality."""
import json
import logging
import sys

import pytest
from unittest.mock import Mock, patch

from armd.gates import GateReport
from armd.logging_conf import (
    HumanReadableFormatter, StructuredFormatter, TraceLogger, get_trace_logger, log_error,
    log_function_call, log_gate_report, log_restart_completed, log_search_completed,
    log_stage_execution, setup_logging,
)


def _record(**fields):
    base = {"name": "armd.test", "levelname": "INFO", "levelno": logging.INFO, "msg": "hello"}
    return logging.makeLogRecord({**base, **fields})


class TestLoggingConfiguration:
    """Test logging configuration and setup."""

    def test_setup_logging_idempotent(self):
        """Repeated setup keeps a single toolkit handler."""
        setup_logging()
        setup_logging()
        names = [h.get_name() for h in logging.getLogger().handlers]
        assert names.count("armd-console") == 1

    def test_get_trace_logger(self):
        """Test trace logger creation."""
        logger = get_trace_logger("test_logger")
        assert isinstance(logger, TraceLogger)
        assert logger.trace_id is not None

    def test_get_trace_logger_with_trace_id(self):
        """Test trace logger with provided trace ID."""
        logger = get_trace_logger("test_logger", "test-trace-123")
        assert logger.trace_id == "test-trace-123"


class TestStructuredFormatter:
    """Test structured JSON formatter."""

    def test_basic_fields(self):
        """Level, logger and message are always present."""
        entry = json.loads(StructuredFormatter().format(_record()))
        assert entry["level"] == "INFO"
        assert entry["logger"] == "armd.test"
        assert entry["message"] == "hello"

    def test_context_and_extra_fields(self):
        """Trace context and keyword extras become top-level keys."""
        entry = json.loads(StructuredFormatter().format(
            _record(trace_id="t-1", stage="simulate", objective=0.5, restart=2)
        ))
        assert entry["trace_id"] == "t-1"
        assert entry["stage"] == "simulate"
        assert entry["objective"] == 0.5
        assert entry["restart"] == 2

    def test_exception_info(self):
        """Exceptions are serialized with their type."""
        try:
            raise ValueError("boom")
        except ValueError:
            record = _record(exc_info=sys.exc_info())
        entry = json.loads(StructuredFormatter().format(record))
        assert entry["exception"]["type"] == "ValueError"


class TestHumanReadableFormatter:
    """Test human readable formatter."""

    def test_basic(self):
        result = HumanReadableFormatter().format(_record())
        assert result.startswith("[INFO] hello")

    def test_with_context(self):
        """Context and extras are appended in brackets."""
        result = HumanReadableFormatter().format(
            _record(trace_id="t-2", stage="optimize", latency_ms=12.5, status="success", restart=3)
        )
        assert "[trace_id=t-2]" in result
        assert "[stage=optimize]" in result
        assert "[latency=12.5ms]" in result
        assert "[status=success]" in result
        assert "[restart=3]" in result


class TestTraceLogger:
    """Test trace logger functionality."""

    def test_info_carries_trace_id(self):
        """Messages are logged with the trace ID in extra."""
        logger = TraceLogger("test", "trace-9")
        with patch.object(logger.logger, "log") as mock_log:
            logger.info("Test message", restart=1)
        level, message = mock_log.call_args[0]
        assert level == logging.INFO
        assert message == "Test message"
        assert mock_log.call_args[1]["extra"] == {"trace_id": "trace-9", "restart": 1}


class TestLoggingHelpers:
    """Test domain logging helpers."""

    @patch("armd.logging_conf.get_trace_logger")
    def test_stage_success(self, mock_get_logger):
        """Successful stages log start and completion."""
        mock_logger = Mock()
        mock_get_logger.return_value = mock_logger
        with log_stage_execution("simulate", scheme="bam_one_photon"):
            pass
        assert mock_logger.info.call_count == 2
        completed = mock_logger.info.call_args_list[1][1]
        assert completed["status"] == "success"
        assert completed["scheme"] == "bam_one_photon"
        assert "latency_ms" in completed

    @patch("armd.logging_conf.get_trace_logger")
    def test_stage_failure(self, mock_get_logger):
        """Failures are logged and re-raised."""
        mock_logger = Mock()
        mock_get_logger.return_value = mock_logger
        with pytest.raises(RuntimeError):
            with log_stage_execution("optimize"):
                raise RuntimeError("no convergence")
        kwargs = mock_logger.error.call_args[1]
        assert kwargs["status"] == "failed"
        assert kwargs["error_type"] == "RuntimeError"

    @patch("armd.logging_conf.get_trace_logger")
    def test_gate_report(self, mock_get_logger):
        """Gate reports log their error and conditional phase."""
        mock_logger = Mock()
        mock_get_logger.return_value = mock_logger
        report = GateReport(
            fidelity=0.99995, error=5e-5, conditional_phase_rad=3.14, phi_c=0.1, phi_t=0.2,
            leakage={"00": 0.0, "01": 0.0, "10": 0.0, "11": 1e-5}, raw_fidelity=0.9, raw_error=0.1,
        )
        log_gate_report("fig2", report)
        kwargs = mock_logger.info.call_args[1]
        assert kwargs["error"] == 5e-5
        assert kwargs["conditional_phase_rad"] == 3.14

    @patch("armd.logging_conf.get_trace_logger")
    def test_restart_completed(self, mock_get_logger):
        mock_logger = Mock()
        mock_get_logger.return_value = mock_logger
        log_restart_completed(4, 2e-3, 150)
        kwargs = mock_logger.info.call_args[1]
        assert kwargs["restart"] == 4
        assert kwargs["n_evals"] == 150

    @patch("armd.logging_conf.get_trace_logger")
    def test_search_completed_above_threshold_warns(self, mock_get_logger):
        """A search that misses its threshold logs a warning."""
        mock_logger = Mock()
        mock_get_logger.return_value = mock_logger
        log_search_completed(0.3, 0.3, False)
        mock_logger.warning.assert_called_once()
        assert mock_logger.warning.call_args[1]["status"] == "above_threshold"
        mock_logger.info.assert_not_called()

    @patch("armd.logging_conf.get_trace_logger")
    def test_log_error(self, mock_get_logger):
        mock_logger = Mock()
        mock_get_logger.return_value = mock_logger
        log_error(ValueError("bad pulse"), "simulate")
        kwargs = mock_logger.error.call_args[1]
        assert kwargs["error_type"] == "ValueError"
        assert kwargs["context"] == "simulate"

    @patch("armd.logging_conf.get_trace_logger")
    def test_function_call_decorator(self, mock_get_logger):
        """The decorator logs timing and passes the result through."""
        mock_logger = Mock()
        mock_get_logger.return_value = mock_logger

        @log_function_call("double")
        def double(x):
            return 2 * x

        assert double(21) == 42
        assert mock_logger.info.call_args[1]["status"] == "success"
