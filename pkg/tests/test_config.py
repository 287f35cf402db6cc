"""Tests for environment-driven settings."""
import pytest
from pydantic import ValidationError

from armd.config import Settings


class TestSettings:
    """Test defaults and ARMD_ overrides."""

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("ARMD_DEFAULT_N_STEPS", raising=False)
        settings = Settings(_env_file=None)
        assert settings.default_n_steps == 4096
        assert settings.search_n_steps == 1024
        assert settings.integrator == "magnus4"
        assert settings.jump_epsilon == 0.01
        assert settings.error_threshold == 1e-4

    def test_environment_override(self, monkeypatch):
        """ARMD_-prefixed variables override defaults."""
        monkeypatch.setenv("ARMD_DEFAULT_N_STEPS", "2048")
        monkeypatch.setenv("ARMD_INTEGRATOR", "midpoint")
        settings = Settings(_env_file=None)
        assert settings.default_n_steps == 2048
        assert settings.integrator == "midpoint"

    def test_unknown_integrator_rejected(self, monkeypatch):
        monkeypatch.setenv("ARMD_INTEGRATOR", "euler")
        with pytest.raises(ValidationError):
            Settings(_env_file=None)
