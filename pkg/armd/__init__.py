"""Almost-resonant modulated driving (ARMD) Rydberg blockade gates."""

__version__ = "0.1.0"
