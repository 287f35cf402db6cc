"""Truncated-Fourier Rabi-frequency waveforms.

A modulated waveform with real coefficients ``[a_0, ..., a_N]`` and reference
time ``tau`` evaluates to::

    f(t) = 2pi * (a_0 + sum_n 2 a_n cos(2 pi n t / tau)) / (2N + 1)   [rad/us]

i.e. the coefficients are in MHz and the 2pi turns them into angular
frequency. A constant waveform holds one value in 2pi x MHz.
"""
import math
from enum import Enum
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from armd.exceptions import NotApplicableError


TWO_PI = 2.0 * math.pi
DEFAULT_TAU_US = 0.25


class WaveformKind(str, Enum):
    """Waveform family."""
    MODULATED = "modulated"
    CONSTANT = "constant"


class Waveform(BaseModel):
    """One Rabi-frequency envelope."""
    model_config = ConfigDict(frozen=True)

    kind: WaveformKind = Field(description="Waveform family")
    coefficients: Tuple[float, ...] = Field(description="[a_0, ..., a_N] in MHz", default=())
    tau_us: float = Field(description="Reference period tau in us", default=DEFAULT_TAU_US, gt=0)
    constant_2pi_mhz: Optional[float] = Field(description="Constant value in 2pi x MHz", default=None)

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == WaveformKind.MODULATED:
            if not self.coefficients:
                raise ValueError("a modulated waveform needs at least a_0")
            if not all(math.isfinite(a) for a in self.coefficients):
                raise ValueError("waveform coefficients must be finite")
            if self.constant_2pi_mhz is not None:
                raise ValueError("a modulated waveform carries no constant value")
        else:
            if self.constant_2pi_mhz is None or not math.isfinite(self.constant_2pi_mhz):
                raise ValueError("a constant waveform needs a finite constant_2pi_mhz")
            if self.coefficients:
                raise ValueError("a constant waveform carries no coefficients")
        return self

    @classmethod
    def modulated(cls, coefficients: Sequence[float], tau_us: float = DEFAULT_TAU_US) -> "Waveform":
        return cls(kind=WaveformKind.MODULATED,
                   coefficients=tuple(float(a) for a in coefficients),
                   tau_us=tau_us)

    @classmethod
    def constant(cls, value_2pi_mhz: float, tau_us: float = DEFAULT_TAU_US) -> "Waveform":
        return cls(kind=WaveformKind.CONSTANT, constant_2pi_mhz=float(value_2pi_mhz), tau_us=tau_us)

    @property
    def n_harmonics(self) -> int:
        return max(len(self.coefficients) - 1, 0)

    @property
    def value(self) -> Optional[float]:
        """Constant value in rad/us."""
        if self.constant_2pi_mhz is None:
            return None
        return TWO_PI * self.constant_2pi_mhz


# Pulse name -> waveform; names are unique by construction.
PulseSet = Dict[str, Waveform]


def eval_waveform(w: Waveform, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Value of ``w`` at time(s) ``t`` in rad/us."""
    t_arr = np.asarray(t, dtype=float)
    if w.kind == WaveformKind.CONSTANT:
        result = np.full(t_arr.shape, w.value)
    else:
        a = np.asarray(w.coefficients)
        n = np.arange(1, a.size)
        phases = TWO_PI * np.multiply.outer(t_arr, n) / w.tau_us
        series = a[0] + 2.0 * np.cos(phases) @ a[1:]
        result = TWO_PI * series / (2 * w.n_harmonics + 1)
    if np.ndim(t) == 0:
        return float(result)
    return result


def boundary_residual(w: Waveform) -> float:
    """|a_0 + 2 sum a_n|, proportional to |f(0)| = |f(tau)|."""
    if w.kind != WaveformKind.MODULATED:
        raise NotApplicableError("boundary residual is defined for modulated waveforms only")
    a = w.coefficients
    return abs(a[0] + 2.0 * math.fsum(a[1:]))


def zero_endpoint_reparam(free: Sequence[float], tau_us: float, n_harmonics: int) -> Waveform:
    """Waveform from [a_1..a_N] with a_0 = -2 sum a_n, so f(0) = f(tau) = 0."""
    if len(free) != n_harmonics:
        raise ValueError(f"expected {n_harmonics} free coefficients, got {len(free)}")
    tail = [float(a) for a in free]
    a0 = -2.0 * math.fsum(tail)
    return Waveform.modulated([a0] + tail, tau_us)


# =============================================================================
# WAVEFORM METRICS
# =============================================================================

def pulse_area(w: Waveform, duration_us: float) -> float:
    """Closed-form integral of f over [0, T] in radians."""
    if w.kind == WaveformKind.CONSTANT:
        return w.value * duration_us
    a = w.coefficients
    total = a[0] * duration_us
    for n, a_n in enumerate(a[1:], start=1):
        total += a_n * w.tau_us / (math.pi * n) * math.sin(TWO_PI * n * duration_us / w.tau_us)
    return TWO_PI * total / (2 * w.n_harmonics + 1)


def peak_amplitude(w: Waveform, duration_us: float, n_samples: int = 2001) -> float:
    """Largest |f(t)| on [0, T], in 2pi x MHz."""
    times = np.linspace(0.0, duration_us, n_samples)
    return float(np.max(np.abs(eval_waveform(w, times)))) / TWO_PI


def waveform_metrics(pulses: Mapping[str, Waveform], duration_us: float) -> Dict[str, Dict[str, float]]:
    """Area, peak and boundary residual of every pulse."""
    metrics = {}
    for name, w in pulses.items():
        entry = {
            "area_rad": pulse_area(w, duration_us),
            "peak_2pi_MHz": peak_amplitude(w, duration_us),
        }
        if w.kind == WaveformKind.MODULATED:
            entry["boundary_residual"] = boundary_residual(w)
        metrics[name] = entry
    return metrics
