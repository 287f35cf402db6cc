"""Pydantic models for the JSON documents read and written by the toolkit."""
import math
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from armd.model import Scheme
from armd.pulse import WaveformKind


SCHEMA_VERSION = 1


def _decimal_string(value: Any) -> str:
    """Accept a decimal string (or a plain number) and keep its text."""
    if isinstance(value, bool):
        raise ValueError("expected a decimal number, got a boolean")
    if isinstance(value, (int, float)):
        value = repr(float(value))
    if not isinstance(value, str):
        raise ValueError("expected a decimal string")
    text = value.strip()
    try:
        number = float(text)
    except ValueError:
        raise ValueError(f"'{value}' is not a decimal number")
    if not math.isfinite(number):
        raise ValueError(f"'{value}' is not finite")
    return text


DecimalString = Annotated[str, BeforeValidator(_decimal_string)]


def decimal(value: float) -> str:
    """Shortest decimal text that reads back to the same float."""
    return repr(float(value))


# =============================================================================
# PULSE DOCUMENT
# =============================================================================

class BlockadeSpec(BaseModel):
    """Finite blockade strength."""
    model_config = ConfigDict(extra="forbid")

    b_2pi_MHz: DecimalString = Field(description="Blockade B in 2pi x MHz")


class PulseSpec(BaseModel):
    """One named pulse."""
    model_config = ConfigDict(extra="forbid")

    kind: WaveformKind = Field(description="modulated or constant")
    coefficients: Optional[List[DecimalString]] = Field(description="[a_0, ..., a_N]", default=None)
    constant_2pi_MHz: Optional[DecimalString] = Field(description="Constant value in 2pi x MHz", default=None)

    @model_validator(mode="after")
    def _check_payload(self):
        if self.kind == WaveformKind.MODULATED:
            if not self.coefficients:
                raise ValueError("modulated pulse needs 'coefficients'")
            if self.constant_2pi_MHz is not None:
                raise ValueError("modulated pulse must not carry 'constant_2pi_MHz'")
        else:
            if self.constant_2pi_MHz is None:
                raise ValueError("constant pulse needs 'constant_2pi_MHz'")
            if self.coefficients is not None:
                raise ValueError("constant pulse must not carry 'coefficients'")
        return self


class PulseDocument(BaseModel):
    """Gate configuration plus pulses, as stored on disk."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    schema_version: Literal[1] = Field(description="Document schema version")
    scheme: Scheme = Field(description="Gate scheme")
    tau_us: DecimalString = Field(description="Reference period tau in us")
    duration_us: DecimalString = Field(description="Gate duration T in us")
    n_harmonics: int = Field(description="Number of harmonics N", ge=0)
    delta_2pi_MHz: Optional[DecimalString] = Field(description="One-photon detuning", default=None)
    rydberg_detuning_2pi_MHz: Optional[DecimalString] = Field(
        description="Uniform ground-Rydberg detuning", default=None)
    blockade: Union[Literal["infinite"], BlockadeSpec] = Field(
        description="'infinite' or a finite blockade", default="infinite")
    pulses: Dict[str, PulseSpec] = Field(description="Pulse name -> pulse", min_length=1)
    wiring: Optional[Dict[str, str]] = Field(description="Coupling role -> pulse name", default=None)

    @model_validator(mode="after")
    def _check_harmonics(self):
        for name, spec in self.pulses.items():
            if spec.kind == WaveformKind.MODULATED and len(spec.coefficients) != self.n_harmonics + 1:
                raise ValueError(
                    f"pulse '{name}' has {len(spec.coefficients)} coefficients, "
                    f"expected n_harmonics + 1 = {self.n_harmonics + 1}"
                )
        return self


# =============================================================================
# OPTIMIZATION DOCUMENTS
# =============================================================================

class ProblemDocument(PulseDocument):
    """Pulse document plus search settings."""
    algorithm: Literal["nelder-mead", "differential-evolution"] = Field(
        description="Search algorithm", default="nelder-mead")
    max_evals: int = Field(description="Objective evaluations per restart", default=20000, ge=0)
    n_restarts: int = Field(description="Independent restarts", default=10, ge=1)
    seed: int = Field(description="Root seed", default=0, ge=0)
    bounds: Optional[Tuple[DecimalString, DecimalString]] = Field(
        description="Per-coefficient box [low, high]", default=None)
    enforce_zero_endpoints: bool = Field(description="Search a_1..a_N with a_0 = -2 sum a_n", default=False)
    boundary_weight: DecimalString = Field(
        description="Weight of the boundary penalty", default="0.001", alias="lambda")
    bounds_policy: Literal["clip", "reject"] = Field(description="Out-of-box candidates", default="clip")
    free_pulses: Optional[List[str]] = Field(description="Pulses to search (default: all modulated)", default=None)
    warm_start: bool = Field(description="Start restart 0 from the document's coefficients", default=False)
    threshold: Optional[DecimalString] = Field(
        description="Target gate error (default: the ARMD_ERROR_THRESHOLD setting)", default=None)


class HistoryPoint(BaseModel):
    """Running-minimum improvement."""
    evaluation: int
    objective: float


class ResultDocument(BaseModel):
    """Optimization outcome with the best pulse file embedded."""
    schema_version: Literal[1] = SCHEMA_VERSION
    algorithm: str
    seed: int
    restarts_used: int
    best_restart: int
    n_evals: int
    best_objective: float
    search_error: float
    verification_gap: float
    threshold: float
    reached_threshold: bool
    report: Dict[str, Any]
    history: List[HistoryPoint]
    pulse_file: PulseDocument
