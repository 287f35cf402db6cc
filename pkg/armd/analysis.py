"""Diagnostics of simulated gates: phase jumps, phase origin, adiabatic spectra
and robustness scans."""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy.integrate import trapezoid

from armd.config import settings
from armd.dynamics import TrajectoryRecord, evolve_state
from armd.exceptions import DecompositionUndefinedError, InvalidInputError
from armd.gates import GateReport, gate_report
from armd.model import GateConfiguration, HamiltonianModel, StateSpace
from armd.pulse import TWO_PI, PulseSet


logger = logging.getLogger(__name__)


def wrap_angle(x):
    """Reduce to (-pi, pi]."""
    return x - TWO_PI * np.ceil((x - np.pi) / TWO_PI)


# =============================================================================
# PHASE JUMPS
# =============================================================================

class PhaseJump(BaseModel):
    """Phase discontinuity across a population dip."""
    time_us: float = Field(description="Time of the population minimum inside the dip")
    jump_rad: float = Field(description="Phase change across the dip, in (-pi, pi]")
    min_population: float = Field(description="Smallest population inside the dip")


def _low_runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """Inclusive [start, end] index ranges where mask is True."""
    padded = np.concatenate([[False], mask, [False]]).astype(int)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def detect_phase_jumps(traj: TrajectoryRecord, state_label: str,
                       epsilon: Optional[float] = None) -> List[PhaseJump]:
    """Interior population dips of one state and the phase change across each."""
    epsilon = traj.jump_epsilon if epsilon is None else epsilon
    populations = traj.population(state_label)
    phases = traj.phase(state_label)
    last = populations.size - 1

    jumps = []
    for start, end in _low_runs(populations < epsilon):
        if start == 0 or end == last:
            continue
        deepest = start + int(np.argmin(populations[start:end + 1]))
        jumps.append(PhaseJump(
            time_us=float(traj.times[deepest]),
            jump_rad=float(wrap_angle(phases[end + 1] - phases[start - 1])),
            min_population=float(populations[deepest]),
        ))
    return jumps


# =============================================================================
# PHASE ORIGIN
# =============================================================================

class PhaseDecomposition(BaseModel):
    """Total phase of the returning state split into dynamical and geometric parts."""
    total_phase_rad: float
    dynamical_phase_rad: float
    geometric_phase_rad: float
    total_phase_mod_2pi: float
    geometric_phase_mod_2pi: float
    dynamical_fraction: Optional[float] = Field(
        description="|dynamical| / |total|; null when the total phase is zero", default=None)
    final_population: float


def _check_grid(traj: TrajectoryRecord, config: GateConfiguration, space: StateSpace):
    if traj.labels != space.names:
        raise InvalidInputError("trajectory states do not match the configuration's state space")
    if abs(traj.times[0]) > 1e-12 or abs(traj.times[-1] - config.duration_us) > 1e-9 * config.duration_us:
        raise InvalidInputError(
            f"trajectory spans [{traj.times[0]}, {traj.times[-1]}] us, gate duration is {config.duration_us} us"
        )


def _energies(traj: TrajectoryRecord, model: HamiltonianModel, pulses: PulseSet) -> np.ndarray:
    """<psi(t)|H(t)|psi(t)> at every sample."""
    hamiltonians = model.stack(pulses, traj.times)
    psi = traj.amplitudes
    return np.einsum("ti,tij,tj->t", np.conj(psi), hamiltonians, psi).real


def dynamical_phase(traj: TrajectoryRecord, config: GateConfiguration, pulses: PulseSet) -> PhaseDecomposition:
    """theta_d = -integral <psi|H|psi> dt, geometric = total - theta_d."""
    model = HamiltonianModel.from_config(config)
    _check_grid(traj, config, model.space)

    overlaps = traj.return_amplitudes()
    final_population = float(abs(overlaps[-1]) ** 2)
    if final_population < 0.5:
        raise DecompositionUndefinedError(
            f"state does not return (final population {final_population:.3g} < 0.5)"
        )

    theta_d = -float(trapezoid(_energies(traj, model, pulses), traj.times))
    total = float(traj.return_phase()[-1])
    geometric = total - theta_d
    return PhaseDecomposition(
        total_phase_rad=total,
        dynamical_phase_rad=theta_d,
        geometric_phase_rad=geometric,
        total_phase_mod_2pi=float(np.mod(total, TWO_PI)),
        geometric_phase_mod_2pi=float(np.mod(geometric, TWO_PI)),
        dynamical_fraction=abs(theta_d) / abs(total) if total != 0.0 else None,
        final_population=final_population,
    )


# =============================================================================
# ADIABATIC SPECTRUM
# =============================================================================

def _sector_label(space: StateSpace, sector: Tuple[int, ...]) -> str:
    for index in sector:
        if index in space.computational_indices:
            return space.computational_name(index)
    return space.states[sector[0]].name


def _min_gaps(eigenvalues: np.ndarray, tol: float) -> np.ndarray:
    """Smallest adjacent gap above tol per sample (0 when every gap is below)."""
    if eigenvalues.shape[1] < 2:
        return np.zeros(eigenvalues.shape[0])
    gaps = np.diff(eigenvalues, axis=1)
    masked = np.where(gaps > tol, gaps, np.inf)
    smallest = masked.min(axis=1)
    return np.where(np.isfinite(smallest), smallest, 0.0)


@dataclass(frozen=True)
class SpectrumTrace:
    """Instantaneous eigenvalues per sector and the fastness metric."""
    times: np.ndarray
    sectors: Dict[str, np.ndarray]
    gap_sector: str
    mean_gap: float
    duration_us: float

    @property
    def fastness(self) -> float:
        return self.mean_gap * self.duration_us

    def to_frame(self) -> pd.DataFrame:
        """Eigenvalues in 2pi x MHz, one column per (sector, level)."""
        columns = {"t_us": self.times}
        for label, values in self.sectors.items():
            for k in range(values.shape[1]):
                columns[f"E_{label}_{k}_2pi_MHz"] = values[:, k] / TWO_PI
        return pd.DataFrame(columns)

    def summary(self) -> Dict[str, Any]:
        return {
            "gap_sector": self.gap_sector,
            "mean_gap_rad_per_us": self.mean_gap,
            "mean_gap_2pi_MHz": self.mean_gap / TWO_PI,
            "duration_us": self.duration_us,
            "fastness": self.fastness,
        }


def _spectral_tolerance(stack: np.ndarray) -> float:
    scale = float(np.max(np.abs(stack))) if stack.size else 0.0
    return 1e-9 * max(scale, 1.0)


def adiabatic_spectrum(config: GateConfiguration, pulses: PulseSet,
                       n_samples: Optional[int] = None) -> SpectrumTrace:
    """Sorted eigenvalues of every sector on a uniform time grid."""
    n_samples = settings.spectrum_samples if n_samples is None else n_samples
    if n_samples < 2:
        raise InvalidInputError(f"n_samples must be >= 2, got {n_samples}")
    model = HamiltonianModel.from_config(config)
    space = model.space
    times = np.linspace(0.0, config.duration_us, n_samples)
    hamiltonians = model.stack(pulses, times)
    tol = _spectral_tolerance(hamiltonians)

    sectors = {}
    for sector in space.sectors:
        indices = list(sector)
        sectors[_sector_label(space, sector)] = np.linalg.eigvalsh(hamiltonians[:, indices][:, :, indices])

    gap_sector = _sector_label(space, space.sector_of(space.index("11")))
    mean_gap = float(np.mean(_min_gaps(sectors[gap_sector], tol)))
    return SpectrumTrace(
        times=times,
        sectors=sectors,
        gap_sector=gap_sector,
        mean_gap=mean_gap,
        duration_us=config.duration_us,
    )


# =============================================================================
# ADIABATIC PROJECTION
# =============================================================================

class AdiabaticProjection(BaseModel):
    """Weights of the evolving state on the instantaneous eigenstates."""
    sector: str
    times: List[float]
    weights: List[List[float]]
    mean_dominant_weight: Optional[float] = None
    regime: Literal["distributed", "dominant", "undetermined"]


def adiabatic_projection(traj: TrajectoryRecord, config: GateConfiguration,
                         pulses: PulseSet, threshold: float = 0.9) -> AdiabaticProjection:
    """Project psi(t) onto the eigenbasis of its sector.

    A mean dominant weight below ``threshold`` means the state is spread
    over several adiabatic states (regime "distributed").
    """
    model = HamiltonianModel.from_config(config)
    space = model.space
    _check_grid(traj, config, space)

    start = int(np.argmax(np.abs(traj.initial_state)))
    sector = list(space.sector_of(start))
    hamiltonians = model.stack(pulses, traj.times)[:, sector][:, :, sector]
    eigenvalues, eigenvectors = np.linalg.eigh(hamiltonians)
    psi = traj.amplitudes[:, sector]
    weights = np.abs(np.einsum("tij,ti->tj", np.conj(eigenvectors), psi)) ** 2

    if len(sector) > 1:
        tol = _spectral_tolerance(hamiltonians)
        resolved = np.min(np.diff(eigenvalues, axis=1), axis=1) > tol
    else:
        resolved = np.ones(traj.times.size, dtype=bool)

    mean_dominant = None
    regime = "undetermined"
    if np.any(resolved):
        mean_dominant = float(np.mean(np.max(weights[resolved], axis=1)))
        regime = "distributed" if mean_dominant < threshold else "dominant"

    return AdiabaticProjection(
        sector=_sector_label(space, tuple(sector)),
        times=traj.times.tolist(),
        weights=weights.tolist(),
        mean_dominant_weight=mean_dominant,
        regime=regime,
    )


# =============================================================================
# ROBUSTNESS SCANS
# =============================================================================

def _with(config: GateConfiguration, **changes) -> GateConfiguration:
    """Validated copy of a configuration with some fields replaced."""
    return GateConfiguration(**{**config.model_dump(), **changes})


def detuning_scan(config: GateConfiguration, pulses: PulseSet, detunings_2pi_mhz: Sequence[float],
                  n_steps: Optional[int] = None) -> List[Tuple[float, GateReport]]:
    """Gate reports with an extra uniform ground-Rydberg detuning."""
    results = []
    for offset in detunings_2pi_mhz:
        shifted = _with(config, rydberg_detuning_2pi_mhz=config.rydberg_detuning_2pi_mhz + float(offset))
        results.append((float(offset), gate_report(shifted, pulses, n_steps=n_steps)))
    logger.info(f"Detuning scan over {len(results)} points")
    return results


def blockade_scan(config: GateConfiguration, pulses: PulseSet, blockades_2pi_mhz: Sequence[float],
                  n_steps: Optional[int] = None) -> List[Tuple[float, GateReport, float]]:
    """Gate report and peak multi-Rydberg population from |11> per finite blockade."""
    results = []
    for blockade in blockades_2pi_mhz:
        finite = _with(config, blockade_2pi_mhz=float(blockade))
        model = HamiltonianModel.from_config(finite)
        space = model.space
        start = np.zeros(space.dim, dtype=complex)
        start[space.index("11")] = 1.0
        traj = evolve_state(finite, pulses, start, n_steps=n_steps)
        multi = [k for k, state in enumerate(space.states) if state.n_rydberg >= 2]
        peak = float(np.max(traj.populations[:, multi].sum(axis=1))) if multi else 0.0
        results.append((float(blockade), gate_report(finite, pulses, n_steps=n_steps, model=model), peak))
    logger.info(f"Blockade scan over {len(results)} points")
    return results
