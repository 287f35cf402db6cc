"""CZ scoring of a propagator's computational block.

Fidelity with leakage::

    F = [Tr(M M^dagger) + |Tr M|^2] / 20,  M = U_CZ(phi_c, phi_t)^dagger . block
    U_CZ(phi_c, phi_t) = diag(1, e^{i phi_t}, e^{i phi_c}, -e^{i(phi_c + phi_t)})

maximized over the single-qubit phases (phi_c, phi_t).
"""
import logging
from typing import Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import minimize

from armd.config import settings
from armd.dynamics import Propagator, propagate
from armd.exceptions import InvalidInputError, UndefinedPhaseError
from armd.model import COMPUTATIONAL_NAMES, GateConfiguration, HamiltonianModel, StateSpace
from armd.pulse import TWO_PI, PulseSet


logger = logging.getLogger(__name__)


class GateReport(BaseModel):
    """Phase-compensated CZ score of one gate."""
    fidelity: float = Field(description="Compensated fidelity F", ge=0.0, le=1.0)
    error: float = Field(description="1 - F")
    conditional_phase_rad: Optional[float] = Field(
        description="phi_11 - phi_10 - phi_01 + phi_00 mod 2pi; null when undefined", default=None)
    phi_c: float = Field(description="Control compensation phase")
    phi_t: float = Field(description="Target compensation phase")
    leakage: Dict[str, float] = Field(description="Per-input population outside the computational block")
    raw_fidelity: float = Field(description="F at phi_c = phi_t = 0")
    raw_error: float = Field(description="1 - raw F")


def cz_target(phi_c: float = 0.0, phi_t: float = 0.0) -> np.ndarray:
    """U_CZ(phi_c, phi_t)."""
    return np.diag([1.0, np.exp(1j * phi_t), np.exp(1j * phi_c), -np.exp(1j * (phi_c + phi_t))])


def computational_block(U: Union[Propagator, np.ndarray], space: StateSpace) -> np.ndarray:
    """<comp_i|U|comp_j> in the order 00, 01, 10, 11."""
    matrix = U.matrix if isinstance(U, Propagator) else np.asarray(U)
    if matrix.shape != (space.dim, space.dim):
        raise InvalidInputError(f"propagator shape {matrix.shape} does not match state space dim {space.dim}")
    indices = list(space.computational_indices)
    return matrix[np.ix_(indices, indices)]


def _trace_overlap(diagonal: np.ndarray, phi_c, phi_t):
    """Tr M as a function of the compensation phases (broadcasts)."""
    return (diagonal[0]
            + np.exp(-1j * phi_t) * diagonal[1]
            + np.exp(-1j * phi_c) * diagonal[2]
            - np.exp(-1j * (phi_c + phi_t)) * diagonal[3])


def cz_fidelity(block: np.ndarray, phi_c: float = 0.0, phi_t: float = 0.0) -> float:
    """F for fixed compensation phases."""
    block = _check_block(block)
    frobenius = float(np.sum(np.abs(block) ** 2))
    trace = _trace_overlap(np.diag(block), phi_c, phi_t)
    return (frobenius + abs(trace) ** 2) / 20.0


def _check_block(block) -> np.ndarray:
    block = np.asarray(block, dtype=complex)
    if block.shape != (4, 4):
        raise InvalidInputError(f"computational block must be 4x4, got {block.shape}")
    if not np.all(np.isfinite(block)):
        raise InvalidInputError("computational block has non-finite entries")
    return block


def _best_phases(block: np.ndarray, grid: int) -> Tuple[float, float]:
    diagonal = np.diag(block)
    axis = np.arange(grid) * TWO_PI / grid
    scan = np.abs(_trace_overlap(diagonal, axis[:, None], axis[None, :])) ** 2
    i, j = np.unravel_index(int(np.argmax(scan)), scan.shape)

    def negative_overlap(x):
        return -abs(_trace_overlap(diagonal, x[0], x[1])) ** 2

    result = minimize(
        negative_overlap,
        x0=np.array([axis[i], axis[j]]),
        method="Nelder-Mead",
        options={"xatol": 1e-11, "fatol": 1e-15, "maxiter": 4000},
    )
    start_value = scan[i, j]
    phases = result.x if -result.fun >= start_value else np.array([axis[i], axis[j]])
    return float(np.mod(phases[0], TWO_PI)), float(np.mod(phases[1], TWO_PI))


def conditional_phase(block: np.ndarray) -> float:
    """arg(b11 b00) - arg(b01) - arg(b10), reduced to [0, 2pi)."""
    diagonal = np.diag(_check_block(block))
    magnitudes = np.abs(diagonal)
    if np.any(magnitudes <= 0.5):
        weakest = COMPUTATIONAL_NAMES[int(np.argmin(magnitudes))]
        raise UndefinedPhaseError(
            f"conditional phase undefined: |<{weakest}|U|{weakest}>| = {magnitudes.min():.3g} <= 0.5"
        )
    phase = np.angle(diagonal[3] * diagonal[0]) - np.angle(diagonal[1]) - np.angle(diagonal[2])
    return float(np.mod(phase, TWO_PI))


def cz_error(block: np.ndarray, grid: Optional[int] = None) -> GateReport:
    """Score a computational block against CZ with phase compensation."""
    block = _check_block(block)
    grid = settings.phase_grid if grid is None else grid
    if grid < 1:
        raise InvalidInputError(f"phase grid must be >= 1, got {grid}")

    phi_c, phi_t = _best_phases(block, grid)
    fidelity = min(max(cz_fidelity(block, phi_c, phi_t), 0.0), 1.0)
    raw_fidelity = min(max(cz_fidelity(block), 0.0), 1.0)

    retained = np.sum(np.abs(block) ** 2, axis=0)
    leakage = {
        name: float(min(max(1.0 - retained[k], 0.0), 1.0))
        for k, name in enumerate(COMPUTATIONAL_NAMES)
    }

    try:
        phase = conditional_phase(block)
    except UndefinedPhaseError:
        phase = None

    return GateReport(
        fidelity=fidelity,
        error=1.0 - fidelity,
        conditional_phase_rad=phase,
        phi_c=phi_c,
        phi_t=phi_t,
        leakage=leakage,
        raw_fidelity=raw_fidelity,
        raw_error=1.0 - raw_fidelity,
    )


def gate_report(config: GateConfiguration, pulses: PulseSet, n_steps: Optional[int] = None,
                integrator: Optional[str] = None,
                model: Optional[HamiltonianModel] = None) -> GateReport:
    """Propagate a gate and score it."""
    model = model or HamiltonianModel.from_config(config)
    U = propagate(config, pulses, n_steps=n_steps, integrator=integrator, model=model)
    report = cz_error(computational_block(U, model.space))
    logger.debug(f"Scored {config.scheme.value}: error={report.error:.3e}")
    return report
