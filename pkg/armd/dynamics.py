"""Time evolution under H(t) on a uniform grid.

Each step is an exact exponential of Hermitian matrices computed by
eigendecomposition, so every step (and therefore the product) is unitary to
machine precision. Two step rules are available:

``midpoint``
    exp(-i H(t_k + dt/2) dt), second order.
``magnus4``
    commutator-free fourth-order Magnus rule: two exponentials per step built
    from H at the Gauss-Legendre nodes t_k + (1/2 -+ sqrt(3)/6) dt.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from armd.config import settings
from armd.exceptions import ConfigurationError, InvalidInputError
from armd.model import BasisState, GateConfiguration, HamiltonianModel, HermitianOperator
from armd.pulse import TWO_PI, PulseSet


logger = logging.getLogger(__name__)

INTEGRATORS = ("magnus4", "midpoint")

_GAUSS_OFFSET = math.sqrt(3.0) / 6.0
_ALPHA_1 = 0.25 + math.sqrt(3.0) / 6.0
_ALPHA_2 = 0.25 - math.sqrt(3.0) / 6.0


# =============================================================================
# STEP EXPONENTIALS
# =============================================================================

def _hermiticity_defects(stack: np.ndarray) -> np.ndarray:
    scale = np.max(np.abs(stack), axis=(-2, -1))
    defect = np.max(np.abs(stack - np.conj(np.swapaxes(stack, -1, -2))), axis=(-2, -1))
    return np.divide(defect, scale, out=np.zeros_like(defect), where=scale > 0)


def _exponentials(stack: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) for every matrix of a (n, d, d) Hermitian stack."""
    eigenvalues, eigenvectors = np.linalg.eigh(stack)
    phases = np.exp(-1j * eigenvalues * dt)
    return (eigenvectors * phases[..., None, :]) @ np.conj(np.swapaxes(eigenvectors, -1, -2))


def step_propagator(H: Union[HermitianOperator, np.ndarray], dt: float) -> np.ndarray:
    """exp(-i H dt) of one Hermitian operator."""
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidInputError(f"step dt must be positive and finite, got {dt}")
    entries = H.entries if isinstance(H, HermitianOperator) else np.asarray(H)
    entries = np.asarray(entries, dtype=complex)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {entries.shape}")
    if not np.all(np.isfinite(entries)):
        raise InvalidInputError("operator has non-finite entries")
    operator = HermitianOperator(entries)
    if not operator.is_hermitian():
        raise InvalidInputError(
            f"operator is not Hermitian (relative defect {operator.hermiticity_defect():.2e})"
        )
    return _exponentials(entries[None], dt)[0]


def ordered_product(steps: np.ndarray) -> np.ndarray:
    """steps[n-1] @ ... @ steps[1] @ steps[0], reduced pairwise."""
    if steps.shape[0] == 0:
        raise InvalidInputError("no steps to multiply")
    while steps.shape[0] > 1:
        half = steps.shape[0] // 2
        paired = steps[1:2 * half:2] @ steps[0:2 * half:2]
        if steps.shape[0] % 2:
            paired = np.concatenate([paired, steps[-1:]])
        steps = paired
    return steps[0]


def _resolve_grid(config: GateConfiguration, n_steps: Optional[int], integrator: Optional[str]) -> Tuple[int, str]:
    n_steps = settings.default_n_steps if n_steps is None else int(n_steps)
    integrator = settings.integrator if integrator is None else integrator
    if n_steps < 1:
        raise InvalidInputError(f"n_steps must be >= 1, got {n_steps}")
    if integrator not in INTEGRATORS:
        raise ConfigurationError(f"unknown integrator '{integrator}'; choose from {', '.join(INTEGRATORS)}")
    return n_steps, integrator


def step_unitaries(model: HamiltonianModel, pulses: PulseSet, n_steps: int,
                   integrator: str = "magnus4") -> np.ndarray:
    """Per-step unitaries over [0, T], shape (n_steps, dim, dim)."""
    dt = model.config.duration_us / n_steps
    starts = np.arange(n_steps) * dt
    if integrator == "midpoint":
        hamiltonians = model.stack(pulses, starts + 0.5 * dt)
        _check_stack(hamiltonians)
        return _exponentials(hamiltonians, dt)

    early = model.stack(pulses, starts + (0.5 - _GAUSS_OFFSET) * dt)
    late = model.stack(pulses, starts + (0.5 + _GAUSS_OFFSET) * dt)
    first = _ALPHA_1 * early + _ALPHA_2 * late
    second = _ALPHA_2 * early + _ALPHA_1 * late
    _check_stack(first)
    _check_stack(second)
    return _exponentials(second, dt) @ _exponentials(first, dt)


def _check_stack(stack: np.ndarray):
    worst = float(np.max(_hermiticity_defects(stack))) if stack.size else 0.0
    if worst > 1e-12:
        raise InvalidInputError(f"Hamiltonian is not Hermitian (relative defect {worst:.2e})")


# =============================================================================
# PROPAGATOR
# =============================================================================

@dataclass(frozen=True)
class Propagator:
    """Full-space unitary of one gate."""
    matrix: np.ndarray
    n_steps: int
    duration_us: float
    integrator: str

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def unitarity_defect(self) -> float:
        """max |U^dagger U - I|."""
        identity = np.eye(self.dim)
        return float(np.max(np.abs(self.matrix.conj().T @ self.matrix - identity)))


def propagate(config: GateConfiguration, pulses: PulseSet, n_steps: Optional[int] = None,
              integrator: Optional[str] = None,
              model: Optional[HamiltonianModel] = None) -> Propagator:
    """Propagator of the gate over [0, T]."""
    n_steps, integrator = _resolve_grid(config, n_steps, integrator)
    model = model or HamiltonianModel.from_config(config)
    matrix = ordered_product(step_unitaries(model, pulses, n_steps, integrator))
    logger.debug(f"Propagated {config.scheme.value} over {n_steps} {integrator} steps (dim {model.space.dim})")
    return Propagator(matrix=matrix, n_steps=n_steps, duration_us=config.duration_us, integrator=integrator)


# =============================================================================
# TRAJECTORIES
# =============================================================================

def unwrap_phases(raw: np.ndarray, populations: np.ndarray, epsilon: float) -> np.ndarray:
    """Unwrap along axis 0, holding the branch across low-population samples.

    The 2pi offset only changes between consecutive samples that both carry
    population >= epsilon, so a sign change inside a dip shows up as a jump.
    """
    raw = np.asarray(raw, dtype=float)
    populations = np.asarray(populations, dtype=float)
    unwrapped = raw.copy()
    if raw.shape[0] < 2:
        return unwrapped
    steps = np.diff(raw, axis=0)
    carried = (populations[:-1] >= epsilon) & (populations[1:] >= epsilon)
    corrections = np.where(carried, -TWO_PI * np.round(steps / TWO_PI), 0.0)
    unwrapped[1:] += np.cumsum(corrections, axis=0)
    return unwrapped


@dataclass(frozen=True)
class TrajectoryRecord:
    """Amplitudes of every basis state at every grid point."""
    times: np.ndarray
    amplitudes: np.ndarray
    labels: Tuple[str, ...]
    jump_epsilon: float = 0.01

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def phases(self) -> np.ndarray:
        return unwrap_phases(np.angle(self.amplitudes), self.populations, self.jump_epsilon)

    @property
    def initial_state(self) -> np.ndarray:
        return self.amplitudes[0]

    @property
    def initial_label(self) -> Optional[str]:
        """Label of the starting basis state (None for a superposition)."""
        populations = self.populations[0]
        k = int(np.argmax(populations))
        if populations[k] > 1.0 - 1e-12:
            return self.labels[k]
        return None

    def column(self, label: str) -> int:
        if label not in self.labels:
            raise InvalidInputError(f"trajectory has no state '{label}'; states: {', '.join(self.labels)}")
        return self.labels.index(label)

    def population(self, label: str) -> np.ndarray:
        return self.populations[:, self.column(label)]

    def phase(self, label: str) -> np.ndarray:
        return self.phases[:, self.column(label)]

    def return_amplitudes(self) -> np.ndarray:
        """<psi(0)|psi(t)> at every sample."""
        return self.amplitudes @ np.conj(self.initial_state)

    def return_phase(self) -> np.ndarray:
        """Unwrapped phase of <psi(0)|psi(t)>."""
        overlaps = self.return_amplitudes()
        return unwrap_phases(np.angle(overlaps), np.abs(overlaps) ** 2, self.jump_epsilon)

    def to_frame(self) -> pd.DataFrame:
        columns = {"t_us": self.times}
        populations = self.populations
        phases = self.phases
        for k, label in enumerate(self.labels):
            columns[f"{label}_re"] = self.amplitudes[:, k].real
            columns[f"{label}_im"] = self.amplitudes[:, k].imag
            columns[f"{label}_pop"] = populations[:, k]
            columns[f"{label}_phase"] = phases[:, k]
        return pd.DataFrame(columns)

    def to_csv(self, path: Union[str, Path]) -> Path:
        target = Path(path)
        self.to_frame().to_csv(target, index=False)
        return target

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, jump_epsilon: Optional[float] = None) -> "TrajectoryRecord":
        if "t_us" not in frame.columns:
            raise InvalidInputError("trajectory table needs a 't_us' column")
        labels = tuple(name[:-3] for name in frame.columns if name.endswith("_re"))
        if not labels:
            raise InvalidInputError("trajectory table has no amplitude columns")
        amplitudes = np.stack(
            [frame[f"{label}_re"].to_numpy(float) + 1j * frame[f"{label}_im"].to_numpy(float) for label in labels],
            axis=1,
        )
        return cls(
            times=frame["t_us"].to_numpy(float),
            amplitudes=amplitudes,
            labels=labels,
            jump_epsilon=settings.jump_epsilon if jump_epsilon is None else jump_epsilon,
        )


def read_trajectory_csv(path: Union[str, Path], jump_epsilon: Optional[float] = None) -> TrajectoryRecord:
    return TrajectoryRecord.from_frame(pd.read_csv(path), jump_epsilon)


def evolve_state(config: GateConfiguration, pulses: PulseSet, initial: np.ndarray,
                 n_steps: Optional[int] = None, integrator: Optional[str] = None,
                 jump_epsilon: Optional[float] = None) -> TrajectoryRecord:
    """Record psi(t) on the grid for an arbitrary normalized start vector."""
    n_steps, integrator = _resolve_grid(config, n_steps, integrator)
    model = HamiltonianModel.from_config(config)
    psi = np.asarray(initial, dtype=complex)
    if psi.shape != (model.space.dim,):
        raise InvalidInputError(f"initial state must have shape ({model.space.dim},), got {psi.shape}")
    norm = float(np.linalg.norm(psi))
    if not math.isfinite(norm) or abs(norm - 1.0) > 1e-9:
        raise InvalidInputError(f"initial state must be normalized (norm {norm})")

    steps = step_unitaries(model, pulses, n_steps, integrator)
    amplitudes = np.empty((n_steps + 1, model.space.dim), dtype=complex)
    amplitudes[0] = psi
    for k in range(n_steps):
        psi = steps[k] @ psi
        amplitudes[k + 1] = psi

    return TrajectoryRecord(
        times=np.linspace(0.0, config.duration_us, n_steps + 1),
        amplitudes=amplitudes,
        labels=model.space.names,
        jump_epsilon=settings.jump_epsilon if jump_epsilon is None else jump_epsilon,
    )


def trajectory(config: GateConfiguration, pulses: PulseSet,
               initial: Union[BasisState, Tuple[str, ...], str],
               n_steps: Optional[int] = None, integrator: Optional[str] = None,
               jump_epsilon: Optional[float] = None) -> TrajectoryRecord:
    """Trajectory of a computational basis input."""
    space = HamiltonianModel.from_config(config).space
    index = space.index(initial)
    if index not in space.computational_indices:
        raise InvalidInputError(f"{space.states[index]} is not a computational basis state")
    psi = np.zeros(space.dim, dtype=complex)
    psi[index] = 1.0
    return evolve_state(config, pulses, psi, n_steps, integrator, jump_epsilon)
