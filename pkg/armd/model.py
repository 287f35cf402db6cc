"""Basis enumeration and Hamiltonian assembly for the gate schemes.

Units: hbar = 1, angular frequencies in rad/us. User-facing quantities
(detunings, blockade) are stored in 2pi x MHz and converted when the
Hamiltonian is assembled.

Level alphabet per atom::

    qubit atoms   0, 1, e (two-photon intermediate), r (Rydberg)
    buffer atom   g, r

Each scheme fixes which levels exist, which single-atom transitions each
coupling role drives, and which multi-Rydberg states are removed (infinite
blockade) or shifted (finite blockade).
"""
import math
from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from armd.exceptions import ConfigurationError, InvalidInputError
from armd.pulse import TWO_PI, eval_waveform


def to_angular(value_2pi_mhz: float) -> float:
    """Convert a 2pi x MHz figure to rad/us."""
    return TWO_PI * value_2pi_mhz


# =============================================================================
# SCHEMES
# =============================================================================

class Scheme(str, Enum):
    """Gate scheme selector."""
    ONE_PHOTON_TWO_QUBIT = "one_photon_two_qubit"
    TWO_PHOTON_TWO_QUBIT = "two_photon_two_qubit"
    BAM_ONE_PHOTON = "bam_one_photon"


SCHEME_ROLES: Dict[Scheme, Tuple[str, ...]] = {
    Scheme.ONE_PHOTON_TWO_QUBIT: ("omega_c", "omega_t"),
    Scheme.TWO_PHOTON_TWO_QUBIT: ("omega_cp", "omega_cs", "omega_tp", "omega_ts"),
    Scheme.BAM_ONE_PHOTON: ("omega_1", "omega_2"),
}

_ATOM_LEVELS: Dict[Scheme, Tuple[Tuple[str, ...], ...]] = {
    Scheme.ONE_PHOTON_TWO_QUBIT: (("0", "1", "r"), ("0", "1", "r")),
    Scheme.TWO_PHOTON_TWO_QUBIT: (("0", "1", "e", "r"), ("0", "1", "e", "r")),
    Scheme.BAM_ONE_PHOTON: (("0", "1", "r"), ("g", "r"), ("0", "1", "r")),
}

# (atom, lower level, upper level, role)
_TRANSITIONS: Dict[Scheme, Tuple[Tuple[int, str, str, str], ...]] = {
    Scheme.ONE_PHOTON_TWO_QUBIT: (
        (0, "1", "r", "omega_c"),
        (1, "1", "r", "omega_t"),
    ),
    Scheme.TWO_PHOTON_TWO_QUBIT: (
        (0, "1", "e", "omega_cp"),
        (0, "e", "r", "omega_cs"),
        (1, "1", "e", "omega_tp"),
        (1, "e", "r", "omega_ts"),
    ),
    Scheme.BAM_ONE_PHOTON: (
        (0, "1", "r", "omega_2"),
        (1, "g", "r", "omega_1"),
        (2, "1", "r", "omega_2"),
    ),
}

# Atom pairs that interact through the blockade (qubits of a BAM gate do not).
_BLOCKADE_PAIRS: Dict[Scheme, Tuple[Tuple[int, int], ...]] = {
    Scheme.ONE_PHOTON_TWO_QUBIT: ((0, 1),),
    Scheme.TWO_PHOTON_TWO_QUBIT: ((0, 1),),
    Scheme.BAM_ONE_PHOTON: ((0, 1), (1, 2)),
}

_COMPUTATIONAL_LABELS: Dict[Scheme, Tuple[Tuple[str, ...], ...]] = {
    Scheme.ONE_PHOTON_TWO_QUBIT: (("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")),
    Scheme.TWO_PHOTON_TWO_QUBIT: (("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")),
    Scheme.BAM_ONE_PHOTON: (("0", "g", "0"), ("0", "g", "1"), ("1", "g", "0"), ("1", "g", "1")),
}

COMPUTATIONAL_NAMES = ("00", "01", "10", "11")


# =============================================================================
# CONFIGURATION
# =============================================================================

class GateConfiguration(BaseModel):
    """Scheme selector plus the physical parameters of one gate."""
    model_config = ConfigDict(frozen=True)

    scheme: Scheme = Field(description="Gate scheme")
    duration_us: float = Field(description="Gate duration T in us", gt=0)
    delta_2pi_mhz: Optional[float] = Field(
        description="One-photon detuning of the intermediate level (two-photon scheme)", default=None)
    blockade_2pi_mhz: Optional[float] = Field(
        description="Finite blockade B; None means infinite", default=None, gt=0)
    rydberg_detuning_2pi_mhz: float = Field(
        description="Uniform ground-Rydberg detuning per Rydberg atom", default=0.0)
    pulse_wiring: Dict[str, str] = Field(description="Coupling role -> pulse name")

    @model_validator(mode="after")
    def _check_wiring(self):
        expected = set(SCHEME_ROLES[self.scheme])
        wired = set(self.pulse_wiring)
        if wired != expected:
            missing = sorted(expected - wired)
            extra = sorted(wired - expected)
            raise ConfigurationError(
                f"pulse wiring for {self.scheme.value} must cover exactly {sorted(expected)}; "
                f"missing {missing}, unexpected {extra}"
            )
        for value in (self.delta_2pi_mhz, self.rydberg_detuning_2pi_mhz, self.blockade_2pi_mhz):
            if value is not None and not math.isfinite(value):
                raise ConfigurationError("configuration frequencies must be finite")
        return self

    @property
    def roles(self) -> Tuple[str, ...]:
        return SCHEME_ROLES[self.scheme]

    @property
    def infinite_blockade(self) -> bool:
        return self.blockade_2pi_mhz is None

    @property
    def blockade(self) -> float:
        """Blockade shift in rad/us (``inf`` for the idealized case)."""
        if self.blockade_2pi_mhz is None:
            return math.inf
        return to_angular(self.blockade_2pi_mhz)

    @property
    def delta(self) -> Optional[float]:
        """One-photon detuning in rad/us."""
        if self.delta_2pi_mhz is None:
            return None
        return to_angular(self.delta_2pi_mhz)

    @property
    def rydberg_detuning(self) -> float:
        return to_angular(self.rydberg_detuning_2pi_mhz)

    @property
    def requires_delta(self) -> bool:
        return self.scheme == Scheme.TWO_PHOTON_TWO_QUBIT and self.delta_2pi_mhz is None


def default_wiring(scheme: Scheme) -> Dict[str, str]:
    """Identity wiring: each role driven by the pulse of the same name."""
    return {role: role for role in SCHEME_ROLES[scheme]}


# =============================================================================
# STATE SPACE
# =============================================================================

@dataclass(frozen=True)
class BasisState:
    """One product ket, one level per atom."""
    label: Tuple[str, ...]

    @property
    def name(self) -> str:
        return "".join(self.label)

    @property
    def n_rydberg(self) -> int:
        return sum(1 for level in self.label if level == "r")

    def __str__(self) -> str:
        return f"|{self.name}>"


@dataclass(frozen=True)
class StateSpace:
    """Enumerated basis with its dynamically invariant blocks."""
    scheme: Scheme
    states: Tuple[BasisState, ...]
    sectors: Tuple[Tuple[int, ...], ...]
    computational_indices: Tuple[int, int, int, int]

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(state.name for state in self.states)

    def index(self, state: Union[BasisState, Tuple[str, ...], str]) -> int:
        """Index of a basis state given as BasisState, label tuple or name.

        The computational shorthands ``00``, ``01``, ``10``, ``11`` also
        resolve for schemes whose kets carry a buffer atom.
        """
        if isinstance(state, BasisState):
            label = state.label
        elif isinstance(state, tuple):
            label = state
        else:
            names = self.names
            if state in names:
                return names.index(state)
            if state in COMPUTATIONAL_NAMES:
                return self.computational_indices[COMPUTATIONAL_NAMES.index(state)]
            raise InvalidInputError(f"unknown basis state '{state}' for {self.scheme.value}")
        for i, candidate in enumerate(self.states):
            if candidate.label == label:
                return i
        raise InvalidInputError(f"unknown basis state {label} for {self.scheme.value}")

    def sector_of(self, index: int) -> Tuple[int, ...]:
        for sector in self.sectors:
            if index in sector:
                return sector
        raise InvalidInputError(f"index {index} outside the state space")

    def computational_name(self, index: int) -> str:
        """Two-qubit name (00..11) of a computational index."""
        return COMPUTATIONAL_NAMES[self.computational_indices.index(index)]


def _is_kept(config: GateConfiguration, label: Tuple[str, ...]) -> bool:
    """Whether a product ket survives the blockade truncation."""
    if not config.infinite_blockade:
        return True
    if config.scheme == Scheme.TWO_PHOTON_TWO_QUBIT:
        # Only the kets of the two-photon equations: at most one atom left the qubit levels.
        return sum(1 for level in label if level not in ("0", "1")) <= 1
    for a, b in _BLOCKADE_PAIRS[config.scheme]:
        if label[a] == "r" and label[b] == "r":
            return False
    return True


def _enumerate_states(config: GateConfiguration) -> Tuple[BasisState, ...]:
    if config.scheme == Scheme.TWO_PHOTON_TWO_QUBIT and not config.infinite_blockade:
        raise ConfigurationError(
            "finite blockade is not supported for the two-photon scheme: "
            "its truncated manifold has no doubly excited states"
        )
    levels = _ATOM_LEVELS[config.scheme]
    return tuple(
        BasisState(label) for label in product(*levels) if _is_kept(config, label)
    )


def _coupling_matrices(scheme: Scheme, states: Tuple[BasisState, ...]) -> Dict[str, np.ndarray]:
    """Per-role coupling operators with the 1/2 Rabi factor applied."""
    dim = len(states)
    lookup = {state.label: i for i, state in enumerate(states)}
    couplings = {role: np.zeros((dim, dim), dtype=complex) for role in SCHEME_ROLES[scheme]}
    for i, state in enumerate(states):
        for atom, lower, upper, role in _TRANSITIONS[scheme]:
            if state.label[atom] != lower:
                continue
            partner = state.label[:atom] + (upper,) + state.label[atom + 1:]
            j = lookup.get(partner)
            if j is None:
                continue
            couplings[role][i, j] += 0.5
            couplings[role][j, i] += 0.5
    return couplings


def _static_diagonal(config: GateConfiguration, states: Tuple[BasisState, ...]) -> np.ndarray:
    diagonal = np.zeros(len(states))
    if config.scheme == Scheme.TWO_PHOTON_TWO_QUBIT:
        if config.delta is None:
            raise ConfigurationError(
                "the one-photon detuning delta (delta_2pi_MHz / --delta) is required "
                "for the two-photon scheme"
            )
        for i, state in enumerate(states):
            diagonal[i] += config.delta * sum(1 for level in state.label if level == "e")
    if not config.infinite_blockade:
        for i, state in enumerate(states):
            pairs = sum(
                1 for a, b in _BLOCKADE_PAIRS[config.scheme]
                if state.label[a] == "r" and state.label[b] == "r"
            )
            diagonal[i] += config.blockade * pairs
    if config.rydberg_detuning_2pi_mhz:
        for i, state in enumerate(states):
            diagonal[i] += config.rydberg_detuning * state.n_rydberg
    return diagonal


def _sectors(dim: int, operators: Iterable[np.ndarray]) -> Tuple[Tuple[int, ...], ...]:
    """Connected components of the coupling graph."""
    pattern = np.zeros((dim, dim), dtype=bool)
    for op in operators:
        pattern |= np.abs(op) > 0
    np.fill_diagonal(pattern, False)
    n_components, labels = connected_components(csr_matrix(pattern), directed=False)
    groups = [tuple(int(i) for i in np.flatnonzero(labels == c)) for c in range(n_components)]
    return tuple(sorted(groups, key=lambda group: group[0]))


def build_state_space(config: GateConfiguration) -> StateSpace:
    """Enumerate the basis of a configuration and partition it into sectors."""
    return HamiltonianModel.from_config(config).space


# =============================================================================
# HAMILTONIAN
# =============================================================================

@dataclass(frozen=True)
class HermitianOperator:
    """Dense Hermitian matrix in rad/us."""
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def hermiticity_defect(self) -> float:
        """max|H - H^dagger| relative to max|H| (0 for the zero matrix)."""
        scale = float(np.max(np.abs(self.entries))) if self.entries.size else 0.0
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.entries - self.entries.conj().T))) / scale

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.hermiticity_defect() <= tol


@dataclass(frozen=True)
class HamiltonianModel:
    """H(t) = static + sum over roles of pulse(t) * coupling[role]."""
    config: GateConfiguration
    space: StateSpace
    static: np.ndarray
    couplings: Mapping[str, np.ndarray]

    @classmethod
    def from_config(cls, config: GateConfiguration) -> "HamiltonianModel":
        states = _enumerate_states(config)
        couplings = _coupling_matrices(config.scheme, states)
        static = np.diag(_static_diagonal(config, states)).astype(complex)
        sectors = _sectors(len(states), couplings.values())
        lookup = {state.label: i for i, state in enumerate(states)}
        computational = tuple(lookup[label] for label in _COMPUTATIONAL_LABELS[config.scheme])
        space = StateSpace(
            scheme=config.scheme,
            states=states,
            sectors=sectors,
            computational_indices=computational,
        )
        return cls(config=config, space=space, static=static, couplings=couplings)

    def role_values(self, pulses, times) -> Dict[str, np.ndarray]:
        """Evaluate every wired pulse at ``times`` (rad/us)."""
        values = {}
        for role in self.config.roles:
            name = self.config.pulse_wiring[role]
            if name not in pulses:
                raise ConfigurationError(f"role '{role}' is wired to unknown pulse '{name}'")
            values[role] = np.asarray(eval_waveform(pulses[name], times), dtype=float)
            if not np.all(np.isfinite(values[role])):
                raise InvalidInputError(f"pulse '{name}' evaluates to a non-finite value")
        return values

    def stack(self, pulses, times) -> np.ndarray:
        """H at every time in ``times``, shape (n, dim, dim)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        values = self.role_values(pulses, times)
        stacked = np.broadcast_to(self.static, (times.size,) + self.static.shape).copy()
        for role, coupling in self.couplings.items():
            stacked += values[role][:, None, None] * coupling
        return stacked

    def at(self, pulses, t: float) -> HermitianOperator:
        return HermitianOperator(self.stack(pulses, [t])[0])


def hamiltonian_at(config: GateConfiguration, pulses, t: float) -> HermitianOperator:
    """H(t)/hbar for a configuration and its pulses."""
    if not math.isfinite(t) or t < -1e-12 or t > config.duration_us * (1 + 1e-12):
        raise InvalidInputError(f"t = {t} us outside [0, {config.duration_us}]")
    return HamiltonianModel.from_config(config).at(pulses, t)
