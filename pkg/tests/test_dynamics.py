"""Tests for step exponentials, propagators and trajectories."""
import math

import numpy as np
import pytest

from armd.dynamics import (
    evolve_state, ordered_product, propagate, read_trajectory_csv, step_propagator, trajectory,
    unwrap_phases,
)
from armd.exceptions import ConfigurationError, InvalidInputError
from armd.model import GateConfiguration, HamiltonianModel, Scheme, default_wiring
from armd.presets import PRESET_NAMES, preset
from armd.pulse import Waveform


def _random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


def _single_drive(duration, omega_t=10.0, omega_c=0.0):
    """One-photon gate with constant drives (2pi x MHz)."""
    config = GateConfiguration(
        scheme=Scheme.ONE_PHOTON_TWO_QUBIT,
        duration_us=duration,
        pulse_wiring=default_wiring(Scheme.ONE_PHOTON_TWO_QUBIT),
    )
    return config, {"omega_c": Waveform.constant(omega_c), "omega_t": Waveform.constant(omega_t)}


@pytest.fixture(scope="module")
def fig2_gate():
    return preset("fig2")


@pytest.fixture(scope="module")
def fig2_propagator(fig2_gate):
    config, pulses = fig2_gate
    return propagate(config, pulses)


class TestStepPropagator:
    """Test single-step exponentials."""

    def test_zero_operator(self):
        """exp(0) = I."""
        assert np.allclose(step_propagator(np.zeros((3, 3)), 0.1), np.eye(3), atol=1e-15)

    def test_pi_pulse(self):
        """(Omega / 2) sigma_x with Omega dt = pi swaps the two levels."""
        H = 0.5 * np.array([[0.0, 1.0], [1.0, 0.0]])
        U = step_propagator(H, math.pi)
        assert abs(U[1, 0]) ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_matches_taylor_substeps(self):
        """Agrees with a 1024-substep fourth-order Taylor product."""
        rng = np.random.default_rng(5)
        H = _random_hermitian(rng, 5)
        dt = 0.5
        A = -1j * H * dt / 1024
        taylor = np.eye(5) + A + A @ A / 2 + A @ A @ A / 6 + A @ A @ A @ A / 24
        expected = np.linalg.matrix_power(taylor, 1024)
        assert np.max(np.abs(step_propagator(H, dt) - expected)) < 1e-8

    def test_unitary(self):
        """Result is unitary."""
        rng = np.random.default_rng(6)
        U = step_propagator(_random_hermitian(rng, 9), 0.3)
        assert np.max(np.abs(U.conj().T @ U - np.eye(9))) < 1e-12

    def test_rejects_bad_input(self):
        """Non-Hermitian operators, bad shapes and non-positive steps."""
        with pytest.raises(InvalidInputError, match="Hermitian"):
            step_propagator(np.array([[0.0, 1.0], [0.0, 0.0]]), 0.1)
        with pytest.raises(InvalidInputError):
            step_propagator(np.zeros((2, 3)), 0.1)
        with pytest.raises(InvalidInputError):
            step_propagator(np.eye(2), 0.0)
        with pytest.raises(InvalidInputError):
            step_propagator(np.array([[np.nan, 0.0], [0.0, 0.0]]), 0.1)


class TestOrderedProduct:
    """Test the time-ordered product."""

    def test_matches_sequential_product(self):
        """Pairwise reduction equals left multiplication in time order."""
        rng = np.random.default_rng(8)
        steps = np.stack([step_propagator(_random_hermitian(rng, 4), 0.2) for _ in range(7)])
        expected = np.eye(4, dtype=complex)
        for step in steps:
            expected = step @ expected
        assert np.allclose(ordered_product(steps), expected, atol=1e-13)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            ordered_product(np.zeros((0, 2, 2)))


class TestPropagate:
    """Test gate propagators."""

    def test_zero_pulses_identity(self):
        """No drive leaves every state alone."""
        config, pulses = _single_drive(0.25, omega_t=0.0)
        U = propagate(config, pulses, n_steps=64)
        assert np.allclose(U.matrix, np.eye(8), atol=1e-14)

    def test_rabi_pi_pulse(self):
        """Omega_t = 2pi x 10 MHz for 0.05 us transfers |01> to |0r>."""
        config, pulses = _single_drive(0.05)
        space = HamiltonianModel.from_config(config).space
        U = propagate(config, pulses, n_steps=16)
        assert abs(U.matrix[space.index("0r"), space.index("01")]) ** 2 == pytest.approx(1.0, abs=1e-10)

    def test_unitarity(self, fig2_propagator):
        """U^dagger U = I."""
        assert fig2_propagator.unitarity_defect() < 1e-10

    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_unitarity_every_preset(self, name):
        """Every published gate propagates unitarily at the default grid."""
        config, pulses = preset(name)
        if config.scheme == Scheme.TWO_PHOTON_TWO_QUBIT:
            config = GateConfiguration(**{**config.model_dump(), "delta_2pi_mhz": 1000.0})
        assert propagate(config, pulses).unitarity_defect() < 1e-10

    def test_sector_block_diagonal(self, fig2_gate, fig2_propagator):
        """Entries between distinct sectors vanish."""
        space = HamiltonianModel.from_config(fig2_gate[0]).space
        for a in space.sectors:
            for b in space.sectors:
                if a != b:
                    assert np.max(np.abs(fig2_propagator.matrix[np.ix_(a, b)])) < 1e-12

    def test_midpoint_available(self, fig2_gate):
        """The second-order rule runs and stays unitary."""
        config, pulses = fig2_gate
        U = propagate(config, pulses, n_steps=512, integrator="midpoint")
        assert U.integrator == "midpoint"
        assert U.unitarity_defect() < 1e-10

    def test_bad_grid_rejected(self, fig2_gate):
        """Unknown integrators and empty grids."""
        config, pulses = fig2_gate
        with pytest.raises(ConfigurationError):
            propagate(config, pulses, n_steps=16, integrator="euler")
        with pytest.raises(InvalidInputError):
            propagate(config, pulses, n_steps=0)

    @pytest.mark.slow
    def test_step_doubling_converged(self, fig2_gate, fig2_propagator):
        """Doubling the grid changes the computational block by < 1e-10."""
        config, pulses = fig2_gate
        finer = propagate(config, pulses, n_steps=2 * fig2_propagator.n_steps)
        space = HamiltonianModel.from_config(config).space
        idx = list(space.computational_indices)
        delta = finer.matrix[np.ix_(idx, idx)] - fig2_propagator.matrix[np.ix_(idx, idx)]
        assert np.max(np.abs(delta)) < 1e-10

    @pytest.mark.slow
    def test_matches_fine_first_order_oracle(self, fig2_gate, fig2_propagator):
        """Agrees with a 10^6-substep left-point exponential product."""
        config, pulses = fig2_gate
        model = HamiltonianModel.from_config(config)
        n_total, chunk = 1_000_000, 20_000
        dt = config.duration_us / n_total
        oracle = np.eye(model.space.dim, dtype=complex)
        for start in range(0, n_total, chunk):
            times = (start + np.arange(chunk)) * dt
            hamiltonians = model.stack(pulses, times)
            eigenvalues, eigenvectors = np.linalg.eigh(hamiltonians)
            steps = (eigenvectors * np.exp(-1j * eigenvalues * dt)[:, None, :]) @ np.conj(
                np.swapaxes(eigenvectors, -1, -2))
            oracle = ordered_product(steps) @ oracle
        idx = list(model.space.computational_indices)
        delta = oracle[np.ix_(idx, idx)] - fig2_propagator.matrix[np.ix_(idx, idx)]
        assert np.max(np.abs(delta)) < 1e-6


class TestUnwrapPhases:
    """Test population-aware phase unwrapping."""

    def test_continuous_ramp(self):
        """A steady ramp through several turns is recovered."""
        ramp = np.linspace(0.0, 6 * math.pi, 200)
        unwrapped = unwrap_phases(np.angle(np.exp(1j * ramp)), np.ones(200), 0.01)
        assert np.allclose(unwrapped, ramp, atol=1e-9)

    def test_branch_correction(self):
        """A jump of ~2pi between populated samples is removed."""
        unwrapped = unwrap_phases(np.array([0.0, 3.0, -3.0]), np.ones(3), 0.01)
        assert unwrapped[2] == pytest.approx(-3.0 + 2 * math.pi)

    def test_branch_held_through_dip(self):
        """No correction across low-population samples."""
        unwrapped = unwrap_phases(np.array([0.0, 3.0, -3.0]), np.array([1.0, 0.001, 1.0]), 0.01)
        assert np.array_equal(unwrapped, [0.0, 3.0, -3.0])


class TestTrajectory:
    """Test recorded state evolution."""

    def test_idle_gate(self):
        """Zero drive keeps |11> in place with zero phase."""
        config, pulses = _single_drive(0.25, omega_t=0.0)
        traj = trajectory(config, pulses, "11", n_steps=32)
        assert np.allclose(traj.population("11"), 1.0)
        assert np.allclose(traj.phase("11"), 0.0)
        assert traj.initial_label == "11"

    def test_norm_conserved(self, fig2_gate):
        """Populations sum to one along the gate."""
        config, pulses = fig2_gate
        traj = trajectory(config, pulses, "11", n_steps=1024)
        assert np.allclose(traj.populations.sum(axis=1), 1.0, atol=1e-9)
        assert traj.times[-1] == pytest.approx(0.25)

    def test_returns_to_computational_state(self, fig2_gate):
        """The published gate brings |11> back."""
        config, pulses = fig2_gate
        traj = trajectory(config, pulses, "11")
        assert traj.population("11")[-1] >= 1.0 - 4e-4

    def test_non_computational_start_rejected(self, fig2_gate):
        config, pulses = fig2_gate
        with pytest.raises(InvalidInputError):
            trajectory(config, pulses, "0r", n_steps=8)

    def test_initial_vector_checked(self, fig2_gate):
        """Shape and normalization of a custom start vector."""
        config, pulses = fig2_gate
        with pytest.raises(InvalidInputError):
            evolve_state(config, pulses, np.ones(3), n_steps=8)
        with pytest.raises(InvalidInputError, match="normalized"):
            evolve_state(config, pulses, np.ones(8), n_steps=8)

    def test_superposition_has_no_label(self, fig2_gate):
        config, pulses = fig2_gate
        psi = np.zeros(8, dtype=complex)
        psi[[1, 2]] = 1 / math.sqrt(2)
        assert evolve_state(config, pulses, psi, n_steps=8).initial_label is None

    def test_csv_round_trip(self, fig2_gate, tmp_path):
        """Amplitudes survive a CSV round trip."""
        config, pulses = fig2_gate
        traj = trajectory(config, pulses, "01", n_steps=64)
        path = traj.to_csv(tmp_path / "trajectory.csv")
        loaded = read_trajectory_csv(path)
        assert loaded.labels == traj.labels
        assert np.allclose(loaded.amplitudes, traj.amplitudes, rtol=0, atol=1e-15)
        assert np.allclose(loaded.times, traj.times, rtol=0, atol=1e-15)

    def test_unknown_label(self, fig2_gate):
        config, pulses = fig2_gate
        traj = trajectory(config, pulses, "01", n_steps=8)
        with pytest.raises(InvalidInputError):
            traj.population("rr")
