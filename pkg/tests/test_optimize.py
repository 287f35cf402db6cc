"""Tests for the search objective, restarted search and local refinement."""
import json

import numpy as np
import pytest

from armd.config import settings as toolkit_settings
from armd.exceptions import InvalidInputError
from armd.gates import gate_report
from armd.model import GateConfiguration, Scheme
from armd.optimize import (
    ONE_PHOTON_BOUND, TWO_PHOTON_BOUND, OptimizationProblem, SearchSettings, default_bounds, objective,
    problem_from_document, refine, result_document, search,
)
from armd.presets import preset
from armd.pulse import boundary_residual
from armd.pulse_file import dump_document, parse_problem_file, parse_pulse_file, serialize_pulse_file


@pytest.fixture(scope="module")
def fig2_problem():
    config, pulses = preset("fig2")
    return OptimizationProblem.for_config(config, pulses, search_n_steps=256)


@pytest.fixture
def quick_settings():
    """A tiny budget that still exercises every code path."""
    return SearchSettings(max_evals=8, n_restarts=2, seed=7, verify_n_steps=256)


class TestProblem:
    """Test problem construction."""

    def test_defaults(self, fig2_problem):
        """All modulated wired pulses are free within the one-photon box."""
        assert fig2_problem.free_pulses == ("omega_1", "omega_2")
        assert fig2_problem.dimension == 12
        assert fig2_problem.bounds == (-ONE_PHOTON_BOUND, ONE_PHOTON_BOUND)

    def test_two_photon_bounds(self):
        assert default_bounds(Scheme.TWO_PHOTON_TWO_QUBIT) == (-TWO_PHOTON_BOUND, TWO_PHOTON_BOUND)

    def test_constant_pulses_stay_fixed(self):
        """Constant Stokes fields are not searched by default."""
        config, pulses = preset("fig3")
        problem = OptimizationProblem.for_config(config, pulses)
        assert set(problem.free_pulses) == {"omega_cp", "omega_tp"}

    def test_invalid_problems(self):
        """Bad bounds and unwired free pulses are rejected."""
        config, pulses = preset("fig2")
        with pytest.raises(ValueError):
            OptimizationProblem.for_config(config, pulses, bounds=(10.0, -10.0))
        with pytest.raises(ValueError):
            OptimizationProblem.for_config(config, pulses, free_pulses=["omega_9"])

    def test_coefficients_round_trip(self, fig2_problem):
        """pulses_from inverts coefficients_of."""
        _, pulses = preset("fig2")
        x = fig2_problem.coefficients_of(pulses)
        rebuilt = fig2_problem.pulses_from(x)
        assert rebuilt["omega_1"] == pulses["omega_1"]

    def test_zero_endpoint_vectors(self):
        """Every candidate of a reparametrized search has zero residual."""
        config, pulses = preset("fig2")
        problem = OptimizationProblem.for_config(config, pulses, enforce_zero_endpoints=True)
        assert problem.dimension == 10
        rng = np.random.default_rng(2)
        for _ in range(10):
            candidate = problem.pulses_from(rng.uniform(-400, 400, problem.dimension))
            assert all(boundary_residual(candidate[name]) == 0.0 for name in problem.free_pulses)


class TestObjective:
    """Test candidate scoring."""

    def test_published_point(self, fig2_problem):
        """The published coefficients score near zero."""
        _, pulses = preset("fig2")
        value = objective(fig2_problem.coefficients_of(pulses), fig2_problem)
        assert value < 1e-3

    def test_zero_candidate(self, fig2_problem):
        """All-zero coefficients give the identity: 0.4."""
        assert objective(np.zeros(12), fig2_problem) == pytest.approx(0.4, abs=1e-9)

    def test_boundary_penalty(self, fig2_problem):
        """The penalty adds boundary_weight x residual^2 per free pulse."""
        x = np.zeros(12)
        x[0] = 1.0
        pulses = fig2_problem.pulses_from(x)
        error = gate_report(fig2_problem.config, pulses, n_steps=256).error
        assert objective(x, fig2_problem) == pytest.approx(error + 1e-3 * 1.0, abs=1e-12)

    def test_clip_policy(self, fig2_problem):
        """Out-of-box candidates are clipped and charged the squared violation."""
        x = np.zeros(12)
        x[3] = ONE_PHOTON_BOUND + 10.0
        clipped = fig2_problem.clip(x)
        assert objective(x, fig2_problem) == pytest.approx(objective(clipped, fig2_problem) + 100.0, abs=1e-9)

    def test_reject_policy(self):
        """Rejected candidates score 1 + violation without simulation."""
        config, pulses = preset("fig2")
        problem = OptimizationProblem.for_config(config, pulses, bounds_policy="reject")
        x = np.zeros(12)
        x[0] = ONE_PHOTON_BOUND + 2.0
        assert objective(x, problem) == pytest.approx(5.0)

    def test_wrong_dimension(self, fig2_problem):
        with pytest.raises(InvalidInputError):
            objective(np.zeros(5), fig2_problem)
        with pytest.raises(InvalidInputError):
            objective(np.full(12, np.nan), fig2_problem)


class TestSearch:
    """Test restarted search."""

    def test_reproducible(self, fig2_problem, quick_settings):
        """Identical seeds give identical results."""
        first = search(fig2_problem, quick_settings)
        second = search(fig2_problem, quick_settings)
        assert first.best_vector == second.best_vector
        assert first.history == second.history
        assert first.best_objective == second.best_objective

    def test_parallel_matches_serial(self, fig2_problem, quick_settings):
        """Worker processes do not change the result."""
        serial = search(fig2_problem, quick_settings)
        parallel = search(fig2_problem, quick_settings.model_copy(update={"jobs": 2}))
        assert parallel.best_vector == serial.best_vector
        assert parallel.history == serial.history

    def test_budget_and_history(self, fig2_problem, quick_settings):
        """Evaluations respect the budget; history records improvements in order."""
        result = search(fig2_problem, quick_settings)
        assert result.restarts_used == 2
        assert result.n_evals <= quick_settings.max_evals * quick_settings.n_restarts
        evaluations = [e for e, _ in result.history]
        values = [v for _, v in result.history]
        assert evaluations == sorted(evaluations)
        assert np.all(np.diff(np.minimum.accumulate(values)) <= 0)
        assert result.best_objective == pytest.approx(min(values))

    def test_zero_budget_returns_warm_start(self, fig2_problem):
        """max_evals = 0 scores the warm start once."""
        _, pulses = preset("fig2")
        start = tuple(fig2_problem.coefficients_of(pulses).tolist())
        result = search(fig2_problem, SearchSettings(max_evals=0, warm_start=start, verify_n_steps=256))
        assert result.restarts_used == 1
        assert result.n_evals == 1
        assert result.best_vector == list(start)

    def test_warm_start_length_checked(self, fig2_problem):
        with pytest.raises(InvalidInputError):
            search(fig2_problem, SearchSettings(max_evals=1, warm_start=(1.0, 2.0)))

    def test_differential_evolution(self, fig2_problem):
        """The population search honours the budget."""
        settings = SearchSettings(algorithm="differential-evolution", max_evals=20, n_restarts=1,
                                  seed=3, verify_n_steps=256)
        result = search(fig2_problem, settings)
        assert result.algorithm == "differential-evolution"
        assert 1 <= result.n_evals <= 20

    def test_verification_fields(self, fig2_problem):
        """The best point is re-scored at verification resolution."""
        _, pulses = preset("fig2")
        start = tuple(fig2_problem.coefficients_of(pulses).tolist())
        result = search(fig2_problem, SearchSettings(max_evals=0, warm_start=start, verify_n_steps=1024))
        assert result.verification_gap == pytest.approx(abs(result.search_error - result.report.error))
        assert result.reached_threshold == (result.report.error < result.threshold)


class TestRefine:
    """Test local refinement."""

    def test_optimum_is_kept(self, fig2_problem):
        """Starting at the minimum of a quadratic returns it unchanged."""
        target = np.linspace(-3.0, 3.0, 12)
        result = refine(target, fig2_problem, SearchSettings(max_evals=200, verify_n_steps=64),
                        objective_fn=lambda x: float(np.sum((x - target) ** 2)))
        assert result.best_vector == target.tolist()
        assert result.best_objective == 0.0

    def test_never_worse(self, fig2_problem):
        """Refinement does not increase the objective of its start."""
        _, pulses = preset("fig2")
        start = fig2_problem.coefficients_of(pulses)
        result = refine(start, fig2_problem, SearchSettings(max_evals=30, verify_n_steps=256))
        assert result.best_objective <= objective(start, fig2_problem)

    def test_start_scored_once(self, fig2_problem):
        """The start point costs one evaluation even though the simplex revisits it."""
        start = np.linspace(-3.0, 3.0, 12)
        visited = []

        def quadratic(x):
            visited.append(x.tobytes())
            return float(np.sum(x ** 2))

        result = refine(start, fig2_problem, SearchSettings(max_evals=40, verify_n_steps=64), objective_fn=quadratic)
        assert visited.count(start.tobytes()) == 1
        assert len(visited) == result.n_evals
        assert len(set(visited)) == len(visited)

    @pytest.mark.slow
    def test_recovers_from_perturbation(self):
        """The published point with uniform noise of amplitude 1 per coefficient is refined back below 1e-4."""
        config, pulses = preset("fig2")
        problem = OptimizationProblem.for_config(config, pulses, search_n_steps=1024)
        start = problem.coefficients_of(pulses) + np.random.default_rng(4).uniform(-1.0, 1.0, 12)
        result = refine(start, problem, SearchSettings(max_evals=8000))
        assert result.report.error < 1e-4

    @pytest.mark.slow
    def test_buffer_gate_refinement(self):
        """Local refinement from the buffer-atom preset lowers its error and reports the drift."""
        config, pulses = preset("fig5")
        problem = OptimizationProblem.for_config(config, pulses, search_n_steps=1024)
        start = problem.coefficients_of(pulses)
        result = refine(start, problem, SearchSettings(max_evals=3000))
        assert result.best_objective < objective(start, problem)
        assert result.report.error < gate_report(config, pulses).error
        drift = np.abs(np.asarray(result.best_vector) - start) / np.maximum(np.abs(start), 1.0)
        assert np.all(np.isfinite(drift))


class TestDocuments:
    """Test problem and result documents."""

    def test_problem_from_document(self):
        """Document fields map onto problem and settings."""
        config, pulses = preset("fig2")
        data = json.loads(serialize_pulse_file(config, pulses))
        data.update({"seed": 5, "lambda": "0.01", "warm_start": True, "bounds": ["-100", "100"]})
        document, config, pulses = parse_problem_file(json.dumps(data))
        problem, settings = problem_from_document(document, config, pulses)
        assert problem.boundary_weight == 0.01
        assert problem.bounds == (-100.0, 100.0)
        assert settings.seed == 5
        assert settings.warm_start[0] == 88.01

    def test_threshold_defaults_to_setting(self, monkeypatch):
        """A problem file without a threshold takes the configured one."""
        monkeypatch.setattr(toolkit_settings, "error_threshold", 3e-4)
        config, pulses = preset("fig2")
        document, config, pulses = parse_problem_file(serialize_pulse_file(config, pulses))
        assert document.threshold is None
        _, settings = problem_from_document(document, config, pulses)
        assert settings.threshold == 3e-4

    def test_explicit_threshold(self):
        config, pulses = preset("fig2")
        data = json.loads(serialize_pulse_file(config, pulses))
        data["threshold"] = "0.002"
        document, config, pulses = parse_problem_file(json.dumps(data))
        _, settings = problem_from_document(document, config, pulses)
        assert settings.threshold == 0.002

    def test_result_embeds_pulse_file(self, fig2_problem):
        """The result document carries a loadable pulse file."""
        _, pulses = preset("fig2")
        start = tuple(fig2_problem.coefficients_of(pulses).tolist())
        result = search(fig2_problem, SearchSettings(max_evals=0, warm_start=start, verify_n_steps=256))
        document = result_document(result, fig2_problem)
        config, loaded = parse_pulse_file(dump_document(document.pulse_file))
        assert config == fig2_problem.config
        assert loaded["omega_1"] == pulses["omega_1"]


class TestConfiguredDefaults:
    """Test that search defaults follow the toolkit settings."""

    def test_search_grid(self, monkeypatch):
        monkeypatch.setattr(toolkit_settings, "search_n_steps", 512)
        config, pulses = preset("fig2")
        assert OptimizationProblem.for_config(config, pulses).search_n_steps == 512

    def test_threshold_and_verification_grid(self, monkeypatch):
        monkeypatch.setattr(toolkit_settings, "error_threshold", 5e-5)
        monkeypatch.setattr(toolkit_settings, "default_n_steps", 2048)
        settings = SearchSettings()
        assert settings.threshold == 5e-5
        assert settings.verify_n_steps == 2048

    def test_explicit_values_win(self, monkeypatch):
        monkeypatch.setattr(toolkit_settings, "search_n_steps", 512)
        config, pulses = preset("fig2")
        problem = OptimizationProblem.for_config(config, pulses, search_n_steps=128)
        assert problem.search_n_steps == 128


@pytest.mark.slow
class TestSynthesis:
    """Gates found from random starting points, without the published coefficients."""

    def test_one_photon_gate(self):
        config, pulses = preset("fig2")
        problem = OptimizationProblem.for_config(config, pulses)
        result = search(problem, SearchSettings(max_evals=20000, n_restarts=10, seed=11, jobs=8))
        assert result.report.error < 1e-4
        assert result.reached_threshold

    def test_two_photon_gate(self):
        config, pulses = preset("fig3")
        config = GateConfiguration(**{**config.model_dump(), "delta_2pi_mhz": 1000.0})
        problem = OptimizationProblem.for_config(config, pulses)
        result = search(problem, SearchSettings(max_evals=20000, n_restarts=10, seed=12, jobs=8))
        assert result.report.error < 1e-4

    def test_buffer_gate_warm_start(self):
        """A warm-started search improves on the buffer-atom preset."""
        config, pulses = preset("fig5")
        problem = OptimizationProblem.for_config(config, pulses)
        start = tuple(problem.coefficients_of(pulses).tolist())
        result = search(problem, SearchSettings(max_evals=3000, n_restarts=4, seed=13, jobs=4,
                                                warm_start=start))
        assert result.report.error < gate_report(config, pulses).error
