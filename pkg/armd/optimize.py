"""Derivative-free search over Fourier coefficients.

The objective is the phase-compensated CZ error at a reduced grid
resolution plus a boundary penalty; the best point of a search is
re-scored at full resolution before it is returned.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import differential_evolution, minimize

from armd.config import settings as toolkit_settings
from armd.exceptions import ConfigurationError, InvalidInputError
from armd.gates import GateReport, gate_report
from armd.logging_conf import log_restart_completed, log_search_completed
from armd.model import GateConfiguration, HamiltonianModel, Scheme
from armd.pulse import (
    DEFAULT_TAU_US, PulseSet, Waveform, WaveformKind, boundary_residual, zero_endpoint_reparam,
)
from armd.pulse_file import pulse_document
from armd.schemas import HistoryPoint, ProblemDocument, ResultDocument


logger = logging.getLogger(__name__)

ONE_PHOTON_BOUND = 400.0
TWO_PHOTON_BOUND = 3000.0

_DE_POPSIZE = 15
_DE_RECOMBINATION = 0.9
_DE_MUTATION = 0.7


def default_bounds(scheme: Scheme) -> Tuple[float, float]:
    bound = TWO_PHOTON_BOUND if scheme == Scheme.TWO_PHOTON_TWO_QUBIT else ONE_PHOTON_BOUND
    return -bound, bound


# =============================================================================
# PROBLEM AND SETTINGS
# =============================================================================

class OptimizationProblem(BaseModel):
    """What is searched and how candidates are scored."""
    model_config = ConfigDict(frozen=True)

    config: GateConfiguration
    base_pulses: Dict[str, Waveform] = Field(description="Pulses held fixed (and warm-start values)")
    free_pulses: Tuple[str, ...] = Field(description="Pulse names whose coefficients are searched")
    n_harmonics: int = Field(default=5, ge=0)
    tau_us: float = Field(default=DEFAULT_TAU_US, gt=0)
    bounds: Tuple[float, float] = Field(description="Per-coefficient box")
    enforce_zero_endpoints: bool = False
    boundary_weight: float = Field(default=1e-3, ge=0)
    bounds_policy: Literal["clip", "reject"] = "clip"
    search_n_steps: int = Field(default_factory=lambda: toolkit_settings.search_n_steps, ge=1)

    @model_validator(mode="after")
    def _check_problem(self):
        low, high = self.bounds
        if not (math.isfinite(low) and math.isfinite(high) and low < high):
            raise ValueError(f"bounds must be finite with low < high, got {self.bounds}")
        if not self.free_pulses:
            raise ValueError("at least one pulse must be free")
        if len(set(self.free_pulses)) != len(self.free_pulses):
            raise ValueError("free pulses must be distinct")
        wired = set(self.config.pulse_wiring.values())
        for name in self.free_pulses:
            if name not in wired:
                raise ValueError(f"free pulse '{name}' drives no coupling role")
        for name in wired - set(self.free_pulses):
            if name not in self.base_pulses:
                raise ValueError(f"fixed pulse '{name}' is missing from the base pulses")
        if self.enforce_zero_endpoints and self.n_harmonics == 0:
            raise ValueError("zero endpoints need at least one harmonic")
        return self

    @classmethod
    def for_config(cls, config: GateConfiguration, pulses: PulseSet,
                   free_pulses: Optional[Sequence[str]] = None, **options) -> "OptimizationProblem":
        """Problem with the scheme's default bounds; all modulated wired pulses free by default."""
        if free_pulses is None:
            free_pulses = [
                name for name in dict.fromkeys(config.pulse_wiring.values())
                if name in pulses and pulses[name].kind == WaveformKind.MODULATED
            ]
        options.setdefault("bounds", default_bounds(config.scheme))
        return cls(config=config, base_pulses=dict(pulses), free_pulses=tuple(free_pulses), **options)

    @property
    def chunk(self) -> int:
        return self.n_harmonics if self.enforce_zero_endpoints else self.n_harmonics + 1

    @property
    def dimension(self) -> int:
        return self.chunk * len(self.free_pulses)

    def pulses_from(self, x: np.ndarray) -> PulseSet:
        pulses = dict(self.base_pulses)
        for i, name in enumerate(self.free_pulses):
            segment = x[i * self.chunk:(i + 1) * self.chunk]
            if self.enforce_zero_endpoints:
                pulses[name] = zero_endpoint_reparam(segment, self.tau_us, self.n_harmonics)
            else:
                pulses[name] = Waveform.modulated(segment, self.tau_us)
        return pulses

    def coefficients_of(self, pulses: PulseSet) -> np.ndarray:
        """Search vector of the free pulses in ``pulses``."""
        parts = []
        for name in self.free_pulses:
            w = pulses.get(name)
            if w is None or w.kind != WaveformKind.MODULATED or w.n_harmonics != self.n_harmonics:
                raise InvalidInputError(
                    f"pulse '{name}' must be modulated with {self.n_harmonics} harmonics to seed a search"
                )
            coefficients = w.coefficients[1:] if self.enforce_zero_endpoints else w.coefficients
            parts.append(np.asarray(coefficients, dtype=float))
        return np.concatenate(parts)

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.bounds[0], self.bounds[1])


class SearchSettings(BaseModel):
    """How a search is run."""
    algorithm: Literal["nelder-mead", "differential-evolution"] = "nelder-mead"
    max_evals: int = Field(default=20000, ge=0, description="Objective evaluations per restart")
    n_restarts: int = Field(default=10, ge=1)
    seed: int = Field(default=0, ge=0)
    jobs: int = Field(default=1, ge=1)
    warm_start: Optional[Tuple[float, ...]] = Field(default=None, description="Start of restart 0")
    threshold: float = Field(default_factory=lambda: toolkit_settings.error_threshold, gt=0)
    verify_n_steps: int = Field(default_factory=lambda: toolkit_settings.default_n_steps, ge=1)


class OptimizationResult(BaseModel):
    """Best point of a search, re-scored at verification resolution."""
    best_vector: List[float]
    best_coefficients: Dict[str, List[float]]
    best_objective: float
    search_error: float
    report: GateReport
    verification_gap: float
    history: List[Tuple[int, float]]
    seed: int
    restarts_used: int
    best_restart: int
    n_evals: int
    algorithm: str
    threshold: float
    reached_threshold: bool


# =============================================================================
# OBJECTIVE
# =============================================================================

def objective(candidate: Sequence[float], problem: OptimizationProblem,
              model: Optional[HamiltonianModel] = None) -> float:
    """error + boundary_weight * sum(boundary_residual^2) (+ squared bound violation)."""
    x = np.asarray(candidate, dtype=float)
    if x.shape != (problem.dimension,):
        raise InvalidInputError(f"candidate has shape {x.shape}, problem expects ({problem.dimension},)")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("candidate has non-finite coefficients")

    clipped = problem.clip(x)
    violation = float(np.sum((x - clipped) ** 2))
    if violation > 0 and problem.bounds_policy == "reject":
        return 1.0 + violation

    pulses = problem.pulses_from(clipped)
    report = gate_report(problem.config, pulses, n_steps=problem.search_n_steps, model=model)
    penalty = 0.0
    if not problem.enforce_zero_endpoints:
        penalty = problem.boundary_weight * sum(boundary_residual(pulses[name]) ** 2 for name in problem.free_pulses)
    return report.error + penalty + violation


class _BudgetExhausted(Exception):
    pass


class _CountingObjective:
    """Budgeted objective that keeps its running minimum.

    Points already scored (the start point, which Nelder-Mead scores again as
    its first vertex) are answered from memory without spending budget.
    """

    def __init__(self, problem: OptimizationProblem, max_evals: int,
                 fn: Optional[Callable[[np.ndarray], float]] = None):
        self.problem = problem
        self.max_evals = max_evals
        self.fn = fn
        self.model = None if fn is not None else HamiltonianModel.from_config(problem.config)
        self.n_evals = 0
        self.best = math.inf
        self.best_x: Optional[np.ndarray] = None
        self.history: List[Tuple[int, float]] = []
        self._seen: Dict[bytes, float] = {}

    def __call__(self, x) -> float:
        x = np.array(x, dtype=float)
        key = x.tobytes()
        if key in self._seen:
            return self._seen[key]
        if self.n_evals >= self.max_evals:
            raise _BudgetExhausted()
        if self.fn is not None:
            value = float(self.fn(x))
        else:
            value = objective(x, self.problem, model=self.model)
        self.n_evals += 1
        self._seen[key] = value
        if value < self.best:
            self.best = value
            self.best_x = self.problem.clip(x)
            self.history.append((self.n_evals, value))
        return value


class _RestartOutcome(BaseModel):
    restart: int
    x: List[float]
    objective: float
    n_evals: int
    history: List[Tuple[int, float]]


def _nelder_mead(counter: _CountingObjective, x0: np.ndarray, bounds, budget: int,
                 initial_simplex: Optional[np.ndarray] = None):
    options = {"maxfev": budget, "xatol": 1e-8, "fatol": 1e-12, "adaptive": True}
    if initial_simplex is not None:
        options["initial_simplex"] = initial_simplex
    minimize(counter, x0, method="Nelder-Mead", bounds=bounds, options=options)


def _run_restart(problem: OptimizationProblem, settings: SearchSettings, restart: int,
                 seed: np.random.SeedSequence) -> _RestartOutcome:
    rng = np.random.default_rng(seed)
    low, high = problem.bounds
    x0 = rng.uniform(low, high, problem.dimension)
    if restart == 0 and settings.warm_start is not None:
        x0 = problem.clip(np.asarray(settings.warm_start, dtype=float))

    counter = _CountingObjective(problem, max(settings.max_evals, 1))
    bounds = [(low, high)] * problem.dimension
    try:
        counter(x0)
        if settings.algorithm == "nelder-mead":
            _nelder_mead(counter, x0, bounds, settings.max_evals)
        else:
            population = _DE_POPSIZE * problem.dimension
            differential_evolution(
                counter,
                bounds,
                strategy="rand1bin",
                popsize=_DE_POPSIZE,
                recombination=_DE_RECOMBINATION,
                mutation=_DE_MUTATION,
                maxiter=max(settings.max_evals // population, 1),
                polish=False,
                seed=int(seed.generate_state(1)[0]),
                x0=x0,
            )
    except _BudgetExhausted:
        pass

    log_restart_completed(restart, counter.best, counter.n_evals)
    return _RestartOutcome(
        restart=restart,
        x=counter.best_x.tolist(),
        objective=counter.best,
        n_evals=counter.n_evals,
        history=counter.history,
    )


def _run_restarts(problem: OptimizationProblem, settings: SearchSettings) -> List[_RestartOutcome]:
    n_restarts = 1 if settings.max_evals == 0 else settings.n_restarts
    seeds = np.random.SeedSequence(settings.seed).spawn(n_restarts)
    if settings.jobs > 1 and n_restarts > 1:
        with ProcessPoolExecutor(max_workers=min(settings.jobs, n_restarts)) as pool:
            futures = [
                pool.submit(_run_restart, problem, settings, restart, seeds[restart])
                for restart in range(n_restarts)
            ]
            return [future.result() for future in futures]
    return [_run_restart(problem, settings, restart, seeds[restart]) for restart in range(n_restarts)]


def _merge_history(outcomes: Sequence[_RestartOutcome]) -> List[Tuple[int, float]]:
    merged = []
    offset = 0
    for outcome in outcomes:
        merged.extend((offset + evaluation, value) for evaluation, value in outcome.history)
        offset += outcome.n_evals
    return merged


def _finish(problem: OptimizationProblem, settings: SearchSettings, outcomes: Sequence[_RestartOutcome],
            history: List[Tuple[int, float]]) -> OptimizationResult:
    best = min(outcomes, key=lambda outcome: (outcome.objective, outcome.restart))
    x = np.asarray(best.x)
    pulses = problem.pulses_from(x)
    search_error = gate_report(problem.config, pulses, n_steps=problem.search_n_steps).error
    report = gate_report(problem.config, pulses, n_steps=settings.verify_n_steps)
    reached = report.error < settings.threshold
    log_search_completed(best.objective, report.error, reached, best_restart=best.restart)
    return OptimizationResult(
        best_vector=best.x,
        best_coefficients={name: list(pulses[name].coefficients) for name in problem.free_pulses},
        best_objective=best.objective,
        search_error=search_error,
        report=report,
        verification_gap=abs(search_error - report.error),
        history=history,
        seed=settings.seed,
        restarts_used=len(outcomes),
        best_restart=best.restart,
        n_evals=sum(outcome.n_evals for outcome in outcomes),
        algorithm=settings.algorithm,
        threshold=settings.threshold,
        reached_threshold=reached,
    )


def search(problem: OptimizationProblem, settings: Optional[SearchSettings] = None) -> OptimizationResult:
    """Restarted search; reproducible for a fixed seed regardless of ``jobs``."""
    settings = settings or SearchSettings()
    if settings.warm_start is not None and len(settings.warm_start) != problem.dimension:
        raise InvalidInputError(
            f"warm start has {len(settings.warm_start)} values, problem expects {problem.dimension}"
        )
    logger.info(f"Searching {problem.dimension} coefficients with {settings.algorithm}, "
                f"{settings.n_restarts} restarts x {settings.max_evals} evaluations")
    outcomes = _run_restarts(problem, settings)
    return _finish(problem, settings, outcomes, _merge_history(outcomes))


def refine(start: Sequence[float], problem: OptimizationProblem, settings: Optional[SearchSettings] = None,
           step: float = 1.0,
           objective_fn: Optional[Callable[[np.ndarray], float]] = None) -> OptimizationResult:
    """Local Nelder-Mead polish from ``start``; never returns a worse point."""
    settings = settings or SearchSettings()
    x0 = np.asarray(start, dtype=float)
    if x0.shape != (problem.dimension,):
        raise InvalidInputError(f"start has shape {x0.shape}, problem expects ({problem.dimension},)")
    x0 = problem.clip(x0)
    low, high = problem.bounds
    simplex = np.vstack([x0, x0 + step * np.eye(problem.dimension)])

    counter = _CountingObjective(problem, max(settings.max_evals, 1), fn=objective_fn)
    try:
        counter(x0)
        _nelder_mead(counter, x0, [(low, high)] * problem.dimension, settings.max_evals, simplex)
    except _BudgetExhausted:
        pass

    outcome = _RestartOutcome(
        restart=0, x=counter.best_x.tolist(), objective=counter.best,
        n_evals=counter.n_evals, history=counter.history,
    )
    return _finish(problem, settings, [outcome], list(counter.history))


# =============================================================================
# DOCUMENTS
# =============================================================================

def problem_from_document(document: ProblemDocument, config: GateConfiguration,
                          pulses: PulseSet) -> Tuple[OptimizationProblem, SearchSettings]:
    """Problem and settings described by a problem document."""
    options = {
        "n_harmonics": document.n_harmonics,
        "tau_us": float(document.tau_us),
        "enforce_zero_endpoints": document.enforce_zero_endpoints,
        "boundary_weight": float(document.boundary_weight),
        "bounds_policy": document.bounds_policy,
    }
    if document.bounds is not None:
        options["bounds"] = (float(document.bounds[0]), float(document.bounds[1]))
    try:
        problem = OptimizationProblem.for_config(config, pulses, free_pulses=document.free_pulses, **options)
    except ValueError as exc:
        raise ConfigurationError(f"invalid optimization problem: {exc}")
    warm_start = None
    if document.warm_start:
        warm_start = tuple(problem.coefficients_of(pulses).tolist())
    search_settings = SearchSettings(
        algorithm=document.algorithm,
        max_evals=document.max_evals,
        n_restarts=document.n_restarts,
        seed=document.seed,
        warm_start=warm_start,
    )
    if document.threshold is not None:
        search_settings = search_settings.model_copy(update={"threshold": float(document.threshold)})
    return problem, search_settings


def result_document(result: OptimizationResult, problem: OptimizationProblem) -> ResultDocument:
    pulses = problem.pulses_from(np.asarray(result.best_vector))
    return ResultDocument(
        algorithm=result.algorithm,
        seed=result.seed,
        restarts_used=result.restarts_used,
        best_restart=result.best_restart,
        n_evals=result.n_evals,
        best_objective=result.best_objective,
        search_error=result.search_error,
        verification_gap=result.verification_gap,
        threshold=result.threshold,
        reached_threshold=result.reached_threshold,
        report=result.report.model_dump(),
        history=[HistoryPoint(evaluation=e, objective=v) for e, v in result.history],
        pulse_file=pulse_document(problem.config, pulses),
    )
