"""Genetic search for ban schedules under a terminal emission cap.

The genome is the integer control matrix ``J[z, t]`` with gene alphabet
``{-1, ..., D_z}``. Constraint handling is feasibility-first: a feasible
individual beats an infeasible one, feasible individuals compare on total
disposals, infeasible ones on cap excess. Remaining ties go to the
lexicographically smaller genome.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import LezError, ValidationError
from .fleet import SimulationTrace, simulate, simulate_batch
from .policy import relaxing_control, repair_control, validate_control
from .scenario import Scenario

logger = logging.getLogger(__name__)

__all__ = [
    "GaConfig",
    "EmissionTarget",
    "GenerationStats",
    "OptimizationOutcome",
    "reference_control",
    "no_lez_scenario",
    "reference_emissions",
    "fitness",
    "rank_key",
    "evolve",
    "pareto_sweep",
    "check_outcome",
    "targets_from_betas",
]


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 50
    generations: int = 1000
    crossover_rate: float = 0.5
    mutation_rate: float = 0.3
    tournament_size: int = 3
    elite_count: int = 1
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValidationError("population_size must be at least 2")
        if self.generations < 0:
            raise ValidationError("generations must be non-negative")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ValidationError("tournament_size must be positive")
        if not 0 <= self.elite_count < self.population_size:
            raise ValidationError("elite_count must satisfy 0 <= elite_count < population_size")
        if not 0 <= self.rng_seed < 2**64:
            raise ValidationError("rng_seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValidationError("workers must be positive")


@dataclass(frozen=True)
class EmissionTarget:
    """Terminal cap ``E(T) <= cap`` in tCO2, often given as a reduction ``beta``."""

    beta: float
    cap: float

    def __post_init__(self) -> None:
        if not self.cap > 0:
            raise ValidationError(f"emission cap must be positive, got {self.cap}")

    @classmethod
    def from_beta(cls, beta: float, reference_terminal: float) -> "EmissionTarget":
        if not 0 <= beta < 1:
            raise ValidationError(f"reduction fraction must lie in [0, 1), got {beta}")
        return cls(float(beta), reference_terminal * (1.0 - beta))

    @classmethod
    def from_cap(cls, cap: float, reference_terminal: float) -> "EmissionTarget":
        return cls(1.0 - cap / reference_terminal, float(cap))

    @classmethod
    def unbounded(cls) -> "EmissionTarget":
        return cls(-math.inf, math.inf)


def reference_control(scenario: Scenario) -> np.ndarray:
    """Keep every ban already in force, add none (``J = -1``), in repaired form."""
    J, _ = repair_control(
        relaxing_control(scenario.zones, scenario.horizon),
        scenario.initial_I,
        scenario.topology,
        scenario.max_age,
    )
    return J


def no_lez_scenario(scenario: Scenario) -> Scenario:
    """The same scenario with no ban ever in force in any zone."""
    return replace(scenario, name=f"{scenario.name}:no_lez", initial_I=(scenario.max_age + 1,) * scenario.zones)


def reference_emissions(scenario: Scenario) -> float:
    """Terminal emissions of the reference control in tCO2."""
    return simulate(scenario, reference_control(scenario)).terminal_emissions


def rank_key(objective: float, terminal: float, ok: bool, cap: float) -> tuple:
    """Sort key; smaller is better. Genome tie-break is appended by callers."""
    if not ok:
        return (2, math.inf, math.inf)
    violation = max(0.0, terminal - cap)
    if violation == 0.0:
        return (0, objective, 0.0)
    return (1, violation, objective)


def fitness(control: np.ndarray, scenario: Scenario, target: EmissionTarget) -> tuple[float, float]:
    """Total thermal disposals and excess over the cap of one feasible control."""
    try:
        trace = simulate(scenario, control)
    except LezError:
        return math.inf, math.inf
    return trace.total_disposals, max(0.0, trace.terminal_emissions - target.cap)


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_objective: float
    best_violation: float
    mean_objective: float
    feasible_fraction: float


@dataclass(frozen=True, eq=False)
class OptimizationOutcome:
    target: EmissionTarget
    best_control: np.ndarray
    trace: SimulationTrace
    objective_R: float
    terminal_E: float
    feasible: bool
    history: tuple[GenerationStats, ...] = ()
    evaluations: int = 0
    seed: int = 0
    adopted_from: float | None = None  # beta of the sweep run that supplied the control

    @property
    def violation(self) -> float:
        return max(0.0, self.terminal_E - self.target.cap)


# -- evaluation ------------------------------------------------------------------

_WORKER_SCENARIO: Scenario | None = None


def _init_worker(scenario: Scenario) -> None:
    global _WORKER_SCENARIO
    _WORKER_SCENARIO = scenario


def _eval_chunk(controls: np.ndarray):
    res = simulate_batch(_WORKER_SCENARIO, controls)
    return res.total_disposals, res.terminal_emissions, res.ok


class _Evaluator:
    """Memoised population evaluation, optionally spread over processes."""

    def __init__(self, scenario: Scenario, workers: int) -> None:
        self.scenario = scenario
        self.cache: dict[bytes, tuple[float, float, bool]] = {}
        self.workers = workers
        self.pool = (
            ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(scenario,)) if workers > 1 else None
        )
        self.evaluations = 0

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown()

    def __call__(self, pop: np.ndarray) -> list[tuple[float, float, bool]]:
        keys = [g.tobytes() for g in pop]
        todo: dict[bytes, int] = {}
        for i, k in enumerate(keys):
            if k not in self.cache and k not in todo:
                todo[k] = i
        if todo:
            batch = pop[list(todo.values())]
            if self.pool is None:
                parts = [_run_local(self.scenario, batch)]
            else:
                chunks = np.array_split(batch, min(self.workers, len(batch)))
                parts = list(self.pool.map(_eval_chunk, chunks))
            R = np.concatenate([p[0] for p in parts])
            E = np.concatenate([p[1] for p in parts])
            ok = np.concatenate([p[2] for p in parts])
            for j, k in enumerate(todo):
                self.cache[k] = (float(R[j]), float(E[j]), bool(ok[j]))
            self.evaluations += len(todo)
        return [self.cache[k] for k in keys]


def _run_local(scenario: Scenario, controls: np.ndarray):
    res = simulate_batch(scenario, controls)
    return res.total_disposals, res.terminal_emissions, res.ok


# -- genetic operators ------------------------------------------------------------


def _order(pop: np.ndarray, scores, cap: float) -> list[int]:
    keys = [rank_key(r, e, ok, cap) + (tuple(g.ravel().tolist()),) for g, (r, e, ok) in zip(pop, scores)]
    return sorted(range(len(pop)), key=keys.__getitem__)


def _initial_population(scenario: Scenario, config: GaConfig, rng: np.random.Generator) -> np.ndarray:
    Z, T = scenario.zones, scenario.horizon
    high = scenario.topology.slopes[:, None] + 1
    n_ref = config.population_size // 2
    near = np.full((n_ref, Z, T), -1, dtype=np.int64)
    redraw = rng.random((n_ref, Z, T)) < config.mutation_rate
    redraw[0] = False  # keep the exact reference individual
    near = np.where(redraw, rng.integers(-1, high, size=(n_ref, Z, T)), near)
    uniform = rng.integers(-1, high, size=(config.population_size - n_ref, Z, T))
    pop = np.concatenate([near, uniform])
    repaired, _ = repair_control(pop, scenario.initial_I, scenario.topology, scenario.max_age)
    return repaired


def _offspring(
    pop: np.ndarray, order: list[int], config: GaConfig, high: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    n = len(pop)
    position = np.empty(n, dtype=np.int64)
    position[order] = np.arange(n)
    need = config.population_size - config.elite_count
    shape = pop.shape[1:]
    children = []

    def tournament() -> np.ndarray:
        entrants = rng.integers(0, n, size=config.tournament_size)
        return pop[entrants[np.argmin(position[entrants])]]

    while len(children) < need:
        a, b = tournament().copy(), tournament().copy()
        if rng.random() < config.crossover_rate:
            swap = rng.random(shape) < 0.5
            a[swap], b[swap] = b[swap], a[swap]
        for child in (a, b):
            hit = rng.random(shape) < config.mutation_rate
            fresh = rng.integers(-1, high, size=shape)
            child[hit] = fresh[hit]
            children.append(child)
    return np.stack(children[:need])


def _best(pop: np.ndarray, scores, order: list[int], cap: float):
    i = order[0]
    r, e, ok = scores[i]
    return rank_key(r, e, ok, cap) + (tuple(pop[i].ravel().tolist()),), pop[i].copy()


def _stats(generation: int, pop_scores, order: list[int], cap: float) -> GenerationStats:
    r, e, ok = pop_scores[order[0]]
    finite = [s[0] for s in pop_scores if s[2]]
    feasible = [s for s in pop_scores if s[2] and s[1] <= cap]
    return GenerationStats(
        generation=generation,
        best_objective=r,
        best_violation=max(0.0, e - cap) if ok else math.inf,
        mean_objective=float(np.mean(finite)) if finite else math.inf,
        feasible_fraction=len(feasible) / len(pop_scores),
    )


def _outcome(
    scenario: Scenario,
    target: EmissionTarget,
    control: np.ndarray,
    history=(),
    evaluations: int = 0,
    seed: int = 0,
    adopted_from: float | None = None,
) -> OptimizationOutcome:
    control = np.array(control, dtype=np.int64)
    control.setflags(write=False)
    trace = simulate(scenario, control)
    return OptimizationOutcome(
        target=target,
        best_control=control,
        trace=trace,
        objective_R=trace.total_disposals,
        terminal_E=trace.terminal_emissions,
        feasible=trace.terminal_emissions <= target.cap,
        history=tuple(history),
        evaluations=evaluations,
        seed=seed,
        adopted_from=adopted_from,
    )


def evolve(scenario: Scenario, target: EmissionTarget, config: GaConfig = GaConfig()) -> OptimizationOutcome:
    """Minimise total LEZ disposals subject to ``E(T) <= target.cap``.

    The run is a pure function of ``(scenario, target, config)``: the random
    stream is consumed in a fixed order in this process and evaluations are
    keyed by population index, so ``workers > 1`` reproduces the serial
    result bit for bit. If no individual meets the cap, the least-violating
    one is returned with ``feasible=False``.
    """
    rng = np.random.default_rng(config.rng_seed)
    high = scenario.topology.slopes[:, None] + 1
    cap = target.cap
    evaluate = _Evaluator(scenario, config.workers)
    try:
        pop = _initial_population(scenario, config, rng)
        scores = evaluate(pop)
        order = _order(pop, scores, cap)
        history = [_stats(0, scores, order, cap)]
        best_key, best = _best(pop, scores, order, cap)
        for gen in range(1, config.generations + 1):
            elites = pop[order[: config.elite_count]]
            children = _offspring(pop, order, config, high, rng)
            children, _ = repair_control(children, scenario.initial_I, scenario.topology, scenario.max_age)
            pop = np.concatenate([elites, children])
            scores = evaluate(pop)
            order = _order(pop, scores, cap)
            history.append(_stats(gen, scores, order, cap))
            key, cand = _best(pop, scores, order, cap)
            if key < best_key:
                best_key, best = key, cand
        evaluations = evaluate.evaluations
    finally:
        evaluate.close()
    outcome = _outcome(scenario, target, best, history, evaluations, config.rng_seed)
    if not outcome.feasible:
        logger.warning("no feasible schedule found for cap %.6g tCO2 (beta=%.3f)", cap, target.beta)
    return outcome


def _pool_key(o: OptimizationOutcome, cap: float) -> tuple:
    base = rank_key(o.objective_R, o.terminal_E, True, cap)
    # among equally good feasible schedules prefer the cleaner one
    return base + (o.terminal_E, tuple(o.best_control.ravel().tolist()))


def pareto_sweep(
    scenario: Scenario, targets: Sequence[EmissionTarget], config: GaConfig = GaConfig()
) -> list[OptimizationOutcome]:
    """One independent run per target, then a shared-pool consolidation.

    Target ``i`` (in ascending ``beta`` order) is seeded with
    ``config.rng_seed + i``. Afterwards every target takes the best schedule
    found by any run under its own cap, which makes the returned front
    non-dominated: disposals never decrease and terminal emissions never
    increase with ``beta``.
    """
    targets = sorted(targets, key=lambda t: (t.beta, -t.cap))
    if len({(t.beta, t.cap) for t in targets}) != len(targets):
        raise ValidationError("targets must be distinct")
    runs = []
    for i, target in enumerate(targets):
        run_config = replace(config, rng_seed=(config.rng_seed + i) % 2**64)
        runs.append(evolve(scenario, target, run_config))
        logger.info(
            "target beta=%.2f: R=%.6g E(T)=%.6g feasible=%s",
            target.beta, runs[-1].objective_R, runs[-1].terminal_E, runs[-1].feasible,
        )
    out = []
    for run in runs:
        cap = run.target.cap
        pick = min(runs, key=lambda o: _pool_key(o, cap))
        if pick is run:
            out.append(run)
        else:
            out.append(
                replace(
                    _outcome(scenario, run.target, pick.best_control, run.history, run.evaluations, run.seed),
                    adopted_from=pick.target.beta,
                )
            )
    return out


def check_outcome(scenario: Scenario, outcome: OptimizationOutcome) -> list[str]:
    """Independent re-check of an outcome; returns a list of problems."""
    problems = []
    report = validate_control(outcome.best_control, scenario.initial_I, scenario.topology, scenario.max_age)
    if not report.feasible:
        problems.append(f"{len(report.violations)} schedule violation(s)")
    trace = simulate(scenario, outcome.best_control)
    if outcome.feasible and not trace.terminal_emissions <= outcome.target.cap:
        problems.append("flagged feasible but exceeds the cap on re-simulation")
    if trace.total_disposals != outcome.objective_R:
        problems.append("objective differs on re-simulation")
    return problems


def targets_from_betas(betas: Iterable[float], reference_terminal: float) -> list[EmissionTarget]:
    return [EmissionTarget.from_beta(b, reference_terminal) for b in betas]
