"""Exhaustive search over every control of a small instance.

Used as ground truth for the genetic search: the full box
``prod_z {-1..D_z}^T`` is enumerated, repaired, de-duplicated and simulated.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import EnumerationTooLarge
from .fleet import simulate_batch
from .ga import EmissionTarget, rank_key
from .policy import repair_control
from .scenario import Scenario

__all__ = ["TinyInstance", "OracleResult", "box_size", "enumerate_optimal"]

DEFAULT_BOUND = 10**7


@dataclass(frozen=True)
class TinyInstance:
    scenario: Scenario
    bound: int = DEFAULT_BOUND


@dataclass(frozen=True, eq=False)
class OracleResult:
    optimal_R: float  # math.inf when no control meets the cap
    argmin: tuple[np.ndarray, ...]  # repaired controls, lexicographically sorted
    candidates: int  # raw box size
    distinct: int  # repaired, de-duplicated controls evaluated
    min_violation: float

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.optimal_R)


def box_size(scenario: Scenario) -> int:
    return math.prod((int(d) + 2) ** scenario.horizon for d in scenario.topology.max_slope)


def _all_controls(scenario: Scenario) -> np.ndarray:
    Z, T = scenario.zones, scenario.horizon
    alphabets = [range(-1, int(d) + 1) for d in scenario.topology.max_slope for _ in range(T)]
    flat = np.array(list(itertools.product(*alphabets)), dtype=np.int64)
    return flat.reshape(-1, Z, T)


def enumerate_optimal(
    instance: TinyInstance,
    target: EmissionTarget,
    *,
    chunk: int = 4096,
    shuffle_seed: int | None = None,
) -> OracleResult:
    """Minimum total disposals over all controls meeting ``target``.

    Every minimiser is returned. ``shuffle_seed`` permutes the enumeration
    order, which must not change the result. Raises
    :class:`EnumerationTooLarge` before doing any work when the box exceeds
    ``instance.bound``.
    """
    scenario = instance.scenario
    size = box_size(scenario)
    if size > instance.bound:
        raise EnumerationTooLarge(size, instance.bound)
    raw = _all_controls(scenario)
    if shuffle_seed is not None:
        raw = raw[np.random.default_rng(shuffle_seed).permutation(len(raw))]
    repaired, _ = repair_control(raw, scenario.initial_I, scenario.topology, scenario.max_age)
    distinct = np.unique(repaired.reshape(len(repaired), -1), axis=0).reshape((-1,) + repaired.shape[1:])

    best_key = (3,)
    winners: list[np.ndarray] = []
    min_violation = math.inf
    for start in range(0, len(distinct), chunk):
        part = distinct[start : start + chunk]
        res = simulate_batch(scenario, part)
        for g, r, e, ok in zip(part, res.total_disposals, res.terminal_emissions, res.ok):
            key = rank_key(float(r), float(e), bool(ok), target.cap)
            if ok:
                min_violation = min(min_violation, max(0.0, float(e) - target.cap))
            if key[0] != 0:
                continue
            if key < best_key:
                best_key, winners = key, [g]
            elif key == best_key:
                winners.append(g)
    winners.sort(key=lambda g: tuple(g.ravel().tolist()))
    optimal = best_key[1] if best_key[0] == 0 else math.inf
    return OracleResult(optimal, tuple(winners), size, len(distinct), min_violation)
