"""Ban schedules, controls and the behavioural disposal function.

A ban schedule ``I[z, t]`` holds the minimum banned age per zone and year,
with ``A + 1`` meaning no ban. The control ``J[z, t]`` (t = 1..T, stored in
column ``t - 1``) is the year-over-year decrease of ``I``: ``J = -1`` lets
the banned cohorts age by one year without new restrictions, ``J = D[z]`` is
the steepest tightening allowed in zone ``z``.

Controls are plain integer arrays of shape ``(Z, T)``; every function here
also accepts a leading batch axis ``(B, Z, T)`` so that populations can be
handled at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PolicyViolation, StructuralError, ValidationError

__all__ = [
    "BehaviorParams",
    "ZoneTopology",
    "Violation",
    "FeasibilityReport",
    "advance_schedule",
    "ban_indicator",
    "neighbor_disposal_ratio",
    "disposal_ratio",
    "disposal_ratios",
    "validate_control",
    "repair_control",
    "relaxing_control",
]


@dataclass(frozen=True)
class BehaviorParams:
    """Disposal behaviour of vehicle owners.

    ``K_M`` applies to banned vehicles, ``K_m`` to unbanned vehicles in a zone
    with an active LEZ, ``K_lim`` per banning neighbour (capped at
    ``K_lim_max``) to vehicles banned next door but not locally.
    """

    K_M: float = 0.9
    K_m: float = 0.05
    K_lim: float = 0.2
    K_lim_max: float = 0.6

    def validate(self, *, allow_zero_baseline: bool = True) -> None:
        """Check ``0 < K_m < K_lim < K_lim_max < K_M < 1``.

        ``K_m = 0`` is accepted when ``allow_zero_baseline`` is set; the
        exhaustive-search instances rely on it to make the no-ban baseline
        exactly disposal-free.
        """
        values = (self.K_M, self.K_m, self.K_lim, self.K_lim_max)
        if not all(np.isfinite(v) for v in values):
            raise ValidationError("behavior parameters must be finite")
        low_ok = self.K_m >= 0 if allow_zero_baseline else self.K_m > 0
        if not (low_ok and self.K_m < self.K_lim < self.K_lim_max < self.K_M < 1):
            raise ValidationError(
                "behavior parameters must satisfy 0 < K_m < K_lim < K_lim_max < K_M < 1, "
                f"got K_m={self.K_m}, K_lim={self.K_lim}, "
                f"K_lim_max={self.K_lim_max}, K_M={self.K_M}"
            )


@dataclass(frozen=True)
class ZoneTopology:
    """Zones, their adjacency and the per-zone maximum tightening slope ``D``."""

    neighbors: tuple[tuple[int, ...], ...]
    max_slope: tuple[int, ...]
    names: tuple[str, ...] = ()
    adjacency: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        z = len(self.neighbors)
        if z == 0:
            raise ValidationError("topology needs at least one zone")
        if len(self.max_slope) != z:
            raise StructuralError(f"max_slope has {len(self.max_slope)} entries for {z} zones")
        if self.names and len(self.names) != z:
            raise StructuralError(f"names has {len(self.names)} entries for {z} zones")
        adj = np.zeros((z, z), dtype=np.int64)
        for i, nbrs in enumerate(self.neighbors):
            for j in nbrs:
                if not 0 <= j < z:
                    raise ValidationError(f"zone {i} lists unknown neighbour {j}")
                if j == i:
                    raise ValidationError(f"zone {i} lists itself as a neighbour")
                adj[i, j] = 1
        if not np.array_equal(adj, adj.T):
            raise ValidationError("neighbour relation must be symmetric")
        if any(int(d) != d or d < 0 for d in self.max_slope):
            raise ValidationError("max_slope entries must be non-negative integers")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def zones(self) -> int:
        return len(self.neighbors)

    @property
    def slopes(self) -> np.ndarray:
        return np.asarray(self.max_slope, dtype=np.int64)

    @classmethod
    def rings(cls, max_slope: Sequence[int], names: Sequence[str] = ()) -> "ZoneTopology":
        """Concentric rings: ring ``i`` touches rings ``i - 1`` and ``i + 1``."""
        z = len(max_slope)
        nbrs = tuple(tuple(j for j in (i - 1, i + 1) if 0 <= j < z) for i in range(z))
        return cls(nbrs, tuple(int(d) for d in max_slope), tuple(names))


def advance_schedule(
    prev_I: np.ndarray,
    J_t: np.ndarray,
    slopes: np.ndarray,
    max_age: int,
    *,
    strict: bool = False,
) -> np.ndarray:
    """Return ``I(t) = I(t-1) - J(t)`` kept inside the feasible window.

    The result is clipped to ``[max(0, prev - D), min(A + 1, prev + 1)]``.
    Riding up past ``A + 1`` is the ordinary saturation of the no-ban
    sentinel and is never reported. With ``strict`` set, any other clipping
    raises :class:`PolicyViolation` instead.
    """
    prev_I = np.asarray(prev_I, dtype=np.int64)
    J_t = np.asarray(J_t, dtype=np.int64)
    slopes = np.asarray(slopes, dtype=np.int64)
    raw = prev_I - J_t
    lower = np.maximum(0, prev_I - slopes)
    upper = np.minimum(max_age + 1, prev_I + 1)
    out = np.clip(raw, lower, upper)
    if strict:
        bad = (raw != out) & ~((raw > max_age + 1) & (J_t >= -1))
        if np.any(bad):
            raise PolicyViolation(
                f"control {J_t[bad].tolist()} leaves the feasible window "
                f"from ban ages {prev_I[bad].tolist()}"
            )
    return out


def ban_indicator(I_t: np.ndarray, max_age: int) -> np.ndarray:
    """Ban flags ``Pi[..., a, z] = 1`` iff ``I[..., z] <= a`` for ``a = 0..A``."""
    I_t = np.asarray(I_t)
    ages = np.arange(max_age + 1).reshape((max_age + 1, 1))
    return (I_t[..., None, :] <= ages).astype(np.int64)


def neighbor_disposal_ratio(neighbor_bans, params: BehaviorParams):
    """Neighbour pressure ``min(K_lim * count, K_lim_max)``."""
    return np.minimum(params.K_lim * np.asarray(neighbor_bans), params.K_lim_max)


def disposal_ratio(
    banned: int,
    neighbor_bans: int,
    params: BehaviorParams,
    *,
    lez_active: bool = True,
) -> float:
    """Disposal ratio of one thermal cohort.

    Banned vehicles go at ``K_M``. Unbanned vehicles with at least one banning
    neighbour feel the capped neighbour pressure; otherwise they go at the
    baseline ``K_m``, which only exists where the zone runs an LEZ.
    """
    if banned not in (0, 1):
        raise ValidationError(f"ban flag must be 0 or 1, got {banned}")
    if neighbor_bans < 0:
        raise ValidationError("neighbour ban count must be non-negative")
    params.validate()
    no_pressure = 1 if neighbor_bans == 0 else 0
    baseline = params.K_m if lez_active else 0.0
    k_nu = float(neighbor_disposal_ratio(neighbor_bans, params))
    return params.K_M * banned + (no_pressure * baseline + (1 - no_pressure) * k_nu) * (1 - banned)


def disposal_ratios(
    I_t: np.ndarray,
    topology: ZoneTopology,
    params: BehaviorParams,
    max_age: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ban flags and thermal disposal ratios for one year.

    ``I_t`` has shape ``(..., Z)``; both results have shape ``(..., A+1, Z)``.
    Age 0 is never disposed of in its purchase year, so ``sigma[..., 0, :]``
    is zero whatever the schedule.
    """
    pi = ban_indicator(I_t, max_age)
    counts = pi @ topology.adjacency.T
    active = (np.asarray(I_t) <= max_age)[..., None, :]
    k_nu = neighbor_disposal_ratio(counts, params)
    unbanned = np.where(counts > 0, k_nu, np.where(active, params.K_m, 0.0))
    sigma = np.where(pi == 1, params.K_M, unbanned)
    sigma[..., 0, :] = 0.0
    return pi, sigma


@dataclass(frozen=True)
class Violation:
    kind: str  # "box" | "reauthorization" | "slope" | "range"
    zone: int
    step: int  # 1-based year index t
    detail: str


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...]
    schedule: np.ndarray  # (Z, T + 1), column 0 is I(0)

    @property
    def feasible(self) -> bool:
        return not self.violations


def _check_shapes(J: np.ndarray, I0: np.ndarray, topology: ZoneTopology) -> None:
    if J.ndim < 2 or J.shape[-2] != topology.zones:
        raise StructuralError(f"control shape {J.shape} does not match {topology.zones} zones")
    if I0.shape != (topology.zones,):
        raise StructuralError(f"initial schedule shape {I0.shape} does not match {topology.zones} zones")


def validate_control(
    J: np.ndarray,
    I0: Sequence[int],
    topology: ZoneTopology,
    max_age: int,
) -> FeasibilityReport:
    """List every constraint a control breaks and return its induced schedule.

    Violations are data: the walk continues from the schedule clipped into
    ``0..A+1`` so that later years are judged on their own step.
    """
    J = np.asarray(J, dtype=np.int64)
    I0 = np.asarray(I0, dtype=np.int64)
    _check_shapes(J, I0, topology)
    if J.ndim != 2:
        raise StructuralError("validate_control takes a single (Z, T) control")
    z_count, horizon = J.shape
    slopes = topology.slopes
    sched = np.empty((z_count, horizon + 1), dtype=np.int64)
    sched[:, 0] = I0
    found: list[Violation] = []
    for z in range(z_count):
        if not 0 <= I0[z] <= max_age + 1:
            found.append(Violation("range", z, 0, f"I(0)={I0[z]} outside 0..{max_age + 1}"))
    for t in range(horizon):
        for z in range(z_count):
            prev = sched[z, t]
            j = J[z, t]
            raw = prev - j
            if not -1 <= j <= slopes[z]:
                found.append(Violation("box", z, t + 1, f"J={j} outside [-1, {slopes[z]}]"))
            if raw > prev + 1 and raw <= max_age + 1:
                found.append(Violation("reauthorization", z, t + 1, f"I rises {prev} -> {raw}"))
            if raw < prev - slopes[z]:
                found.append(Violation("slope", z, t + 1, f"I drops {prev} -> {raw}, D={slopes[z]}"))
            if raw < 0:
                found.append(Violation("range", z, t + 1, f"I={raw} below 0"))
            sched[z, t + 1] = min(max(raw, 0), max_age + 1)
    return FeasibilityReport(tuple(found), sched)


def repair_control(
    J: np.ndarray,
    I0: Sequence[int],
    topology: ZoneTopology,
    max_age: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Map any integer control onto the nearest feasible one.

    Genes are first clipped to ``[-1, D_z]``; the induced schedule is then
    clipped year by year into ``[max(0, prev - D_z), min(A + 1, prev + 1)]``
    and the control back-solved as ``prev - I``. Works on ``(Z, T)`` or
    ``(B, Z, T)`` input and returns ``(J_repaired, I)`` with ``I`` of shape
    ``(..., Z, T + 1)``.
    """
    J = np.asarray(J, dtype=np.int64)
    I0 = np.asarray(I0, dtype=np.int64)
    _check_shapes(J, I0, topology)
    slopes = topology.slopes
    boxed = np.clip(J, -1, slopes[:, None])
    horizon = J.shape[-1]
    sched = np.empty(J.shape[:-1] + (horizon + 1,), dtype=np.int64)
    sched[..., 0] = np.clip(I0, 0, max_age + 1)
    for t in range(horizon):
        sched[..., t + 1] = advance_schedule(sched[..., t], boxed[..., t], slopes, max_age)
    repaired = sched[..., :-1] - sched[..., 1:]
    return repaired, sched


def relaxing_control(zones: int, horizon: int) -> np.ndarray:
    """The no-new-restriction control ``J = -1`` everywhere."""
    return np.full((zones, horizon), -1, dtype=np.int64)
