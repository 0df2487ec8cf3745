"""Annual fleet recursion: survival, LEZ disposal, renewal and emissions.

Stocks are real-valued tensors ``S[v, a, z]`` with ``v = 0`` thermal and
``v = 1`` electric, ``a = 0..A`` (``A`` absorbs every older vehicle) and
``z = 0..Z-1``. Year index ``t = 0`` is the base year; the recursion runs
``t = 1..T``.

All reductions go through :func:`_ordered_sum`, which adds slices one at a
time, so a cohort evaluated alone or inside a population batch produces
bit-identical numbers.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import FleetConsistencyError, StructuralError, ValidationError
from .policy import disposal_ratios, repair_control, validate_control

if TYPE_CHECKING:
    from .scenario import Scenario

logger = logging.getLogger(__name__)

THERMAL, ELECTRIC = 0, 1
GRAMS_PER_TONNE = 1e6

__all__ = [
    "THERMAL",
    "ELECTRIC",
    "FleetState",
    "AnnualFlows",
    "ExogenousInputs",
    "SimulationTrace",
    "BatchResult",
    "survivors_split",
    "new_vehicle_count",
    "purchase_probabilities",
    "split_new_purchases",
    "annual_emissions",
    "simulate",
    "simulate_batch",
]


def _frozen(x, dtype=np.float64) -> np.ndarray:
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _ordered_sum(x: np.ndarray, axis: int) -> np.ndarray:
    xs = np.moveaxis(x, axis, 0)
    acc = xs[0].copy()
    for i in range(1, xs.shape[0]):
        acc += xs[i]
    return acc


@dataclass(frozen=True, eq=False)
class FleetState:
    year: int
    stock: np.ndarray  # (2, A+1, Z)

    def __post_init__(self) -> None:
        stock = _frozen(self.stock)
        if stock.ndim != 3 or stock.shape[0] != 2 or stock.shape[1] < 2:
            raise StructuralError(f"stock must have shape (2, A+1, Z), got {stock.shape}")
        if not np.all(np.isfinite(stock)) or np.any(stock < 0):
            raise ValidationError("stock entries must be finite and non-negative")
        object.__setattr__(self, "stock", stock)

    @property
    def max_age(self) -> int:
        return self.stock.shape[1] - 1

    @property
    def zones(self) -> int:
        return self.stock.shape[2]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FleetState):
            return NotImplemented
        return self.year == other.year and np.array_equal(self.stock, other.stock)


@dataclass(frozen=True, eq=False)
class AnnualFlows:
    old: np.ndarray  # (2, A+1, Z), age 0 row is zero
    disposed: np.ndarray  # (2, A+1, Z)
    new_total: np.ndarray  # (Z,)
    new_by_type: np.ndarray  # (2, Z)


@dataclass(frozen=True, eq=False)
class ExogenousInputs:
    """Scenario-driven series.

    Shapes: ``demand (Z, T+1)`` in vkm/year, ``mileage (T+1,)`` in km per
    vehicle per year, ``survival (A,)`` for ages ``1..A``,
    ``emission_factor (A+1, T+1)`` thermal gCO2/km by age and year,
    ``utilities (2, T+1)`` for thermal and electric purchases.
    """

    demand: np.ndarray
    mileage: np.ndarray
    survival: np.ndarray
    emission_factor: np.ndarray
    utilities: np.ndarray
    logit_scale: float

    def __post_init__(self) -> None:
        for name in ("demand", "mileage", "survival", "emission_factor", "utilities"):
            arr = _frozen(getattr(self, name))
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "logit_scale", float(self.logit_scale))
        if self.demand.ndim != 2 or self.mileage.ndim != 1 or self.survival.ndim != 1:
            raise StructuralError("demand must be 2-D, mileage and survival 1-D")
        steps = self.mileage.shape[0]
        if self.demand.shape[1] != steps or self.emission_factor.shape[1:] != (steps,):
            raise StructuralError("demand, mileage and emission_factor must cover the same years")
        if self.emission_factor.shape[0] != self.survival.shape[0] + 1:
            raise StructuralError("emission_factor needs one row per age 0..A")
        if self.utilities.shape != (2, steps):
            raise StructuralError(f"utilities must have shape (2, {steps})")
        if np.any(self.survival < 0) or np.any(self.survival > 1):
            raise ValidationError("survival rates must lie in [0, 1]")
        if np.any(self.mileage <= 0):
            raise ValidationError("mileage must be positive")
        if np.any(self.demand < 0):
            raise ValidationError("demand must be non-negative")
        if np.any(self.emission_factor < 0):
            raise ValidationError("emission factors must be non-negative")
        if not np.isfinite(self.logit_scale):
            raise ValidationError("logit scale must be finite")

    @property
    def max_age(self) -> int:
        return self.survival.shape[0]

    @property
    def horizon(self) -> int:
        return self.mileage.shape[0] - 1

    @property
    def zones(self) -> int:
        return self.demand.shape[0]

    def survival_by_age(self) -> np.ndarray:
        """Survival padded to ages ``0..A``; age 0 never comes from ageing."""
        return np.concatenate(([0.0], self.survival))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExogenousInputs):
            return NotImplemented
        return self.logit_scale == other.logit_scale and all(
            np.array_equal(getattr(self, n), getattr(other, n))
            for n in ("demand", "mileage", "survival", "emission_factor", "utilities")
        )


# -- elementary operations ---------------------------------------------------


def _age_cohorts(stock: np.ndarray) -> np.ndarray:
    """Shift stock one age up; the last bin keeps ages ``A-1`` and ``A``."""
    aged = np.zeros_like(stock)
    aged[..., 1:-1, :] = stock[..., :-2, :]
    aged[..., -1, :] = stock[..., -2, :] + stock[..., -1, :]
    return aged


def _split(prev_stock: np.ndarray, sigma: np.ndarray, eta: np.ndarray):
    aged = _age_cohorts(prev_stock)
    eta = eta[:, None]
    old = eta * (1.0 - sigma) * aged
    disposed = eta * sigma * aged
    return old, disposed


def survivors_split(
    prev: FleetState, sigma: np.ndarray, survival: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Partition last year's survivors into kept (old) and disposed vehicles.

    Parameters
    ----------
    prev:
        Stock at ``t - 1``.
    sigma:
        Disposal ratios ``(2, A+1, Z)``; the electric layer must be zero.
    survival:
        Survival rates for ages ``1..A``.

    Returns
    -------
    (old, disposed)
        Both ``(2, A+1, Z)`` with a zero age-0 row.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    survival = np.asarray(survival, dtype=np.float64)
    if sigma.shape != prev.stock.shape:
        raise StructuralError(f"sigma shape {sigma.shape} != stock shape {prev.stock.shape}")
    if survival.shape != (prev.max_age,):
        raise StructuralError(f"survival needs {prev.max_age} entries, got {survival.shape}")
    if np.any(sigma < 0) or np.any(sigma > 1):
        raise ValidationError("disposal ratios must lie in [0, 1]")
    if np.any(sigma[ELECTRIC] != 0):
        raise ValidationError("electric vehicles cannot be disposed of")
    eta = np.concatenate(([0.0], survival))
    return _split(prev.stock, sigma, eta)


def new_vehicle_count(demand_z, mileage, old_total_z):
    """Registrations needed to serve demand, clamped at zero.

    Returns ``(count, shrink)`` where ``shrink`` marks cells whose raw value
    was negative (demand fell faster than the surviving fleet).
    """
    mileage = np.asarray(mileage, dtype=np.float64)
    if np.any(mileage <= 0):
        raise ValidationError("mileage must be positive")
    old_total_z = np.asarray(old_total_z, dtype=np.float64)
    if np.any(old_total_z < 0):
        raise ValidationError("old stock must be non-negative")
    raw = np.asarray(demand_z, dtype=np.float64) / mileage - old_total_z
    shrink = raw < 0
    if np.any(shrink):
        logger.debug("demand below surviving stock in %d cell(s); clamped", int(np.sum(shrink)))
    count = np.maximum(raw, 0.0)
    if count.ndim == 0:
        return float(count), bool(shrink)
    return count, shrink


def _logit_pair(u_thermal, u_electric, mu):
    x1 = mu * np.asarray(u_thermal, dtype=np.float64)
    x2 = mu * np.asarray(u_electric, dtype=np.float64)
    top = np.maximum(x1, x2)
    e1 = np.exp(x1 - top)
    e2 = np.exp(x2 - top)
    total = e1 + e2
    return e1 / total, e2 / total


def purchase_probabilities(utilities, mu: float, new_ban_flag):
    """Thermal/electric purchase shares from a two-way logit.

    ``utilities`` is ``(U_thermal, U_electric)``. Where new thermal cars are
    banned (``new_ban_flag = 1``) every purchase is electric.
    """
    u1, u2 = utilities
    l1, l2 = _logit_pair(u1, u2, mu)
    ban = np.asarray(new_ban_flag, dtype=np.float64)
    p1 = l1 * (1.0 - ban)
    p2 = l2 * (1.0 - ban) + ban
    if p1.ndim == 0:
        return float(p1), float(p2)
    return p1, p2


def split_new_purchases(new_total_z, thermal_disposals_z, p_thermal, p_electric):
    """Split registrations by type; disposed thermal cars come back electric.

    Returns ``(N_thermal, N_electric, overflow)``. When more thermal cars
    were disposed of than registrations are needed, the replacement term is
    capped at the registration count and ``overflow`` is set.
    """
    n = np.asarray(new_total_z, dtype=np.float64)
    r = np.asarray(thermal_disposals_z, dtype=np.float64)
    overflow = r > n
    replaced = np.minimum(r, n)
    free = n - replaced
    n1 = free * p_thermal
    n2 = replaced + free * p_electric
    if n1.ndim == 0:
        return float(n1), float(n2), bool(overflow)
    return n1, n2, overflow


def _emissions_grams(thermal_stock: np.ndarray, mileage: float, eps: np.ndarray) -> np.ndarray:
    per_age = _ordered_sum(thermal_stock, axis=-1)  # (..., A+1)
    return mileage * _ordered_sum(eps * per_age, axis=-1)


def annual_emissions(state: FleetState, mileage: float, emission_factor: np.ndarray) -> float:
    """Tailpipe CO2 of the thermal fleet in tonnes per year."""
    eps = np.asarray(emission_factor, dtype=np.float64)
    if eps.shape != (state.max_age + 1,):
        raise StructuralError(f"emission factor needs {state.max_age + 1} ages, got {eps.shape}")
    return float(_emissions_grams(state.stock[THERMAL], float(mileage), eps)) / GRAMS_PER_TONNE


# -- forward simulation -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Year-by-year record of one forward run; index 0 is the base year."""

    years: np.ndarray  # (T+1,)
    schedule: np.ndarray  # (Z, T+1) ban ages
    control: np.ndarray  # (Z, T)
    stock: np.ndarray  # (T+1, 2, A+1, Z)
    old: np.ndarray  # (T+1, 2, A+1, Z)
    disposed: np.ndarray  # (T+1, 2, A+1, Z)
    sigma: np.ndarray  # (T+1, A+1, Z) thermal disposal ratios
    new_total: np.ndarray  # (T+1, Z)
    new_by_type: np.ndarray  # (T+1, 2, Z)
    emissions: np.ndarray  # (T+1,) tCO2/year
    annual_disposals: np.ndarray  # (T+1,) thermal vehicles disposed of
    shrink: np.ndarray  # (T+1, Z) bool
    overflow: np.ndarray  # (T+1, Z) bool

    @property
    def horizon(self) -> int:
        return len(self.years) - 1

    @property
    def cumulative_disposals(self) -> np.ndarray:
        out = np.empty_like(self.annual_disposals)
        acc = 0.0
        for i, r in enumerate(self.annual_disposals):
            acc += r
            out[i] = acc
        return out

    @property
    def total_disposals(self) -> float:
        return float(self.cumulative_disposals[-1])

    @property
    def terminal_emissions(self) -> float:
        return float(self.emissions[-1])

    def state(self, t: int) -> FleetState:
        return FleetState(int(self.years[t]), self.stock[t])

    def flows(self, t: int) -> AnnualFlows:
        return AnnualFlows(self.old[t], self.disposed[t], self.new_total[t], self.new_by_type[t])

    def identical(self, other: "SimulationTrace") -> bool:
        names = self.__dataclass_fields__
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in names)


@dataclass(frozen=True)
class BatchResult:
    total_disposals: np.ndarray  # (B,)
    terminal_emissions: np.ndarray  # (B,) tCO2
    ok: np.ndarray  # (B,) False where a negative stock appeared


def _run(scenario: "Scenario", controls: np.ndarray, record: bool):
    """Core recursion over a batch of already-feasible controls ``(B, Z, T)``."""
    exo = scenario.exogenous
    topo = scenario.topology
    params = scenario.behavior
    A = scenario.max_age
    T = scenario.horizon
    batch = controls.shape[0]
    eta = exo.survival_by_age()

    _, schedule = repair_control(controls, scenario.initial_I, topo, A)
    stock = np.broadcast_to(scenario.initial_stock.stock, (batch,) + scenario.initial_stock.stock.shape).copy()
    ok = np.ones(batch, dtype=bool)
    grams0 = _emissions_grams(stock[:, THERMAL], exo.mileage[0], exo.emission_factor[:, 0])
    emissions = [grams0 / GRAMS_PER_TONNE]
    annual = [np.zeros(batch)]
    cumulative = np.zeros(batch)
    rec: dict[str, list] = {k: [] for k in ("stock", "old", "disposed", "sigma", "n", "nv", "shrink", "overflow")}
    if record:
        shape = stock.shape[1:]
        z = shape[-1]
        rec["stock"].append(stock[0].copy())
        rec["old"].append(np.zeros(shape))
        rec["disposed"].append(np.zeros(shape))
        rec["sigma"].append(np.zeros(shape[1:]))
        rec["n"].append(np.zeros(z))
        rec["nv"].append(np.zeros((2, z)))
        rec["shrink"].append(np.zeros(z, dtype=bool))
        rec["overflow"].append(np.zeros(z, dtype=bool))

    for t in range(1, T + 1):
        I_t = schedule[..., t]
        pi, sigma_thermal = disposal_ratios(I_t, topo, params, A)
        sigma = np.zeros_like(stock)
        sigma[:, THERMAL] = sigma_thermal
        old, disposed = _split(stock, sigma, eta)

        old_total = _ordered_sum(_ordered_sum(old, axis=1), axis=1)  # (B, Z)
        n_total, shrink = new_vehicle_count(exo.demand[:, t], exo.mileage[t], old_total)
        replaced = _ordered_sum(disposed[:, THERMAL], axis=1)  # (B, Z)
        p1, p2 = purchase_probabilities(exo.utilities[:, t], exo.logit_scale, pi[:, 0, :])
        n1, n2, overflow = split_new_purchases(n_total, replaced, p1, p2)

        stock = old.copy()
        stock[:, THERMAL, 0, :] = n1
        stock[:, ELECTRIC, 0, :] = n2
        bad = np.any(stock.reshape(batch, -1) < 0, axis=1)
        ok &= ~bad

        e_t = _emissions_grams(stock[:, THERMAL], exo.mileage[t], exo.emission_factor[:, t]) / GRAMS_PER_TONNE
        r_t = _ordered_sum(replaced, axis=-1)
        cumulative = cumulative + r_t
        emissions.append(e_t)
        annual.append(r_t)
        if record:
            rec["stock"].append(stock[0].copy())
            rec["old"].append(old[0].copy())
            rec["disposed"].append(disposed[0].copy())
            rec["sigma"].append(sigma_thermal[0].copy())
            rec["n"].append(n_total[0].copy())
            rec["nv"].append(np.stack([n1[0], n2[0]]))
            rec["shrink"].append(shrink[0].copy())
            rec["overflow"].append(overflow[0].copy())

    return schedule, np.stack(emissions, axis=1), np.stack(annual, axis=1), cumulative, ok, rec


def simulate_batch(scenario: "Scenario", controls: np.ndarray) -> BatchResult:
    """Objective-level results for a population of feasible controls.

    ``controls`` has shape ``(B, Z, T)`` and is expected to be repaired
    already; infeasible genes are silently clipped by the schedule update.
    """
    controls = np.asarray(controls, dtype=np.int64)
    if controls.ndim != 3:
        raise StructuralError(f"controls must have shape (B, Z, T), got {controls.shape}")
    _, emissions, _, cumulative, ok, _ = _run(scenario, controls, record=False)
    return BatchResult(cumulative, emissions[:, -1], ok)


def simulate(scenario: "Scenario", control: np.ndarray, *, strict: bool = True) -> SimulationTrace:
    """Run the fleet forward for ``t = 1..T`` under one control ``(Z, T)``.

    With ``strict`` (the default) the control must pass
    :func:`~lezbackcast.policy.validate_control`; otherwise it is repaired
    silently. Raises :class:`FleetConsistencyError` if any stock goes
    negative.
    """
    control = np.asarray(control, dtype=np.int64)
    expected = (scenario.zones, scenario.horizon)
    if control.shape != expected:
        raise StructuralError(f"control shape {control.shape} != {expected}")
    if strict:
        report = validate_control(control, scenario.initial_I, scenario.topology, scenario.max_age)
        if not report.feasible:
            first = report.violations[0]
            raise ValidationError(
                f"infeasible control: {len(report.violations)} violation(s), first {first.kind} "
                f"in zone {first.zone} at t={first.step}: {first.detail}"
            )
    schedule, emissions, annual, _, ok, rec = _run(scenario, control[None], record=True)
    if not ok[0]:
        raise FleetConsistencyError("simulation produced a negative stock entry")
    years = scenario.base_year + np.arange(scenario.horizon + 1)
    return SimulationTrace(
        years=_frozen(years, np.int64),
        schedule=_frozen(schedule[0], np.int64),
        control=_frozen(control, np.int64),
        stock=_frozen(rec["stock"]),
        old=_frozen(rec["old"]),
        disposed=_frozen(rec["disposed"]),
        sigma=_frozen(rec["sigma"]),
        new_total=_frozen(rec["n"]),
        new_by_type=_frozen(rec["nv"]),
        emissions=_frozen(emissions[0]),
        annual_disposals=_frozen(annual[0]),
        shrink=_frozen(rec["shrink"], bool),
        overflow=_frozen(rec["overflow"], bool),
    )
