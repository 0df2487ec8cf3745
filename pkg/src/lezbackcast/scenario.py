"""Scenario files: loading, validation, defaulting and canonical dumps.

A scenario is one JSON document::

    {
      "name": "...", "base_year": 2025, "horizon": 25, "max_age": 30,
      "zones": {"names": [...], "neighbors": [[1], [0, 2], ...] | "rings",
                "max_slope": [...], "initial_ban_age": [16, 17, "no_ban", ...]},
      "behavior": {"K_M": .., "K_m": .., "K_lim": .., "K_lim_max": ..},
      "exogenous": {"demand": [[...]], "mileage": [...] | 12000.0,
                    "survival": [...], "emission_factor": [[...]] | [...],
                    "utilities": {"thermal": [...], "electric": [...]},
                    "logit_scale": 1.0},
      "initial_stock": {"thermal": [...], "electric": [...],
                        "age_profile": {"thermal": [...], "electric": [...]},
                        "by_age": {"thermal": [[...]], "electric": [[...]]}},
      "targets": [0.35, 0.45, ...]
    }

``behavior``, ``age_profile``/``by_age`` and ``targets`` are optional. The README
carries the field reference.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import LezError, ScenarioError
from .fleet import ELECTRIC, THERMAL, ExogenousInputs, FleetState
from .policy import BehaviorParams, ZoneTopology

__all__ = [
    "Scenario",
    "DEFAULT_TARGETS",
    "BUNDLED",
    "load_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "dump_scenario",
    "resolve_scenario_path",
    "steady_state_profile",
]

#: Reduction fractions of the six emission targets.
DEFAULT_TARGETS = (0.35, 0.45, 0.55, 0.65, 0.75, 0.85)

BUNDLED = ("idf_fixture", "tiny_instance")

NO_BAN = "no_ban"


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    base_year: int
    horizon: int
    max_age: int
    topology: ZoneTopology
    exogenous: ExogenousInputs
    behavior: BehaviorParams
    initial_I: tuple[int, ...]
    initial_stock: FleetState
    targets: tuple[float, ...] = DEFAULT_TARGETS
    description: str = ""
    synthetic: bool = False
    provenance: Mapping[str, str] = field(default_factory=dict)

    @property
    def zones(self) -> int:
        return self.topology.zones

    @property
    def last_year(self) -> int:
        return self.base_year + self.horizon

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        # provenance records how a value was obtained, not the value itself
        return scenario_to_dict(self) == scenario_to_dict(other)


def steady_state_profile(survival: Sequence[float]) -> np.ndarray:
    """Age weights ``w[a]`` proportional to the product of survival up to ``a``."""
    w = np.concatenate(([1.0], np.cumprod(np.asarray(survival, dtype=np.float64))))
    return w / w.sum()


def resolve_scenario_path(ref: str | Path) -> Path:
    """Accept a file path or the name of a bundled scenario."""
    path = Path(ref)
    if path.exists():
        return path
    name = str(ref)
    if name.endswith(".json"):
        name = name[:-5]
    if name in BUNDLED:
        return Path(str(resources.files("lezbackcast") / "data" / f"{name}.json"))
    raise FileNotFoundError(f"scenario {ref!s} not found (bundled: {', '.join(BUNDLED)})")


# -- parsing helpers -----------------------------------------------------------


def _get(obj: Mapping[str, Any], key: str, where: str):
    if not isinstance(obj, Mapping):
        raise ScenarioError(where, "expected an object")
    if key not in obj:
        raise ScenarioError(f"{where}.{key}" if where else key, "missing required field")
    return obj[key]


def _array(value, where: str, shape: tuple[int, ...]) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(where, f"not numeric ({exc})") from None
    if arr.shape != shape:
        raise ScenarioError(where, f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(where, "values must be finite")
    return arr


def _series(value, where: str, steps: int) -> np.ndarray:
    if np.ndim(value) == 0:
        return np.full(steps, _array(value, where, ()))
    return _array(value, where, (steps,))


def _int(value, where: str, low: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(where, f"expected an integer, got {value!r}")
    if low is not None and value < low:
        raise ScenarioError(where, f"must be >= {low}, got {value}")
    return value


def _topology(zones: Mapping[str, Any]) -> ZoneTopology:
    slopes = _get(zones, "max_slope", "zones")
    if not isinstance(slopes, list):
        raise ScenarioError("zones.max_slope", "expected a list")
    slopes = [_int(d, f"zones.max_slope[{i}]", 0) for i, d in enumerate(slopes)]
    names = zones.get("names", [])
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise ScenarioError("zones.names", "expected a list of strings")
    nbrs = zones.get("neighbors", "rings")
    try:
        if nbrs == "rings":
            return ZoneTopology.rings(slopes, names)
        if not isinstance(nbrs, list):
            raise ScenarioError("zones.neighbors", "expected 'rings' or a list of lists")
        parsed = tuple(
            tuple(_int(j, f"zones.neighbors[{i}]", 0) for j in row) for i, row in enumerate(nbrs)
        )
        return ZoneTopology(parsed, tuple(slopes), tuple(names))
    except ScenarioError:
        raise
    except LezError as exc:
        raise ScenarioError("zones", str(exc)) from None


def scenario_from_dict(doc: Mapping[str, Any], *, source: str = "<dict>") -> Scenario:
    """Validate a parsed scenario document and build a :class:`Scenario`."""
    provenance: dict[str, str] = {"source": source}
    name = doc.get("name", Path(source).stem)
    base_year = _int(_get(doc, "base_year", ""), "base_year")
    T = _int(_get(doc, "horizon", ""), "horizon", 1)
    A = _int(_get(doc, "max_age", ""), "max_age", 1)
    steps = T + 1

    zones = _get(doc, "zones", "")
    topo = _topology(zones)
    Z = topo.zones

    raw_I = _get(zones, "initial_ban_age", "zones")
    if not isinstance(raw_I, list) or len(raw_I) != Z:
        raise ScenarioError("zones.initial_ban_age", f"expected a list of {Z} ages")
    initial_I = []
    for i, v in enumerate(raw_I):
        age = A + 1 if v == NO_BAN else _int(v, f"zones.initial_ban_age[{i}]")
        if not 0 <= age <= A + 1:
            raise ScenarioError(f"zones.initial_ban_age[{i}]", f"must lie in 0..{A + 1}, got {age}")
        initial_I.append(age)

    if "behavior" in doc:
        b = doc["behavior"]
        try:
            behavior = BehaviorParams(**{k: float(_get(b, k, "behavior")) for k in ("K_M", "K_m", "K_lim", "K_lim_max")})
        except (TypeError, ValueError) as exc:
            raise ScenarioError("behavior", str(exc)) from None
        extra = set(b) - {"K_M", "K_m", "K_lim", "K_lim_max"}
        if extra:
            raise ScenarioError("behavior", f"unknown keys {sorted(extra)}")
        provenance["behavior"] = "file"
    else:
        behavior = BehaviorParams()
        provenance["behavior"] = "defaulted"
    try:
        behavior.validate()
    except LezError as exc:
        raise ScenarioError("behavior", str(exc)) from None

    exo_doc = _get(doc, "exogenous", "")
    demand = _array(_get(exo_doc, "demand", "exogenous"), "exogenous.demand", (Z, steps))
    mileage = _series(_get(exo_doc, "mileage", "exogenous"), "exogenous.mileage", steps)
    survival = _array(_get(exo_doc, "survival", "exogenous"), "exogenous.survival", (A,))
    eps_raw = _get(exo_doc, "emission_factor", "exogenous")
    if np.ndim(eps_raw) == 1:
        eps = np.repeat(_array(eps_raw, "exogenous.emission_factor", (A + 1,))[:, None], steps, axis=1)
    else:
        eps = _array(eps_raw, "exogenous.emission_factor", (A + 1, steps))
    util = _get(exo_doc, "utilities", "exogenous")
    utilities = np.stack(
        [
            _series(_get(util, "thermal", "exogenous.utilities"), "exogenous.utilities.thermal", steps),
            _series(_get(util, "electric", "exogenous.utilities"), "exogenous.utilities.electric", steps),
        ]
    )
    mu = float(_array(exo_doc.get("logit_scale", 1.0), "exogenous.logit_scale", ()))
    for label, arr, bad in (
        ("exogenous.survival", survival, (survival < 0) | (survival > 1)),
        ("exogenous.mileage", mileage, mileage <= 0),
        ("exogenous.demand", demand, demand < 0),
        ("exogenous.emission_factor", eps, eps < 0),
    ):
        if np.any(bad):
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            raise ScenarioError(f"{label}{list(idx)}", f"value {arr[idx]} out of range")
    exogenous = ExogenousInputs(demand, mileage, survival, eps, utilities, mu)

    stock_doc = _get(doc, "initial_stock", "")
    if "by_age" in stock_doc:
        by_age = _get(stock_doc, "by_age", "initial_stock")
        stock = np.stack(
            [
                _array(_get(by_age, k, "initial_stock.by_age"), f"initial_stock.by_age.{k}", (A + 1, Z))
                for k in ("thermal", "electric")
            ]
        )
        provenance["age_distribution"] = "explicit"
    else:
        totals = np.stack(
            [_array(_get(stock_doc, k, "initial_stock"), f"initial_stock.{k}", (Z,)) for k in ("thermal", "electric")]
        )
        if "age_profile" in stock_doc:
            prof_doc = stock_doc["age_profile"]
            profiles = []
            for k in ("thermal", "electric"):
                p = _array(_get(prof_doc, k, "initial_stock.age_profile"), f"initial_stock.age_profile.{k}", (A + 1,))
                if np.any(p < 0) or p.sum() <= 0:
                    raise ScenarioError(f"initial_stock.age_profile.{k}", "weights must be non-negative with positive sum")
                profiles.append(p / p.sum())
            profiles = np.stack(profiles)
            provenance["age_distribution"] = "file"
        else:
            profiles = np.stack([steady_state_profile(survival)] * 2)
            provenance["age_distribution"] = "defaulted"
        stock = profiles[:, :, None] * totals[:, None, :]
    if np.any(stock < 0):
        raise ScenarioError("initial_stock", "stock entries must be non-negative")
    initial_stock = FleetState(base_year, stock)

    targets = doc.get("targets", list(DEFAULT_TARGETS))
    if not isinstance(targets, list):
        raise ScenarioError("targets", "expected a list of reduction fractions")
    for i, b in enumerate(targets):
        if not isinstance(b, (int, float)) or not 0 <= b < 1:
            raise ScenarioError(f"targets[{i}]", f"reduction fraction must lie in [0, 1), got {b!r}")

    scenario = Scenario(
        name=str(name),
        base_year=base_year,
        horizon=T,
        max_age=A,
        topology=topo,
        exogenous=exogenous,
        behavior=behavior,
        initial_I=tuple(initial_I),
        initial_stock=initial_stock,
        targets=tuple(float(b) for b in targets),
        description=str(doc.get("description", "")),
        synthetic=bool(doc.get("synthetic", False)),
        provenance=provenance,
    )
    object.__setattr__(scenario, "provenance", {**provenance, "sha256": scenario_hash(scenario)})
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario file (or a bundled scenario by name).

    Raises :class:`ScenarioError` naming the offending field, or the JSON
    line and column for syntax errors.
    """
    path = resolve_scenario_path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    if not isinstance(doc, dict):
        raise ScenarioError(str(path), "top level must be an object")
    return scenario_from_dict(doc, source=str(path))


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    """Canonical, fully explicit document; loading it reproduces ``s`` exactly."""
    topo = s.topology
    exo = s.exogenous
    return {
        "name": s.name,
        "description": s.description,
        "synthetic": s.synthetic,
        "base_year": s.base_year,
        "horizon": s.horizon,
        "max_age": s.max_age,
        "zones": {
            "names": list(topo.names),
            "neighbors": [list(n) for n in topo.neighbors],
            "max_slope": list(topo.max_slope),
            "initial_ban_age": list(s.initial_I),
        },
        "behavior": {
            "K_M": s.behavior.K_M,
            "K_m": s.behavior.K_m,
            "K_lim": s.behavior.K_lim,
            "K_lim_max": s.behavior.K_lim_max,
        },
        "exogenous": {
            "demand": exo.demand.tolist(),
            "mileage": exo.mileage.tolist(),
            "survival": exo.survival.tolist(),
            "emission_factor": exo.emission_factor.tolist(),
            "utilities": {"thermal": exo.utilities[THERMAL].tolist(), "electric": exo.utilities[ELECTRIC].tolist()},
            "logit_scale": exo.logit_scale,
        },
        "initial_stock": {
            "thermal": s.initial_stock.stock[THERMAL].sum(axis=0).tolist(),
            "electric": s.initial_stock.stock[ELECTRIC].sum(axis=0).tolist(),
            "by_age": {
                "thermal": s.initial_stock.stock[THERMAL].tolist(),
                "electric": s.initial_stock.stock[ELECTRIC].tolist(),
            },
        },
        "targets": list(s.targets),
    }


def scenario_hash(s: Scenario) -> str:
    blob = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def dump_scenario(s: Scenario, path: str | Path, *, indent: int | None = 1) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scenario_to_dict(s), indent=indent) + "\n", encoding="utf-8")
    return path
