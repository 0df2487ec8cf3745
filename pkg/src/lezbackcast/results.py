"""Plot-ready result files.

Four CSV files and a JSON manifest are written per run:

``emissions.csv``   year, scenario, E_MtCO2                      (t = 1..T)
``disposals.csv``   year, scenario, R_cumulative_Mvehicles           (t = 1..T)
``pareto.csv``      beta, R_Mvehicles, E_T_MtCO2, feasible
``schedule.csv``    scenario, zone, ban_year, oldest_allowed_manufacturing_year, status
``manifest.json``   everything needed to rerun

The schedule value is ``ban_year - I``; ``status`` is ``no ban`` where
``I = A + 1``. Floats use the shortest repr that round-trips, with a dot
decimal separator and LF line endings.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import StructuralError
from .fleet import SimulationTrace

__all__ = ["ParetoPoint", "ResultsBundle", "write_results", "read_schedule", "schedule_rows"]

TONNES_PER_MT = 1e6
VEHICLES_PER_M = 1e6

EMISSIONS_HEADER = ("year", "scenario", "E_MtCO2")
DISPOSALS_HEADER = ("year", "scenario", "R_cumulative_Mvehicles")
PARETO_HEADER = ("beta", "R_Mvehicles", "E_T_MtCO2", "feasible")
SCHEDULE_HEADER = ("scenario", "zone", "ban_year", "oldest_allowed_manufacturing_year", "status")


@dataclass(frozen=True)
class ParetoPoint:
    beta: float
    R: float  # vehicles
    E_T: float  # tCO2
    feasible: bool


@dataclass(frozen=True, eq=False)
class ResultsBundle:
    max_age: int
    traces: Mapping[str, SimulationTrace]
    schedules: Mapping[str, SimulationTrace] = field(default_factory=dict)
    pareto: tuple[ParetoPoint, ...] = ()
    manifest: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        lengths = {len(t.years) for t in self.traces.values()} | {len(t.years) for t in self.schedules.values()}
        if len(lengths) > 1:
            raise StructuralError("all traces in a bundle must share one horizon")


def _f(x: float) -> str:
    return repr(float(x))


def schedule_rows(label: str, trace: SimulationTrace, max_age: int):
    for z in range(trace.schedule.shape[0]):
        for year, ban_age in zip(trace.years, trace.schedule[z]):
            status = "no ban" if ban_age > max_age else "ban"
            yield (label, z + 1, int(year), int(year - ban_age), status)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_results(bundle: ResultsBundle, directory: str | Path) -> list[Path]:
    """Write the result files; returns their paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / name for name in ("emissions.csv", "disposals.csv", "pareto.csv", "schedule.csv")}

    emissions, disposals = [], []
    for label, trace in bundle.traces.items():
        cumulative = trace.cumulative_disposals
        for t in range(1, len(trace.years)):
            year = int(trace.years[t])
            emissions.append((year, label, _f(trace.emissions[t] / TONNES_PER_MT)))
            disposals.append((year, label, _f(cumulative[t] / VEHICLES_PER_M)))
    _write_csv(paths["emissions.csv"], EMISSIONS_HEADER, emissions)
    _write_csv(paths["disposals.csv"], DISPOSALS_HEADER, disposals)
    _write_csv(
        paths["pareto.csv"],
        PARETO_HEADER,
        [
            (_f(p.beta), _f(p.R / VEHICLES_PER_M), _f(p.E_T / TONNES_PER_MT), str(bool(p.feasible)).lower())
            for p in bundle.pareto
        ],
    )
    rows = []
    for label, trace in bundle.schedules.items():
        rows.extend(schedule_rows(label, trace, bundle.max_age))
    _write_csv(paths["schedule.csv"], SCHEDULE_HEADER, rows)

    manifest = out / "manifest.json"
    manifest.write_text(json.dumps(bundle.manifest, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
    return [*paths.values(), manifest]


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def read_schedule(path: str | Path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Rebuild ``{scenario: (years, I)}`` from a ``schedule.csv``.

    ``I`` has shape ``(Z, n_years)`` and is recovered as
    ``ban_year - oldest_allowed_manufacturing_year``.
    """
    cells: dict[str, dict[tuple[int, int], int]] = {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SCHEDULE_HEADER:
            raise StructuralError(f"unexpected schedule header {reader.fieldnames}")
        for row in reader:
            year = int(row["ban_year"])
            ban_age = year - int(row["oldest_allowed_manufacturing_year"])
            cells.setdefault(row["scenario"], {})[(int(row["zone"]), year)] = ban_age
    out = {}
    for label, grid in cells.items():
        zones = sorted({z for z, _ in grid})
        years = sorted({y for _, y in grid})
        I = np.empty((len(zones), len(years)), dtype=np.int64)
        for i, z in enumerate(zones):
            for j, y in enumerate(years):
                if (z, y) not in grid:
                    raise StructuralError(f"schedule for {label!r} misses zone {z} year {y}")
                I[i, j] = grid[(z, y)]
        out[label] = (np.asarray(years, dtype=np.int64), I)
    return out
