"""Generators for the bundled scenario files.

``idf_fixture`` reproduces the six-ring initial schedule, slopes and stock
totals of the Ile-de-France case, with synthetic exogenous series shaped to
give a falling emission trajectory; it is not a calibrated dataset.
``tiny_instance`` is small enough for exhaustive search.

Run ``python -m lezbackcast.fixtures`` to regenerate the JSON files.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

IDF_THERMAL = [1.15e6, 2.09e6, 1.95e6, 0.89e6, 0.43e6, 0.16e6]
IDF_ELECTRIC = [8.99e3, 16.31e3, 15.18e3, 6.95e3, 3.37e3, 1.23e3]
IDF_INITIAL_BAN = [16, 17, "no_ban", "no_ban", "no_ban", "no_ban"]
IDF_SLOPES = [4, 3, 3, 2, 2, 1]


def weibull_survival(max_age: int, scale: float, shape: float) -> np.ndarray:
    """Year-on-year survival ``S(a) / S(a-1)`` of a Weibull lifetime, ages 1..A."""
    a = np.arange(1, max_age + 1, dtype=np.float64)
    return np.exp(-((a / scale) ** shape - ((a - 1) / scale) ** shape))


def vintage_emission_factor(base_year: int, horizon: int, max_age: int) -> np.ndarray:
    """gCO2/km by age (rows) and year (columns) from a logistic vintage curve."""
    years = base_year + np.arange(horizon + 1)
    ages = np.arange(max_age + 1)
    made = years[None, :] - ages[:, None]
    return (72.0 + 95.0 / (1.0 + np.exp((made - 2010.0) / 5.0))) * (1.0 + 0.004 * ages[:, None])


def _r(x: np.ndarray, digits: int = 6) -> list:
    return np.round(np.asarray(x, dtype=np.float64), digits).tolist()


def idf_fixture() -> dict:
    base, T, A = 2025, 25, 30
    t = np.arange(T + 1)
    mileage = 9800.0 - 20.0 * t
    fleet0 = np.asarray(IDF_THERMAL) + np.asarray(IDF_ELECTRIC)
    growth = 1.0 + 0.002 * t
    demand = fleet0[:, None] * mileage[0] * growth[None, :]
    return {
        "name": "idf_fixture",
        "description": (
            "Six concentric rings with the 2025 ban ages, maximum slopes and stock totals of the "
            "Ile-de-France case. Demand, mileage, survival, emission factors and utilities are "
            "SYNTHETIC placeholders, not a calibrated dataset."
        ),
        "synthetic": True,
        "base_year": base,
        "horizon": T,
        "max_age": A,
        "zones": {
            "names": ["Paris", "Ring 2", "Ring 3", "Ring 4", "Ring 5", "Ring 6"],
            "neighbors": "rings",
            "max_slope": IDF_SLOPES,
            "initial_ban_age": IDF_INITIAL_BAN,
        },
        "behavior": {"K_M": 0.9, "K_m": 0.05, "K_lim": 0.2, "K_lim_max": 0.6},
        "exogenous": {
            "demand": _r(demand, 1),
            "mileage": _r(mileage, 3),
            "survival": _r(weibull_survival(A, 19.0, 3.2), 8),
            "emission_factor": _r(vintage_emission_factor(base, T, A), 4),
            "utilities": {"thermal": [0.0] * (T + 1), "electric": _r(-2.0 + 0.17 * t, 4)},
            "logit_scale": 1.0,
        },
        "initial_stock": {"thermal": IDF_THERMAL, "electric": IDF_ELECTRIC},
        "targets": [0.35, 0.45, 0.55, 0.65, 0.75, 0.85],
    }


def tiny_instance() -> dict:
    base, T, A = 2025, 4, 5
    t = np.arange(T + 1)
    return {
        "name": "tiny_instance",
        "description": "Two-zone, four-year instance for exhaustive-search checks (K_m = 0).",
        "synthetic": True,
        "base_year": base,
        "horizon": T,
        "max_age": A,
        "zones": {
            "names": ["core", "outer"],
            "neighbors": [[1], [0]],
            "max_slope": [2, 1],
            "initial_ban_age": [4, "no_ban"],
        },
        "behavior": {"K_M": 0.8, "K_m": 0.0, "K_lim": 0.15, "K_lim_max": 0.3},
        "exogenous": {
            "demand": _r([[1.0e7] * (T + 1), [2.0e7] * (T + 1)], 1),
            "mileage": 10000.0,
            "survival": [0.97, 0.93, 0.88, 0.8, 0.6],
            "emission_factor": _r(vintage_emission_factor(base, T, A), 4),
            "utilities": {"thermal": [0.0] * (T + 1), "electric": _r(-1.0 + 0.4 * t, 4)},
            "logit_scale": 1.0,
        },
        "initial_stock": {"thermal": [900.0, 1900.0], "electric": [100.0, 100.0]},
        "targets": [0.2],
    }


def write_bundled(directory: Path | None = None) -> list[Path]:
    directory = directory or Path(__file__).parent / "data"
    out = []
    for name, doc in (("idf_fixture", idf_fixture()), ("tiny_instance", tiny_instance())):
        path = directory / f"{name}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        out.append(path)
    return out


if __name__ == "__main__":
    for p in write_bundled():
        print(p)
