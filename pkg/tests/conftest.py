import numpy as np
import pytest

from lezbackcast.scenario import load_scenario, scenario_from_dict

ACCEPTANCE_LINES: list[str] = []


def random_scenario_doc(rng: np.random.Generator, *, max_zones=3, max_age=10, max_horizon=10, K_m=None) -> dict:
    Z = int(rng.integers(1, max_zones + 1))
    A = int(rng.integers(2, max_age + 1))
    T = int(rng.integers(1, max_horizon + 1))
    steps = T + 1
    slopes = rng.integers(0, 4, size=Z).tolist()
    I0 = rng.integers(0, A + 2, size=Z).tolist()
    mileage = rng.uniform(5e3, 15e3, size=steps)
    fleet = rng.uniform(500.0, 5000.0, size=Z)
    demand = fleet[:, None] * mileage[None, :] * rng.uniform(0.7, 1.4, size=(Z, steps))
    K = np.sort(rng.uniform(0.01, 0.95, size=4))
    return {
        "name": "random",
        "base_year": 2000,
        "horizon": T,
        "max_age": A,
        "zones": {"neighbors": "rings", "max_slope": slopes, "initial_ban_age": I0},
        "behavior": {
            "K_m": float(K[0]) if K_m is None else K_m,
            "K_lim": float(K[1]),
            "K_lim_max": float(K[2]),
            "K_M": float(K[3]),
        },
        "exogenous": {
            "demand": demand.tolist(),
            "mileage": mileage.tolist(),
            "survival": rng.uniform(0.5, 1.0, size=A).tolist(),
            "emission_factor": rng.uniform(50, 250, size=(A + 1, steps)).tolist(),
            "utilities": {"thermal": rng.normal(size=steps).tolist(), "electric": rng.normal(size=steps).tolist()},
            "logit_scale": float(rng.uniform(0.2, 3.0)),
        },
        "initial_stock": {
            "thermal": (fleet * 0.8).tolist(),
            "electric": (fleet * 0.2).tolist(),
            "age_profile": {
                "thermal": rng.uniform(0.1, 1.0, size=A + 1).tolist(),
                "electric": rng.uniform(0.1, 1.0, size=A + 1).tolist(),
            },
        },
    }


def random_scenario(rng, **kw):
    return scenario_from_dict(random_scenario_doc(rng, **kw))


def random_control(rng, scenario):
    high = np.asarray(scenario.topology.max_slope)[:, None] + 1
    return rng.integers(-1, high, size=(scenario.zones, scenario.horizon))


@pytest.fixture(scope="session")
def idf():
    return load_scenario("idf_fixture")


@pytest.fixture(scope="session")
def tiny():
    return load_scenario("tiny_instance")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
