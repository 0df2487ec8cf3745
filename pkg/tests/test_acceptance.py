"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import time

import numpy as np
import pytest

from lezbackcast.cli import main as cli_main
from lezbackcast.fleet import THERMAL, FleetState, purchase_probabilities, simulate, survivors_split
from lezbackcast.ga import (
    EmissionTarget,
    GaConfig,
    evolve,
    no_lez_scenario,
    pareto_sweep,
    reference_control,
    reference_emissions,
    targets_from_betas,
)
from lezbackcast.oracle import TinyInstance, enumerate_optimal
from lezbackcast.policy import disposal_ratios, relaxing_control, repair_control, validate_control
from lezbackcast.results import ResultsBundle, read_schedule, write_results
from lezbackcast.scenario import DEFAULT_TARGETS, dump_scenario, load_scenario

from conftest import ACCEPTANCE_LINES, random_control, random_scenario


def record(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


@pytest.fixture(scope="session")
def full_sweep():
    s = load_scenario("idf_fixture")
    ref = reference_emissions(s)
    start = time.perf_counter()
    outcomes = pareto_sweep(s, targets_from_betas(DEFAULT_TARGETS, ref), GaConfig())
    return s, outcomes, time.perf_counter() - start


@pytest.fixture(scope="session")
def tiny_runs():
    s = load_scenario("tiny_instance")
    target = EmissionTarget.from_beta(s.targets[0], reference_emissions(s))
    start = time.perf_counter()
    oracle = enumerate_optimal(TinyInstance(s), target)
    runs = [evolve(s, target, GaConfig(rng_seed=k)) for k in range(20)]
    return s, oracle, runs, time.perf_counter() - start


def test_criterion_1_demand_balance():
    start = time.perf_counter()
    worst, cells, flagged = 0.0, 0, 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        s = random_scenario(rng)
        J, _ = repair_control(random_control(rng, s), s.initial_I, s.topology, s.max_age)
        tr = simulate(s, J)
        for t in range(1, s.horizon + 1):
            served = s.exogenous.mileage[t] * tr.stock[t].sum(axis=(0, 1))
            demand = s.exogenous.demand[:, t]
            ok = ~tr.shrink[t]
            flagged += int((~ok).sum())
            cells += int(ok.sum())
            if ok.any():
                worst = max(worst, float(np.max(np.abs(served[ok] - demand[ok]) / demand[ok])))
    elapsed = time.perf_counter() - start
    record(
        1, "demand balance", worst <= 1e-9 and elapsed < 10 and cells > 0,
        f"{cells} cells, {flagged} flagged, max rel err {worst:.2e}, {elapsed:.2f} s",
    )


def test_criterion_2_no_lez_baseline():
    start = time.perf_counter()
    results = []
    for name in ("idf_fixture", "tiny_instance"):
        s = no_lez_scenario(load_scenario(name))
        tr = simulate(s, relaxing_control(s.zones, s.horizon))
        results.append((bool((tr.schedule == s.max_age + 1).all()), tr.cumulative_disposals[-1]))
    elapsed = time.perf_counter() - start
    passed = all(full and r == 0.0 for full, r in results) and elapsed < 1
    record(2, "no-LEZ disposals identically zero", passed, f"R(T) = {[float(r) for _, r in results]}, {elapsed:.3f} s")


def test_criterion_3_flow_conservation_and_sigma():
    start = time.perf_counter()
    worst_flow, sigma_bad, prob_bad, checked = 0.0, 0, 0.0, 0
    for seed in range(200):
        rng = np.random.default_rng(10_000 + seed)
        s = random_scenario(rng)
        A, Z = s.max_age, s.zones
        eta = s.exogenous.survival_by_age()
        I_t = rng.integers(0, A + 2, size=Z)
        pi, sig = disposal_ratios(I_t, s.topology, s.behavior, A)
        sigma = np.zeros((2, A + 1, Z))
        sigma[THERMAL] = sig
        prev = FleetState(s.base_year, rng.uniform(0.0, 1e4, size=(2, A + 1, Z)))
        old, disposed = survivors_split(prev, sigma, s.exogenous.survival)
        aged = np.zeros_like(prev.stock)
        aged[:, 1:-1] = prev.stock[:, :-2]
        aged[:, -1] = prev.stock[:, -2] + prev.stock[:, -1]
        expected = eta[None, :, None] * aged
        nz = expected > 0
        worst_flow = max(worst_flow, float(np.max(np.abs(old + disposed - expected)[nz] / expected[nz])))
        for a in range(1, A + 1):
            for z in range(Z):
                count = sum(pi[a, w] for w in s.topology.neighbors[z])
                if pi[a, z] == 1:
                    sigma_bad += sig[a, z] != s.behavior.K_M
                    checked += 1
                elif count == 0 and I_t[z] <= A:
                    sigma_bad += sig[a, z] != s.behavior.K_m
                    checked += 1
        u = rng.normal(scale=5.0, size=(2, 16))
        p1, p2 = purchase_probabilities(u, float(rng.uniform(0.1, 5.0)), rng.integers(0, 2, size=16))
        prob_bad = max(prob_bad, float(np.max(np.abs(p1 + p2 - 1.0))))
    elapsed = time.perf_counter() - start
    passed = worst_flow <= 1e-12 and sigma_bad == 0 and prob_bad <= 1e-15 and elapsed < 5
    record(
        3, "flow conservation and sigma algebra", passed,
        f"max rel flow err {worst_flow:.1e}, {checked} sigma cells with {sigma_bad} wrong, "
        f"max |P1+P2-1| {prob_bad:.1e}, {elapsed:.2f} s",
    )


@pytest.mark.slow
def test_criterion_4_oracle_equivalence(tiny_runs):
    s, oracle, runs, elapsed = tiny_runs
    matched = sum(o.feasible and o.objective_R == oracle.optimal_R for o in runs)
    feasible = sum(o.feasible for o in runs)
    passed = oracle.feasible and matched >= 19 and feasible == 20 and elapsed < 120
    record(
        4, "GA attains the exhaustive optimum", passed,
        f"oracle R={oracle.optimal_R:.10g} over {oracle.distinct} distinct controls, "
        f"matched {matched}/20, feasible {feasible}/20, {elapsed:.1f} s",
    )


@pytest.mark.slow
def test_criterion_5_constraint_satisfaction(full_sweep, tiny_runs, tmp_path):
    checked, problems = 0, []
    fleets = [(full_sweep[0], full_sweep[1]), (tiny_runs[0], tiny_runs[2])]
    for s, outcomes in fleets:
        for o in outcomes:
            checked += 1
            rep = validate_control(o.best_control, s.initial_I, s.topology, s.max_age)
            if rep.violations:
                problems.append(f"{s.name} beta={o.target.beta}: {len(rep.violations)} violations")
            again = simulate(load_scenario(s.name), np.array(o.best_control))
            if o.feasible and not again.terminal_emissions <= o.target.cap:
                problems.append(f"{s.name} beta={o.target.beta}: E(T) above cap")
    # schedules written by the CLI are replayed from disk
    for cmd in (["optimize", "--beta", "0.2"], ["pareto", "--betas", "0.1", "0.2", "0.3"]):
        out = tmp_path / cmd[0]
        code = cli_main([*cmd, "--scenario", "tiny_instance", "--gens", "200", "--out", str(out)])
        if code != 0:
            problems.append(f"{cmd[0]} exited {code}")
        s = load_scenario("tiny_instance")
        for label, (_, I) in read_schedule(out / "schedule.csv").items():
            checked += 1
            J = I[:, :-1] - I[:, 1:]
            if not validate_control(J, s.initial_I, s.topology, s.max_age).feasible:
                problems.append(f"{cmd[0]} {label}: infeasible schedule on disk")
    record(5, "emitted controls are feasible", not problems, f"{checked} controls, problems {problems or 'none'}")


@pytest.mark.slow
def test_criterion_6_pareto_monotonicity(full_sweep):
    s, outcomes, elapsed = full_sweep
    R = [o.objective_R for o in outcomes]
    E = [o.terminal_E for o in outcomes]
    betas = [o.target.beta for o in outcomes]
    mono = all(a <= b for a, b in zip(R, R[1:])) and all(a >= b for a, b in zip(E, E[1:]))
    feasible = all(o.feasible for o in outcomes)
    front = ", ".join(f"b={b:.2f}: R={r / 1e6:.3f}M E={e / 1e6:.3f}Mt" for b, r, e in zip(betas, R, E))
    record(
        6, "Pareto sweep monotone and feasible", mono and feasible and elapsed < 900 and tuple(betas) == DEFAULT_TARGETS,
        f"{front}; {elapsed:.0f} s",
    )


def test_criterion_7_schedule_semantics(tmp_path, idf):
    loaded = load_scenario(dump_scenario(idf, tmp_path / "scenario.json"))
    tr = simulate(loaded, reference_control(loaded))
    write_results(ResultsBundle(loaded.max_age, {"reference": tr}, schedules={"reference": tr}), tmp_path)
    years, I = read_schedule(tmp_path / "schedule.csv")["reference"]
    row0 = I[:, 0].tolist()
    slopes = list(loaded.topology.max_slope)
    passed = (
        years[0] == 2025
        and row0 == [16, 17, 31, 31, 31, 31]
        and slopes == [4, 3, 3, 2, 2, 1]
        and np.array_equal(I, tr.schedule)
    )
    record(7, "reference schedule CSV round-trip", passed, f"I0={row0}, D={slopes}")


@pytest.mark.slow
def test_criterion_8_determinism(tmp_path):
    args = ["optimize", "--scenario", "idf_fixture", "--beta", "0.55", "--seed", "11"]
    start = time.perf_counter()
    codes = [
        cli_main([*args, "--workers", "1", "--out", str(tmp_path / "serial")]),
        cli_main([*args, "--workers", "2", "--out", str(tmp_path / "parallel")]),
    ]
    elapsed = time.perf_counter() - start
    same = {
        name: (tmp_path / "serial" / name).read_bytes() == (tmp_path / "parallel" / name).read_bytes()
        for name in ("pareto.csv", "emissions.csv", "disposals.csv", "schedule.csv")
    }
    record(
        8, "serial and parallel optimize are byte-identical", all(same.values()) and codes == [0, 0],
        f"exit codes {codes}, identical {same}, {elapsed:.0f} s",
    )
