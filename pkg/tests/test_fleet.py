import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lezbackcast.errors import StructuralError, ValidationError
from lezbackcast.fleet import (
    ELECTRIC,
    THERMAL,
    FleetState,
    annual_emissions,
    new_vehicle_count,
    purchase_probabilities,
    simulate,
    simulate_batch,
    split_new_purchases,
    survivors_split,
)
from lezbackcast.ga import no_lez_scenario, reference_control
from lezbackcast.policy import relaxing_control, repair_control

import reference_model
from conftest import random_control, random_scenario


def test_survivors_split_terminal_bin():
    A = 2
    stock = np.zeros((2, A + 1, 1))
    stock[THERMAL, A - 1, 0] = 30.0
    stock[THERMAL, A, 0] = 20.0
    sigma = np.zeros_like(stock)
    sigma[THERMAL, A, 0] = 0.4
    old, disposed = survivors_split(FleetState(2025, stock), sigma, [1.0, 0.8])
    assert old[THERMAL, A, 0] == pytest.approx(24.0)
    assert disposed[THERMAL, A, 0] == pytest.approx(16.0)
    assert not old[:, 0].any() and not disposed[:, 0].any()


def test_survivors_split_rejects_bad_inputs():
    state = FleetState(2025, np.ones((2, 3, 1)))
    sigma = np.zeros((2, 3, 1))
    with pytest.raises(StructuralError):
        survivors_split(state, sigma, [0.9])
    bad = sigma.copy()
    bad[ELECTRIC, 1, 0] = 0.1
    with pytest.raises(ValidationError):
        survivors_split(state, bad, [0.9, 0.9])


def test_new_vehicle_count_and_shrink():
    n, shrink = new_vehicle_count(1.0e7, 1.0e4, 600.0)
    assert (n, shrink) == (400.0, False)
    n, shrink = new_vehicle_count(1.0e6, 1.0e4, 600.0)
    assert (n, shrink) == (0.0, True)


def test_logit_example():
    p1, p2 = purchase_probabilities((0.0, math.log(3.0)), 1.0, 0)
    assert p1 == pytest.approx(0.25, abs=1e-15)
    assert p2 == pytest.approx(0.75, abs=1e-15)
    assert purchase_probabilities((5.0, -5.0), 1.0, 1) == (0.0, 1.0)


def test_logit_is_stable_for_large_utilities():
    p1, p2 = purchase_probabilities((800.0, 0.0), 2.0, 0)
    assert (p1, p2) == (1.0, 0.0)


def test_split_new_purchases_example():
    assert split_new_purchases(100.0, 40.0, 0.5, 0.5) == (30.0, 70.0, False)
    n1, n2, overflow = split_new_purchases(30.0, 40.0, 0.5, 0.5)
    assert (n1, n2, overflow) == (0.0, 30.0, True)


def test_annual_emissions_example():
    stock = np.zeros((2, 2, 1))
    stock[THERMAL, 1, 0] = 1000.0
    stock[ELECTRIC, 0, 0] = 999.0
    assert annual_emissions(FleetState(2025, stock), 10000.0, np.array([0.0, 150.0])) == pytest.approx(1500.0)


def test_fleet_state_rejects_negative_stock():
    stock = np.ones((2, 3, 1))
    stock[0, 1, 0] = -1.0
    with pytest.raises(ValidationError):
        FleetState(2025, stock)


@pytest.mark.parametrize("seed", range(25))
def test_simulate_matches_scalar_reference(seed):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng)
    J, _ = repair_control(random_control(rng, s), s.initial_I, s.topology, s.max_age)
    trace = simulate(s, J)
    ref = reference_model.run(s, J)
    assert np.array_equal(trace.schedule, np.array(ref["I"]))
    for t in range(s.horizon + 1):
        np.testing.assert_allclose(trace.stock[t], np.array(ref["stock"][t]), rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(trace.emissions, ref["emissions"], rtol=1e-12)
    np.testing.assert_allclose(trace.annual_disposals, ref["disposals"], rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_batch_is_bit_identical_to_single_runs(seed):
    rng = np.random.default_rng(100 + seed)
    s = random_scenario(rng)
    raw = np.stack([random_control(rng, s) for _ in range(7)])
    J, _ = repair_control(raw, s.initial_I, s.topology, s.max_age)
    batch = simulate_batch(s, J)
    for b in range(len(J)):
        trace = simulate(s, J[b])
        assert batch.total_disposals[b] == trace.total_disposals
        assert batch.terminal_emissions[b] == trace.terminal_emissions
    assert batch.ok.all()


def test_simulate_strict_rejects_infeasible_control(tiny):
    J = np.full((tiny.zones, tiny.horizon), 5)
    with pytest.raises(ValidationError, match="infeasible control"):
        simulate(tiny, J)
    trace = simulate(tiny, J, strict=False)
    assert trace.schedule[0, -1] == 0


def test_simulate_shape_check(tiny):
    with pytest.raises(StructuralError):
        simulate(tiny, np.zeros((tiny.zones, tiny.horizon + 1), dtype=int))


def test_trace_is_immutable_and_reproducible(tiny):
    a = simulate(tiny, reference_control(tiny))
    b = simulate(tiny, reference_control(tiny))
    assert a.identical(b)
    with pytest.raises(ValueError):
        a.stock[0, 0, 0, 0] = 1.0


def test_idf_reference_values(idf):
    trace = simulate(idf, reference_control(idf))
    assert trace.schedule[:, 0].tolist() == [16, 17, 31, 31, 31, 31]
    assert trace.schedule[0, -1] == 31
    assert trace.terminal_emissions < trace.emissions[0]
    free = simulate(no_lez_scenario(idf), relaxing_control(idf.zones, idf.horizon))
    assert free.total_disposals == 0.0
    assert free.terminal_emissions > trace.terminal_emissions


def test_maximal_tightening_bans_every_thermal_purchase(idf):
    J = np.repeat(idf.topology.slopes[:, None], idf.horizon, axis=1)
    trace = simulate(idf, J, strict=False)
    banned_new = trace.schedule[:, 1:] == 0
    assert banned_new.any()
    assert np.all(trace.new_by_type[1:, THERMAL][banned_new.T] == 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_conservation_invariants(seed):
    rng = np.random.default_rng(seed)
    s = random_scenario(rng)
    J, _ = repair_control(random_control(rng, s), s.initial_I, s.topology, s.max_age)
    tr = simulate(s, J)
    eta = s.exogenous.survival_by_age()
    for t in range(1, s.horizon + 1):
        prev = tr.stock[t - 1]
        aged = np.zeros_like(prev)
        aged[:, 1:-1] = prev[:, :-2]
        aged[:, -1] = prev[:, -2] + prev[:, -1]
        np.testing.assert_allclose(tr.old[t] + tr.disposed[t], eta[None, :, None] * aged, rtol=1e-12, atol=1e-9)
        assert np.all(tr.disposed[t, ELECTRIC] == 0)
        assert np.all(tr.sigma[t, 0] == 0)
        assert np.all((tr.sigma[t] >= 0) & (tr.sigma[t] <= 1))
        np.testing.assert_allclose(tr.new_by_type[t].sum(axis=0), tr.new_total[t], rtol=1e-12, atol=1e-9)
        assert np.all(tr.stock[t] >= 0)
        # demand is served wherever registrations were not clamped
        served = tr.stock[t].sum(axis=(0, 1)) * s.exogenous.mileage[t]
        demand = s.exogenous.demand[:, t]
        ok = ~tr.shrink[t]
        np.testing.assert_allclose(served[ok], demand[ok], rtol=1e-9)
        assert np.all(served[~ok] >= demand[~ok] * (1 - 1e-12))
