import json

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import sparse

from conftest import random_instance
from oracles import lp_by_vertex_enumeration, routing_lp_by_vertex_enumeration
from reserve.generators import make_hospital_scenario, make_ls_tightness_instance, make_prop1_instance
from reserve.instance import Instance, RateFunction, SchedulingInfo
from reserve.lp import (
    FractionalRouting,
    LPError,
    dump_routing,
    is_layered,
    simplex_max,
    solve_for,
    solve_layered_greedy,
    solve_routing_lp,
    upper_bound_check,
)
from reserve.sim import estimate_offline


def test_capacity_binds():
    inst = Instance.uniform_arrivals([1.0], [[1.0]], [2.0])
    r = solve_routing_lp(inst)
    assert r.x[0, 0] == pytest.approx(1.0)
    assert r.objective == pytest.approx(1.0)


def test_demand_binds():
    inst = Instance.uniform_arrivals([1.0], [[1.0]], [0.5])
    r = solve_routing_lp(inst)
    assert r.x[0, 0] == pytest.approx(0.5)
    assert r.objective == pytest.approx(0.5)


def test_zero_utilization_routes_carry_nothing():
    inst = Instance.uniform_arrivals([1.0, 1.0], [[1.0, 0.0], [0.0, 0.0]], [5.0, 3.0])
    r = solve_routing_lp(inst)
    assert r.x[0, 1] == 0 and (r.x[1] == 0).all()
    assert r.objective == pytest.approx(1.0)


def test_zero_demand_instance():
    inst = Instance.uniform_arrivals([1.0], [[0.5]], [0.0])
    r = solve_routing_lp(inst)
    assert r.objective == 0.0
    assert upper_bound_check(inst, r, 0.0, 0.0)


@pytest.mark.parametrize("seed", range(50))
def test_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    r = solve_routing_lp(inst)
    r.check(inst)
    ref = routing_lp_by_vertex_enumeration(inst.capacity, inst.utilization, inst.Lambda)
    assert r.objective == pytest.approx(ref, rel=1e-6, abs=1e-12)


def test_simplex_on_generic_lp():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
    A = sparse.csc_matrix([[1.0, 0.0], [0.0, 2.0], [3.0, 2.0]])
    x, obj, _ = simplex_max([3.0, 5.0], A, [4.0, 12.0, 18.0])
    assert_allclose(x, [2.0, 6.0])
    assert obj == pytest.approx(36.0)


def test_simplex_degenerate_problem_terminates():
    # classic cycling example for Dantzig pricing with lowest-index tie breaks
    c = np.array([0.75, -150.0, 0.02, -6.0])
    A = np.array([[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]])
    b = np.array([0.0, 0.0, 1.0])
    x, obj, _ = simplex_max(c, A, b, degenerate_limit=2)
    assert obj == pytest.approx(lp_by_vertex_enumeration(c, A, b), abs=1e-9)


def test_simplex_unbounded_and_bad_rhs():
    with pytest.raises(LPError):
        simplex_max([1.0], np.array([[-1.0]]), [1.0])
    with pytest.raises(ValueError):
        simplex_max([1.0], np.array([[1.0]]), [-1.0])


def test_tightness_lp_has_the_unique_optimum():
    inst = make_ls_tightness_instance(0.01, 500)
    r = solve_routing_lp(inst)
    assert r.x[0, 0] == pytest.approx(inst.Lambda[0])
    assert r.x[1, 0] == pytest.approx(inst.Lambda[1])
    assert r.x[:, 1:].sum() == pytest.approx(0.0, abs=1e-12)
    assert r.objective == pytest.approx(1.0)


def test_greedy_single_session():
    # one day, one 60-minute session; 30 urgent minutes and 45 regular minutes of demand
    u = [[30.0], [45.0]]
    rates = [RateFunction.constant(1.0, 0.0, 1.0), RateFunction.constant(1.0, 0.0, 1.0)]
    info = SchedulingInfo(resource_day=(0,), type_day=(0, 0), type_category=(1, 5), type_urgent=(True, False),
                          sessions_per_day=1, session_minutes=60.0, deadline_days=0, scale=1.0,
                          category_mix=(0, 0.5, 0, 0, 0, 0.5))
    inst = Instance.from_arrays([60.0], u, rates, 1.0, scheduling=info)
    r = solve_layered_greedy(inst)
    assert r.objective == pytest.approx(60.0)
    assert r.x[0, 0] == pytest.approx(1.0)
    assert r.x[1, 0] == pytest.approx(30.0 / 45.0)


@pytest.mark.parametrize("seed", range(50))
def test_greedy_matches_simplex_on_hospital_scenarios(seed):
    rng = np.random.default_rng(1000 + seed)
    inst = make_hospital_scenario(
        days=int(rng.integers(3, 11)),
        sessions_per_day=int(rng.integers(1, 4)),
        session_minutes=float(rng.uniform(45, 150)),
        deadline_days=int(rng.integers(0, 6)),
        scale=float(rng.uniform(0.6, 1.4)),
        category_mix=rng.dirichlet(np.ones(6)),
    )
    g = solve_layered_greedy(inst)
    s = solve_routing_lp(inst)
    assert g.objective == pytest.approx(s.objective, rel=1e-7)


def test_abundant_capacity_serves_all_demand():
    inst = make_hospital_scenario(days=10, sessions_per_day=2, scale=1.3)
    r = solve_layered_greedy(inst)
    mass = sum(inst.Lambda[i] * inst.utilization[i][inst.utilization[i] > 0][0] for i in range(inst.n))
    assert r.objective == pytest.approx(mass, rel=1e-7)


def test_greedy_rejects_unstructured_instances():
    inst = Instance.uniform_arrivals([1.0], [[0.5]], [1.0])
    assert not is_layered(inst)
    with pytest.raises(ValueError):
        solve_layered_greedy(inst)
    assert solve_for(inst).method == "simplex"


def test_routing_invariants_are_enforced():
    inst = Instance.uniform_arrivals([1.0], [[1.0]], [2.0])
    FractionalRouting(np.array([[1.0]]), 1.0).check(inst)
    with pytest.raises(AssertionError):
        FractionalRouting(np.array([[1.5]]), 1.5).check(inst)
    with pytest.raises(AssertionError):
        FractionalRouting(np.array([[1.0]]), 0.5).check(inst)


def test_upper_bound_check_on_prop1_and_violation():
    inst = make_prop1_instance(0.05, 1000)
    r = solve_routing_lp(inst)
    assert r.objective == pytest.approx(0.1)
    est = estimate_offline(inst, "prop1_exact", 100_000, 3)
    assert upper_bound_check(inst, r, est)
    assert not upper_bound_check(inst, r, r.objective + 10 * 0.01, 0.01)


def test_dump_mirrors_matrix(tmp_path):
    inst = Instance.uniform_arrivals([1.0, 2.0], [[0.5, 1.0], [1.0, 0.0]], [1.0, 1.0])
    r = solve_routing_lp(inst)
    p = tmp_path / "lp.json"
    dump_routing(r, p)
    doc = json.loads(p.read_text())
    assert doc["objective"] == pytest.approx(r.objective)
    assert_allclose(np.array(doc["x"]), r.x)
    assert (doc["n"], doc["m"]) == (2, 2)
