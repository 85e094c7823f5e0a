import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from reserve.generators import (
    DEFAULT_MIX,
    PUBLISHED_PERCENTAGES,
    make_hospital_scenario,
    make_ls_tightness_instance,
    make_prop1_instance,
    make_random_setting,
    random_setting_params,
)
from reserve.instance import (
    CustomerType,
    Instance,
    InstanceError,
    RateFunction,
    Resource,
    load_instance,
    save_instance,
)


def test_rate_function_total_and_eval():
    r = RateFunction(((0.0, 1.0, 2.0), (1.0, 3.0, 0.5)))
    assert r.total() == pytest.approx(3.0, rel=1e-12)
    assert r(0.5) == 2.0
    assert r(2.0) == 0.5
    assert (r.start, r.end) == (0.0, 3.0)


@pytest.mark.parametrize(
    "segments, msg",
    [
        (((0.0, 1.0, -1.0),), "rate"),
        (((0.0, 0.0, 1.0),), "t1"),
        (((0.0, 1.0, 1.0), (1.5, 2.0, 1.0)), "previous segment"),
        ((), "no segments"),
    ],
)
def test_rate_function_rejects_bad_segments(segments, msg):
    with pytest.raises(InstanceError, match=msg):
        RateFunction(segments)


@given(st.lists(st.tuples(st.floats(0.01, 5.0), st.floats(0.0, 50.0)), min_size=1, max_size=8))
@settings(max_examples=50, deadline=None)
def test_lambda_is_sum_of_rate_times_length(pieces):
    t, segs = 0.0, []
    for length, rate in pieces:
        segs.append((t, t + length, rate))
        t += length
    r = RateFunction(tuple(segs))
    expected = math.fsum(rate * length for length, rate in pieces)
    assert r.total() == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_instance_arrays_and_roundtrip(tmp_path):
    inst = Instance.uniform_arrivals([1.0, 2.0], [[0.5, 0.0], [1.0, 2.0]], [3.0, 1.5], horizon=2.0)
    assert (inst.n, inst.m) == (2, 2)
    assert_allclose(inst.Lambda, [3.0, 1.5])
    with pytest.raises(ValueError):
        inst.utilization[0, 0] = 9.0
    p = tmp_path / "inst.json"
    save_instance(inst, p)
    doc = json.loads(p.read_text())
    assert set(doc) >= {"horizon", "resources", "types"}
    assert set(doc["types"][0]) >= {"id", "utilization", "rate"}
    assert set(doc["types"][0]["rate"][0]) == {"t0", "t1", "rate"}
    back = load_instance(p)
    assert back.to_dict() == inst.to_dict()


def test_hospital_roundtrip_keeps_scheduling(tmp_path):
    inst = make_hospital_scenario(days=5, sessions_per_day=2)
    p = tmp_path / "h.json"
    save_instance(inst, p)
    back = load_instance(p)
    assert back.scheduling == inst.scheduling
    assert_allclose(back.utilization, inst.utilization)


@pytest.mark.parametrize(
    "mutate, where",
    [
        (lambda d: d["types"][1]["utilization"].__setitem__(0, 5.0), "types[1].utilization[0]"),
        (lambda d: d["types"][0]["utilization"].pop(), "types[0].utilization"),
        (lambda d: d["resources"][1].__setitem__("capacity", 0.0), "resources[1]"),
        (lambda d: d["types"][0]["rate"][0].__setitem__("t1", 0.5), "types[0]"),
        (lambda d: d.pop("horizon"), "horizon"),
    ],
)
def test_loader_reports_first_violation_with_indices(tmp_path, mutate, where):
    inst = Instance.uniform_arrivals([1.0, 2.0], [[0.5, 0.0], [1.0, 2.0]], [3.0, 1.5])
    doc = inst.to_dict()
    mutate(doc)
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(InstanceError) as err:
        load_instance(p)
    assert where in str(err.value)


def test_loader_rejects_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InstanceError):
        load_instance(p)


def test_direct_construction_validates():
    rate = RateFunction.constant(1.0, 0.0, 1.0)
    with pytest.raises(InstanceError):
        Instance((Resource(0, 1.0),), (CustomerType(0, np.array([1.5]), rate),), 1.0)
    with pytest.raises(InstanceError):
        Resource(0, -1.0)


def test_prop1_instance():
    inst = make_prop1_instance(0.05, 1000)
    assert inst.utilization[0, 0] == pytest.approx(0.00005)
    assert inst.utilization[1, 0] == 1.0
    assert inst.Lambda[1] == pytest.approx(0.05)
    assert inst.Lambda[0] * inst.utilization[0, 0] == pytest.approx(0.05, rel=1e-12)
    small = make_prop1_instance(0.01, 500)
    assert small.types[0].rate(0.25) == pytest.approx(1000.0)
    assert small.types[0].rate(0.75) == 0.0
    for eps in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            make_prop1_instance(eps)
    with pytest.raises(ValueError):
        make_prop1_instance(0.05, 50)


def test_tightness_instance():
    inst = make_ls_tightness_instance(0.01, 200)
    u = inst.utilization
    assert u[1, 0] == pytest.approx(0.51)
    assert u[0, 0] == pytest.approx(0.1)
    assert_allclose(u[0, 1:], 0.1 * 0.99)
    assert_allclose(u[1, 1:], 0.51 * 0.99)
    assert inst.Lambda[1] == pytest.approx(0.9804, abs=1e-4)
    assert_allclose(inst.capacity, 1.0)
    with pytest.raises(ValueError):
        make_ls_tightness_instance(0.0, 200)
    with pytest.raises(ValueError):
        make_ls_tightness_instance(0.01, 1)


def test_default_mix_follows_published_shares():
    assert sum(DEFAULT_MIX) == pytest.approx(1.0, abs=1e-12)
    ratios = np.array(DEFAULT_MIX) / np.array(PUBLISHED_PERCENTAGES, dtype=float).clip(1e-300)
    nz = np.array(PUBLISHED_PERCENTAGES) > 0
    assert_allclose(ratios[nz], ratios[nz][0])
    assert DEFAULT_MIX[0] > DEFAULT_MIX[1] > DEFAULT_MIX[2] == 0.0


def test_hospital_structure_and_demand_mass():
    inst = make_hospital_scenario(days=20, sessions_per_day=3, session_minutes=90, deadline_days=4, scale=0.8)
    s = inst.scheduling
    u = inst.utilization
    rday = np.array(s.resource_day)
    for i in range(inst.n):
        days = rday[u[i] > 0]
        if s.type_urgent[i]:
            assert set(days) == {s.type_day[i]}
        else:
            assert days.min() == s.type_day[i]
            assert days.max() == min(s.type_day[i] + 4, 19)
        rate, d = inst.types[i].rate, s.type_day[i]
        assert rate.total() == pytest.approx(rate(d + 0.5))
        if d > 0:
            assert rate(d - 0.5) == 0.0
    mean_u = np.array([row[row > 0].mean() for row in u])
    demand = float(inst.Lambda @ mean_u)
    assert demand == pytest.approx(inst.capacity.sum() / 0.8, rel=0.01)
    assert (u <= inst.capacity).all() and (u >= 0).all()


def test_hospital_zero_deadline_makes_regulars_same_day():
    mix = (0, 0, 0, 0.5, 0.5, 0)
    inst = make_hospital_scenario(days=6, sessions_per_day=2, deadline_days=0, category_mix=mix)
    s = inst.scheduling
    rday = np.array(s.resource_day)
    for i in range(inst.n):
        assert set(rday[inst.utilization[i] > 0]) == {s.type_day[i]}


def test_hospital_full_scale_configuration_builds():
    inst = make_hospital_scenario(days=200, sessions_per_day=18, session_minutes=60, deadline_days=20, scale=0.705)
    assert (inst.n, inst.m) == (1200, 3600)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"category_mix": (0.5, 0.5, 0.1, -0.1, 0.0, 0.0)},
        {"category_mix": (0.5, 0.5, 0.5, 0.0, 0.0, 0.0)},
        {"scale": 0.0},
        {"deadline_days": -1},
        {"session_minutes": 30},
    ],
)
def test_hospital_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        make_hospital_scenario(days=5, sessions_per_day=2, **kwargs)


def test_monday_only_keeps_weekly_volume():
    base = make_hospital_scenario(days=10, sessions_per_day=2)
    mon = make_hospital_scenario(days=10, sessions_per_day=2, regular_weekdays=(0,))
    s = mon.scheduling
    for i in range(mon.n):
        if not s.type_urgent[i] and s.type_day[i] % 5 != 0:
            assert mon.Lambda[i] == 0.0
    assert mon.Lambda.sum() == pytest.approx(base.Lambda.sum(), rel=1e-9)


def test_random_setting_is_deterministic_and_in_range():
    a, b = make_random_setting(7, days=10), make_random_setting(7, days=10)
    assert a.to_dict() == b.to_dict()
    params = [random_setting_params(s) for s in range(100)]
    assert all(5 <= p["deadline_days"] <= 30 for p in params)
    assert all(45 <= p["session_minutes"] <= 150 for p in params)
    assert np.mean([p["scale"] for p in params]) == pytest.approx(1.0, abs=0.05)
    assert all(abs(sum(p["category_mix"]) - 1) < 1e-9 for p in params)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_generated_utilizations_within_capacity(seed):
    inst = make_random_setting(seed, days=6, sessions_per_day=2)
    u = inst.utilization
    assert (u >= 0).all() and (u <= inst.capacity).all()
