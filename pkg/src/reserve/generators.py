"""Instance constructors: adversarial constructions and appointment-scheduling scenarios."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .instance import CustomerType, Instance, RateFunction, Resource, SchedulingInfo

__all__ = [
    "CATEGORIES",
    "DEFAULT_MIX",
    "DEFAULT_WEEKDAY_WEIGHTS",
    "make_prop1_instance",
    "make_ls_tightness_instance",
    "make_hospital_scenario",
    "make_random_setting",
]

# (urgent?, appointment minutes); list order is also the nested-reservation priority
CATEGORIES: tuple[tuple[bool, int], ...] = (
    (True, 15),
    (True, 30),
    (True, 45),
    (False, 15),
    (False, 30),
    (False, 45),
)
CATEGORY_NAMES = ("urgent15", "urgent30", "urgent45", "reg15", "reg30", "reg45")

# published category percentages; they add up to 96%, so the default mix renormalizes them
PUBLISHED_PERCENTAGES = (27.0, 1.0, 0.0, 45.0, 14.0, 9.0)
DEFAULT_MIX = tuple(p / sum(PUBLISHED_PERCENTAGES) for p in PUBLISHED_PERCENTAGES)

# Mon..Fri relative arrival volume; Thursday is 60% above Wednesday
DEFAULT_WEEKDAY_WEIGHTS = (1.00, 0.95, 0.80, 1.28, 0.97)


def make_prop1_instance(epsilon: float, lambda1_total: float = 1000.0) -> Instance:
    """Two types, one unit resource on [0, 1].

    Type 1 floods [0, 0.5] with ``lambda1_total`` expected arrivals of size
    ``epsilon / lambda1_total``; type 2 arrives on (0.5, 1] with mean count
    ``epsilon`` and needs the whole resource.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if lambda1_total < 100:
        raise ValueError(f"lambda1_total must be >= 100, got {lambda1_total}")
    rates = [
        RateFunction(((0.0, 0.5, 2.0 * lambda1_total), (0.5, 1.0, 0.0))),
        RateFunction(((0.0, 0.5, 0.0), (0.5, 1.0, 2.0 * epsilon))),
    ]
    u = [[epsilon / lambda1_total], [1.0]]
    return Instance.from_arrays(
        [1.0], u, rates, 1.0,
        family="prop1", params={"epsilon": epsilon, "lambda1_total": lambda1_total},
    )


def make_ls_tightness_instance(epsilon: float, m: int = 500) -> Instance:
    """Instance on which LS earns only (1 - 1/e)/2 of the offline optimum as epsilon -> 0."""
    if m < 2:
        raise ValueError(f"need at least two resources, got m={m}")
    if not (0.0 < epsilon < 0.1):
        raise ValueError(f"epsilon must lie in (0, 0.1), got {epsilon}")
    u = np.empty((2, m))
    u[0, 0] = 0.1
    u[0, 1:] = 0.1 * (1 - epsilon)
    u[1, 0] = 0.5 + epsilon
    u[1, 1:] = (0.5 + epsilon) * (1 - epsilon)
    lam = [5.0, 0.5 / (0.5 + epsilon)]
    return Instance.uniform_arrivals(
        np.ones(m), u, lam, 1.0,
        family="ls_tight", params={"epsilon": epsilon, "m": m},
    )


def make_hospital_scenario(
    days: int = 50,
    sessions_per_day: int = 8,
    session_minutes: float = 60.0,
    deadline_days: int = 20,
    scale: float = 1.0,
    category_mix: Sequence[float] = DEFAULT_MIX,
    weekday_weights: Sequence[float] = DEFAULT_WEEKDAY_WEIGHTS,
    regular_weekdays: Sequence[int] = (0, 1, 2, 3, 4),
    urgent_weekdays: Sequence[int] = (0, 1, 2, 3, 4),
) -> Instance:
    """Appointment-scheduling instance over ``days`` working days.

    Every (day, session) is a resource holding ``session_minutes``.  Every
    (arrival day, category) is a customer type whose arrivals all fall inside
    its arrival day.  Urgent types may only use same-day sessions; regular types
    may use any session up to ``deadline_days`` working days later.  Arrival
    volumes follow ``weekday_weights`` (day 0 is a Monday) and are scaled so the
    expected demand in minutes equals total capacity divided by ``scale``.

    ``regular_weekdays`` / ``urgent_weekdays`` restrict on which weekdays each
    class arrives; a class's weekly volume is kept and spread over the allowed
    weekdays in proportion to their weights.
    """
    mix = np.asarray(category_mix, dtype=float)
    if mix.shape != (len(CATEGORIES),):
        raise ValueError(f"category_mix needs {len(CATEGORIES)} entries")
    if (mix < 0).any():
        raise ValueError(f"category_mix has a negative entry: {tuple(mix)}")
    if abs(mix.sum() - 1.0) > 1e-9:
        raise ValueError(f"category_mix must sum to 1, sums to {mix.sum()!r}")
    if days < 1 or sessions_per_day < 1:
        raise ValueError("days and sessions_per_day must be positive")
    if deadline_days < 0:
        raise ValueError(f"deadline_days must be >= 0, got {deadline_days}")
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    longest = max(mins for (_, mins), p in zip(CATEGORIES, mix) if p > 0)
    if session_minutes < longest:
        raise ValueError(f"session_minutes={session_minutes} cannot fit a {longest}-minute appointment")
    w = np.asarray(weekday_weights, dtype=float)
    if w.shape != (5,) or (w < 0).any() or w.sum() <= 0:
        raise ValueError("weekday_weights must be 5 nonnegative numbers, not all zero")

    allowed = {
        True: np.isin(np.arange(5), list(urgent_weekdays)),
        False: np.isin(np.arange(5), list(regular_weekdays)),
    }
    # weight of category k on weekday d, before the global volume factor
    shape = np.zeros((5, len(CATEGORIES)))
    for k, (urgent, _) in enumerate(CATEGORIES):
        wk = np.where(allowed[urgent], w, 0.0)
        if mix[k] > 0 and wk.sum() == 0:
            raise ValueError("a category with positive share has no allowed weekday")
        if mix[k] > 0:
            shape[:, k] = mix[k] * wk * (w.sum() / wk.sum())
    minutes = np.array([mins for _, mins in CATEGORIES], dtype=float)

    weekday = np.arange(days) % 5
    per_type = shape[weekday]  # days x categories
    capacity_total = days * sessions_per_day * session_minutes
    demand_minutes = capacity_total / scale
    volume = demand_minutes / float((per_type * minutes).sum())
    lam = volume * per_type

    m = days * sessions_per_day
    resource_day = np.repeat(np.arange(days), sessions_per_day)
    resources = tuple(Resource(j, float(session_minutes)) for j in range(m))
    types = []
    type_day, type_cat, type_urgent = [], [], []
    for d in range(days):
        for k, (urgent, mins) in enumerate(CATEGORIES):
            last = d if urgent else min(d + deadline_days, days - 1)
            u = np.zeros(m)
            u[d * sessions_per_day:(last + 1) * sessions_per_day] = mins
            rate = RateFunction.window(float(lam[d, k]), float(d), float(d + 1), float(days))
            types.append(CustomerType(len(types), u, rate))
            type_day.append(d)
            type_cat.append(k)
            type_urgent.append(urgent)
    info = SchedulingInfo(
        resource_day=tuple(int(v) for v in resource_day),
        type_day=tuple(type_day),
        type_category=tuple(type_cat),
        type_urgent=tuple(type_urgent),
        sessions_per_day=sessions_per_day,
        session_minutes=float(session_minutes),
        deadline_days=int(deadline_days),
        scale=float(scale),
        category_mix=tuple(float(v) for v in mix),
    )
    params = {
        "days": days,
        "sessions_per_day": sessions_per_day,
        "session_minutes": float(session_minutes),
        "deadline_days": int(deadline_days),
        "scale": float(scale),
        "category_mix": [float(v) for v in mix],
        "weekday_weights": [float(v) for v in w],
        "regular_weekdays": sorted(int(v) for v in regular_weekdays),
        "urgent_weekdays": sorted(int(v) for v in urgent_weekdays),
    }
    return Instance(resources, tuple(types), float(days), family="hospital", params=params, scheduling=info)


def random_setting_params(seed: int) -> dict:
    """Draw the randomized scenario parameters for ``seed``."""
    rng = np.random.default_rng(seed)
    mix = rng.dirichlet(np.ones(len(CATEGORIES)))
    mix = mix / mix.sum()
    return {
        "category_mix": [float(v) for v in mix],
        "deadline_days": int(rng.integers(5, 31)),
        "session_minutes": float(rng.uniform(45.0, 150.0)),
        "scale": float(rng.uniform(0.7, 1.3)),
    }


def make_random_setting(seed: int, days: int = 50, sessions_per_day: int = 4) -> Instance:
    """Hospital scenario with randomized mix, deadline, session length and scale."""
    p = random_setting_params(seed)
    inst = make_hospital_scenario(
        days=days,
        sessions_per_day=sessions_per_day,
        session_minutes=p["session_minutes"],
        deadline_days=p["deadline_days"],
        scale=p["scale"],
        category_mix=p["category_mix"],
    )
    params = dict(inst.params, seed=int(seed))
    return Instance(inst.resources, inst.types, inst.horizon, family="random", params=params,
                    scheduling=inst.scheduling)
