"""Problem datum: resources, customer types, piecewise-constant arrival rates.

An :class:`Instance` is immutable after construction.  Dense arrays
(``capacity``, ``utilization``, ``Lambda``) are cached at construction time so
solvers and policies can share them read-only.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "InstanceError",
    "RateFunction",
    "CustomerType",
    "Resource",
    "SchedulingInfo",
    "Instance",
    "load_instance",
    "save_instance",
]

# relative slack allowed when checking that segments tile [0, T]
_COVER_TOL = 1e-12


class InstanceError(ValueError):
    """Raised when an instance violates one of its invariants."""


@dataclass(frozen=True)
class RateFunction:
    """Piecewise-constant arrival rate on ``[0, T]``.

    ``segments`` is a tuple of ``(t0, t1, rate)`` triples, ordered, contiguous
    and non-overlapping.
    """

    segments: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        segs = tuple((float(a), float(b), float(r)) for a, b, r in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise InstanceError("rate function has no segments")
        for k, (t0, t1, rate) in enumerate(segs):
            if not (t1 > t0):
                raise InstanceError(f"segment {k}: t1={t1} must exceed t0={t0}")
            if not rate >= 0 or not math.isfinite(rate):
                raise InstanceError(f"segment {k}: rate={rate} must be finite and >= 0")
            if k > 0 and abs(t0 - segs[k - 1][1]) > _COVER_TOL * max(1.0, abs(t0)):
                raise InstanceError(
                    f"segment {k}: starts at {t0} but previous segment ends at {segs[k - 1][1]}"
                )

    @classmethod
    def constant(cls, rate: float, t0: float, t1: float) -> "RateFunction":
        return cls(((t0, t1, rate),))

    @classmethod
    def window(cls, total: float, start: float, end: float, horizon: float) -> "RateFunction":
        """Rate that delivers ``total`` expected arrivals uniformly on [start, end), zero elsewhere."""
        segs = []
        if start > 0:
            segs.append((0.0, start, 0.0))
        segs.append((start, end, total / (end - start)))
        if end < horizon:
            segs.append((end, horizon, 0.0))
        return cls(tuple(segs))

    @property
    def start(self) -> float:
        return self.segments[0][0]

    @property
    def end(self) -> float:
        return self.segments[-1][1]

    def total(self) -> float:
        """Integral of the rate over its support (expected arrival count)."""
        return math.fsum(r * (t1 - t0) for t0, t1, r in self.segments)

    def __call__(self, t: float) -> float:
        for t0, t1, r in self.segments:
            if t0 <= t < t1:
                return r
        if t == self.end:
            return self.segments[-1][2]
        return 0.0


@dataclass(frozen=True)
class Resource:
    id: int
    capacity: float

    def __post_init__(self):
        if not (self.capacity > 0) or not math.isfinite(self.capacity):
            raise InstanceError(f"resources[{self.id}]: capacity={self.capacity} must be > 0")


@dataclass(frozen=True, eq=False)
class CustomerType:
    id: int
    utilization: np.ndarray
    rate: RateFunction

    def __post_init__(self):
        u = np.array(self.utilization, dtype=float)
        u.setflags(write=False)
        object.__setattr__(self, "utilization", u)

    @property
    def Lambda(self) -> float:
        return self.rate.total()


@dataclass(frozen=True)
class SchedulingInfo:
    """Calendar metadata attached to appointment-scheduling instances.

    Resources are (day, session) pairs and types are (arrival day, category)
    pairs.  Category indices follow :data:`reserve.generators.CATEGORIES`, which
    is also the priority order used by nested reservation.
    """

    resource_day: tuple[int, ...]
    type_day: tuple[int, ...]
    type_category: tuple[int, ...]
    type_urgent: tuple[bool, ...]
    sessions_per_day: int
    session_minutes: float
    deadline_days: int
    scale: float
    category_mix: tuple[float, ...]
    layered: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "resource_day": list(self.resource_day),
            "type_day": list(self.type_day),
            "type_category": list(self.type_category),
            "type_urgent": list(self.type_urgent),
            "sessions_per_day": self.sessions_per_day,
            "session_minutes": self.session_minutes,
            "deadline_days": self.deadline_days,
            "scale": self.scale,
            "category_mix": list(self.category_mix),
            "layered": self.layered,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SchedulingInfo":
        return cls(
            resource_day=tuple(int(v) for v in d["resource_day"]),
            type_day=tuple(int(v) for v in d["type_day"]),
            type_category=tuple(int(v) for v in d["type_category"]),
            type_urgent=tuple(bool(v) for v in d["type_urgent"]),
            sessions_per_day=int(d["sessions_per_day"]),
            session_minutes=float(d["session_minutes"]),
            deadline_days=int(d["deadline_days"]),
            scale=float(d["scale"]),
            category_mix=tuple(float(v) for v in d["category_mix"]),
            layered=bool(d.get("layered", True)),
        )


@dataclass(frozen=True, eq=False)
class Instance:
    """Resources, customer types and the horizon ``[0, T]``.

    ``family`` and ``params`` record which constructor produced the instance;
    the offline oracles use them to refuse instances they do not understand.
    """

    resources: tuple[Resource, ...]
    types: tuple[CustomerType, ...]
    horizon: float
    family: str = "custom"
    params: dict[str, Any] = field(default_factory=dict)
    scheduling: SchedulingInfo | None = None

    def __post_init__(self):
        object.__setattr__(self, "resources", tuple(self.resources))
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "horizon", float(self.horizon))
        m, n = len(self.resources), len(self.types)
        cap = np.array([r.capacity for r in self.resources], dtype=float)
        _validate(self, cap)
        u = np.stack([t.utilization for t in self.types]) if n else np.zeros((0, m))
        lam = np.array([t.Lambda for t in self.types], dtype=float)
        for arr in (cap, u, lam):
            arr.setflags(write=False)
        object.__setattr__(self, "_capacity", cap)
        object.__setattr__(self, "_utilization", u)
        object.__setattr__(self, "_Lambda", lam)

    @property
    def m(self) -> int:
        return len(self.resources)

    @property
    def n(self) -> int:
        return len(self.types)

    @property
    def capacity(self) -> np.ndarray:
        return self._capacity

    @property
    def utilization(self) -> np.ndarray:
        return self._utilization

    @property
    def Lambda(self) -> np.ndarray:
        return self._Lambda

    @classmethod
    def from_arrays(
        cls,
        capacity: Sequence[float],
        utilization: Sequence[Sequence[float]] | np.ndarray,
        rates: Iterable[RateFunction],
        horizon: float,
        **meta,
    ) -> "Instance":
        resources = tuple(Resource(j, float(c)) for j, c in enumerate(capacity))
        u = np.asarray(utilization, dtype=float)
        types = tuple(CustomerType(i, u[i], rf) for i, rf in enumerate(rates))
        return cls(resources, types, horizon, **meta)

    @classmethod
    def uniform_arrivals(
        cls,
        capacity: Sequence[float],
        utilization: Sequence[Sequence[float]] | np.ndarray,
        Lambda: Sequence[float],
        horizon: float = 1.0,
        **meta,
    ) -> "Instance":
        """Instance whose types all arrive at constant rate over the whole horizon."""
        rates = [RateFunction.constant(lam / horizon, 0.0, horizon) for lam in Lambda]
        return cls.from_arrays(capacity, utilization, rates, horizon, **meta)

    # JSON document -------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "horizon": self.horizon,
            "resources": [{"id": r.id, "capacity": r.capacity} for r in self.resources],
            "types": [
                {
                    "id": t.id,
                    "utilization": t.utilization.tolist(),
                    "rate": [{"t0": a, "t1": b, "rate": r} for a, b, r in t.rate.segments],
                }
                for t in self.types
            ],
        }
        if self.family != "custom":
            doc["family"] = self.family
            doc["params"] = dict(self.params)
        if self.scheduling is not None:
            doc["scheduling"] = self.scheduling.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "Instance":
        for key in ("horizon", "resources", "types"):
            if key not in doc:
                raise InstanceError(f"missing top-level field {key!r}")
        resources = []
        for j, r in enumerate(doc["resources"]):
            if not {"id", "capacity"} <= set(r):
                raise InstanceError(f"resources[{j}]: needs fields 'id' and 'capacity'")
            if int(r["id"]) != j:
                raise InstanceError(f"resources[{j}]: id={r['id']} does not match position")
            resources.append(Resource(j, float(r["capacity"])))
        types = []
        for i, t in enumerate(doc["types"]):
            if not {"id", "utilization", "rate"} <= set(t):
                raise InstanceError(f"types[{i}]: needs fields 'id', 'utilization', 'rate'")
            if int(t["id"]) != i:
                raise InstanceError(f"types[{i}]: id={t['id']} does not match position")
            try:
                rf = RateFunction(tuple((s["t0"], s["t1"], s["rate"]) for s in t["rate"]))
            except InstanceError as exc:
                raise InstanceError(f"types[{i}].rate: {exc}") from None
            except KeyError as exc:
                raise InstanceError(f"types[{i}].rate: missing field {exc}") from None
            try:
                util = np.array(t["utilization"], dtype=float)
            except (TypeError, ValueError):
                raise InstanceError(f"types[{i}].utilization: not a list of numbers") from None
            if util.ndim != 1:
                raise InstanceError(f"types[{i}].utilization: must be a flat list")
            types.append(CustomerType(i, util, rf))
        sched = doc.get("scheduling")
        return cls(
            tuple(resources),
            tuple(types),
            float(doc["horizon"]),
            family=doc.get("family", "custom"),
            params=dict(doc.get("params", {})),
            scheduling=SchedulingInfo.from_dict(sched) if sched else None,
        )


def _validate(inst: Instance, cap: np.ndarray) -> None:
    """Raise InstanceError naming the first violated invariant."""
    T = inst.horizon
    if not (T > 0) or not math.isfinite(T):
        raise InstanceError(f"horizon={T} must be positive and finite")
    m = len(inst.resources)
    for j, r in enumerate(inst.resources):
        if r.id != j:
            raise InstanceError(f"resources[{j}]: id={r.id} does not match position")
    for i, t in enumerate(inst.types):
        if t.id != i:
            raise InstanceError(f"types[{i}]: id={t.id} does not match position")
        if len(t.utilization) != m:
            raise InstanceError(
                f"types[{i}].utilization: length {len(t.utilization)} != number of resources {m}"
            )
        bad = ~((t.utilization >= 0.0) & (t.utilization <= cap))
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            raise InstanceError(
                f"types[{i}].utilization[{j}]: {t.utilization[j]} outside [0, capacity={cap[j]}]"
            )
        tol = _COVER_TOL * max(1.0, T)
        if abs(t.rate.start) > tol or abs(t.rate.end - T) > tol:
            raise InstanceError(
                f"types[{i}].rate: covers [{t.rate.start}, {t.rate.end}] instead of [0, {T}]"
            )
    s = inst.scheduling
    if s is not None:
        if len(s.resource_day) != m:
            raise InstanceError("scheduling.resource_day: length does not match resources")
        n = len(inst.types)
        for name in ("type_day", "type_category", "type_urgent"):
            if len(getattr(s, name)) != n:
                raise InstanceError(f"scheduling.{name}: length does not match types")


def load_instance(path: str | Path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: not valid JSON ({exc})") from None
    return Instance.from_dict(doc)


def save_instance(inst: Instance, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(inst.to_dict(), fh)
        fh.write("\n")
