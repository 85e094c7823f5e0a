"""Sample paths of the arrival processes and single-replicate policy runs."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np

from .instance import Instance
from .lp import FractionalRouting
from .policies import Policy, make_policy

__all__ = [
    "ArrivalEvent",
    "ArrivalStream",
    "ReplicateResult",
    "SeedLike",
    "as_generator",
    "replicate_seeds",
    "sample_path",
    "sample_counts",
    "run_policy",
    "estimate_offline",
    "prop1_offline",
    "prop1_strategy_values",
    "tightness_offline",
    "OFFLINE_ORACLES",
]

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]

OFFLINE_ORACLES = ("prop1_exact", "tightness_exact", "lp_bound")

PATH_STREAM = 0
POLICY_STREAM = 1


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def replicate_seeds(master_seed: int, replicate: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Independent (path, policy) seed sequences for one replicate.

    Every policy run on the same replicate gets the same path stream, which
    gives common random numbers across policies.
    """
    path = np.random.SeedSequence([int(master_seed), int(replicate), PATH_STREAM])
    policy = np.random.SeedSequence([int(master_seed), int(replicate), POLICY_STREAM])
    return path, policy


@dataclass(frozen=True)
class ArrivalEvent:
    time: float
    type_id: int


class ArrivalStream:
    """Time-sorted arrivals stored as parallel ``times`` / ``types`` arrays."""

    __slots__ = ("times", "types")

    def __init__(self, times: np.ndarray, types: np.ndarray):
        self.times = np.asarray(times, dtype=float)
        self.types = np.asarray(types, dtype=np.int64)
        if self.times.shape != self.types.shape:
            raise ValueError("times and types must have the same length")

    @classmethod
    def from_events(cls, events) -> "ArrivalStream":
        events = sorted(events, key=lambda e: e.time)
        return cls([e.time for e in events], [e.type_id for e in events])

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[ArrivalEvent]:
        for t, i in zip(self.times.tolist(), self.types.tolist()):
            yield ArrivalEvent(t, i)

    def __getitem__(self, k: int) -> ArrivalEvent:
        return ArrivalEvent(float(self.times[k]), int(self.types[k]))

    def counts(self, n: int) -> np.ndarray:
        return np.bincount(self.types, minlength=n)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.times.tobytes())
        h.update(self.types.tobytes())
        return h.hexdigest()


def _segments(instance: Instance) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    # flattened (type, t0, length, mean count) over all positive-rate segments
    cached = instance.__dict__.get("_seg_cache")
    if cached is not None:
        return cached
    ty, t0, ln, mean = [], [], [], []
    for i, tp in enumerate(instance.types):
        for a, b, r in tp.rate.segments:
            if r > 0:
                ty.append(i)
                t0.append(a)
                ln.append(b - a)
                mean.append(r * (b - a))
    out = (np.array(ty, dtype=np.int64), np.array(t0, float), np.array(ln, float), np.array(mean, float))
    object.__setattr__(instance, "_seg_cache", out)
    return out


def sample_path(instance: Instance, rng_seed: SeedLike) -> ArrivalStream:
    """One sample path of all arrival processes, merged and sorted by time.

    Each positive-rate segment gets a Poisson(rate x length) count with times
    uniform inside the segment.
    """
    rng = as_generator(rng_seed)
    ty, t0, ln, mean = _segments(instance)
    if len(ty) == 0:
        return ArrivalStream(np.zeros(0), np.zeros(0, dtype=np.int64))
    cnt = rng.poisson(mean)
    total = int(cnt.sum())
    seg = np.repeat(np.arange(len(ty)), cnt)
    times = t0[seg] + rng.random(total) * ln[seg]
    order = np.argsort(times, kind="stable")
    return ArrivalStream(times[order], ty[seg][order])


def sample_counts(instance: Instance, rng_seed: SeedLike, size: int) -> np.ndarray:
    """Per-type arrival counts for ``size`` independent paths, shape (size, n)."""
    rng = as_generator(rng_seed)
    return rng.poisson(instance.Lambda, size=(int(size), instance.n))


@dataclass(frozen=True, eq=False)
class ReplicateResult:
    total_reward: float
    per_resource_used: np.ndarray
    accepted: int
    rejected: int
    regular_wait_days: tuple | None = None
    path_digest: str = ""

    @property
    def mean_regular_wait(self) -> float | None:
        if self.regular_wait_days is None or len(self.regular_wait_days) == 0:
            return None
        return float(np.mean(self.regular_wait_days))


def run_policy(
    instance: Instance,
    routing: FractionalRouting | None,
    policy: str | Policy,
    path: ArrivalStream,
    rng_seed: SeedLike = 0,
    **policy_params,
) -> ReplicateResult:
    """Feed ``path`` to ``policy`` one arrival at a time; decisions are irrevocable.

    ``policy`` is a name (built here from ``routing``) or a prebuilt
    :class:`Policy`, which is cheaper when running many replicates.
    """
    if routing is not None and routing.x.shape != instance.utilization.shape:
        raise ValueError(f"routing shape {routing.x.shape} does not match instance {instance.utilization.shape}")
    if isinstance(policy, str):
        policy = make_policy(policy, instance, routing, **policy_params)
    elif policy.instance is not instance:
        raise ValueError("policy was built for a different instance")
    if not isinstance(path, ArrivalStream):
        path = ArrivalStream.from_events(path)
    rng = as_generator(rng_seed)
    draws = rng.random(len(path)).tolist()
    state = policy.new_state()
    u_rows = policy.u_rows
    tol = policy.tol_list
    rem = state.remaining
    decide, commit = policy.decide, policy.commit
    s = instance.scheduling
    waits = [] if s is not None else None
    accepted = 0
    for k, i in enumerate(path.types.tolist()):
        j = decide(state, i, draws[k])
        if j < 0:
            continue
        uij = u_rows[i][j]
        if not (uij > 0.0 and rem[j] >= uij - tol[j]):
            raise AssertionError(f"{policy.name} assigned type {i} to resource {j} without room")
        commit(state, i, j)
        accepted += 1
        if waits is not None and not s.type_urgent[i]:
            waits.append(s.resource_day[j] - s.type_day[i])
    used = instance.capacity - rem
    used = np.maximum(used, 0.0)
    return ReplicateResult(
        total_reward=float(used.sum()),
        per_resource_used=used,
        accepted=accepted,
        rejected=len(path) - accepted,
        regular_wait_days=tuple(waits) if waits is not None else None,
        path_digest=path.digest(),
    )


def prop1_offline(counts: np.ndarray, instance: Instance) -> np.ndarray:
    """Offline optimum per path on the two-type construction: 1 if any large arrival, else all small ones."""
    u1 = instance.utilization[0, 0]
    n1, n2 = counts[:, 0], counts[:, 1]
    return np.where(n2 >= 1, 1.0, np.minimum(u1 * n1, 1.0))


def prop1_strategy_values(counts: np.ndarray, instance: Instance) -> dict[str, np.ndarray]:
    """Per-path reward of the two online strategies on the two-type construction.

    ``accept_type1`` takes every small arrival (then a large one only if no
    small arrived); ``wait_type2`` rejects small arrivals and keeps the
    resource for a large one.
    """
    u1 = instance.utilization[0, 0]
    n1, n2 = counts[:, 0], counts[:, 1]
    accept = np.minimum(u1 * n1, 1.0) + ((n1 == 0) & (n2 >= 1))
    wait = (n2 >= 1).astype(float)
    return {"accept_type1": accept, "wait_type2": wait}


def tightness_offline(counts: np.ndarray, instance: Instance) -> np.ndarray:
    """Offline optimum per path on the LS tightness construction.

    Every customer gets a resource of its own at the discounted size; moving
    customers onto the first resource recovers the discount on them, so the
    best packing of that resource is added on top.
    """
    m = instance.m
    eps = instance.params.get("epsilon")
    if eps is None:
        raise ValueError("tightness_offline needs the epsilon parameter")
    a1, a2 = instance.utilization[0, 0], instance.utilization[1, 0]
    n1, n2 = counts[:, 0], counts[:, 1]
    if ((n1 + n2) > m).any():
        raise ValueError("path has more customers than resources; the offline rule does not apply")
    base = (1.0 - eps) * (a1 * n1 + a2 * n2)
    best = np.zeros(len(n1))
    for a in (0, 1):
        room = 1.0 - a * a2
        b = np.minimum(n1, np.floor((room + 1e-12) / a1))
        val = a * a2 + a1 * b
        best = np.where(n2 >= a, np.maximum(best, val), best)
    return base + eps * best


def estimate_offline(
    instance: Instance,
    oracle: str,
    n_paths: int = 10_000,
    rng_seed: SeedLike = 0,
    routing: FractionalRouting | None = None,
) -> tuple[float, float]:
    """Monte Carlo ``(mean, stderr)`` of the offline optimum, or ``(V^LP, 0)`` for ``lp_bound``."""
    if oracle == "lp_bound":
        if routing is None:
            from .lp import solve_for

            routing = solve_for(instance)
        return float(routing.objective), 0.0
    families = {"prop1_exact": ("prop1", prop1_offline), "tightness_exact": ("ls_tight", tightness_offline)}
    if oracle not in families:
        raise ValueError(f"unknown offline oracle {oracle!r}; choose from {', '.join(OFFLINE_ORACLES)}")
    family, fn = families[oracle]
    if instance.family != family:
        raise ValueError(f"oracle {oracle} applies to the {family!r} family, not {instance.family!r}")
    vals = fn(sample_counts(instance, rng_seed, n_paths), instance)
    return mean_stderr(vals)


def mean_stderr(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))
