"""Online admission policies: LS, MLS, RLS and the GRD, RSRV, PD baselines.

A :class:`Policy` holds everything derived once from ``(instance, routing)``
and is shared read-only across replicates.  Each replicate owns a
:class:`PolicyState`.  For every arrival the simulator calls
``policy.decide(state, i, draw)``, which returns a resource index or -1, and
then ``policy.commit(state, i, j)`` on acceptance.  ``draw`` is a uniform
number from the policy's own random stream, used for random routing.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .constants import mls_ratios, solve_rls_constants
from .instance import Instance
from .lp import FractionalRouting

__all__ = [
    "POLICY_NAMES",
    "TypeClassification",
    "classify_types",
    "PolicyState",
    "Policy",
    "LSPolicy",
    "MLSPolicy",
    "RLSPolicy",
    "GRDPolicy",
    "RSRVPolicy",
    "PDPolicy",
    "make_policy",
    "mls_max_d",
    "rls_resource_bounds",
]

POLICY_NAMES = ("ls", "mls", "rls", "grd", "rsrv", "pd")

CAP_TOL = 1e-9

_rls_default = None


def _default_rls_constants() -> tuple[float, float]:
    global _rls_default
    if _rls_default is None:
        k = solve_rls_constants(1e-10)
        _rls_default = (k.r_star, k.z_star)
    return _rls_default


@dataclass(frozen=True, eq=False)
class TypeClassification:
    """Per-resource split of feasible types and the LP loads of each class.

    Boolean masks have shape (n, m); load vectors have length m.  ``M`` and
    ``T`` are only populated for the RLS variant (otherwise ``M`` is empty and
    ``T`` equals ``S``).
    """

    variant: str
    feasible: np.ndarray
    L: np.ndarray
    S: np.ndarray
    M: np.ndarray
    T: np.ndarray
    U: np.ndarray
    UL: np.ndarray
    US: np.ndarray
    UM: np.ndarray
    UT: np.ndarray
    muL: np.ndarray
    muM: np.ndarray
    d: int | None = None
    z_star: float | None = None


def mls_max_d(instance: Instance) -> int:
    """Largest d with u_ij <= c_j / d on every feasible pair (0 if there is none)."""
    u = instance.utilization
    feas = u > 0
    if not feas.any():
        return 0
    ratio = np.broadcast_to(instance.capacity, u.shape)[feas] / u[feas]
    return int(math.floor(float(ratio.min()) * (1 + 1e-12)))


def classify_types(
    instance: Instance,
    routing: FractionalRouting,
    variant: str = "ls",
    d: int | None = None,
    z_star: float | None = None,
) -> TypeClassification:
    """Split the feasible types of every resource into L/S (and M/T for RLS).

    LS and RLS put a type in L_j when u_ij > c_j/2; MLS(d) moves the threshold
    to c_j/(d+1).  RLS further puts a small type in M_j when u_ij >= z* c_j.
    """
    if routing is None:
        raise ValueError("classification needs an LP routing")
    u = instance.utilization
    c = instance.capacity
    x = routing.x
    if x.shape != u.shape:
        raise ValueError(f"routing shape {x.shape} does not match instance {u.shape}")
    variant = variant.lower()
    feasible = u > 0
    if variant == "mls":
        if d is None or int(d) != d or d < 2:
            raise ValueError(f"MLS needs an integer d >= 2, got {d}")
        d = int(d)
        if (u * d > c * (1 + 1e-12)).any():
            i, j = np.argwhere(u * d > c * (1 + 1e-12))[0]
            raise ValueError(f"MLS(d={d}) needs u <= c/d; u[{i}][{j}]={u[i, j]} exceeds {c[j] / d}")
        L = feasible & (u > c / (d + 1))
    elif variant in ("ls", "rls"):
        L = feasible & (u > c / 2)
    else:
        raise ValueError(f"unknown classification variant {variant!r}")
    S = feasible & ~L
    if variant == "rls":
        if z_star is None:
            z_star = _default_rls_constants()[1]
        M = S & (u >= z_star * c)
    else:
        M = np.zeros_like(S)
    T = S & ~M
    load = x * u

    def col(mask: np.ndarray, a: np.ndarray) -> np.ndarray:
        return np.where(mask, a, 0.0).sum(axis=0)

    return TypeClassification(
        variant=variant,
        feasible=feasible,
        L=L,
        S=S,
        M=M,
        T=T,
        U=load.sum(axis=0),
        UL=col(L, load),
        US=col(S, load),
        UM=col(M, load),
        UT=col(T, load),
        muL=col(L, x),
        muM=col(M, x),
        d=d if variant == "mls" else None,
        z_star=z_star if variant == "rls" else None,
    )


@dataclass
class PolicyState:
    """Mutable per-replicate state: remaining capacities plus policy scratch."""

    remaining: np.ndarray
    dual: np.ndarray | None = None
    tranche: list | None = None
    scratch: dict = field(default_factory=dict)


class Policy:
    """Shared, read-only part of a policy; see the module docstring for the protocol."""

    name = "base"

    def __init__(self, instance: Instance, routing: FractionalRouting | None = None):
        self.instance = instance
        self.routing = routing
        self.capacity = instance.capacity
        self.u = instance.utilization
        self.u_rows = self.u.tolist()
        self.tol = CAP_TOL * self.capacity
        self.tol_list = self.tol.tolist()
        self.feasible = [self._selector(i, np.flatnonzero(row > 0)) for i, row in enumerate(self.u)]

    def _selector(self, i: int, idx: np.ndarray) -> "_Selector":
        return _Selector(idx, self.u[i, idx], self.u[i, idx] - self.tol[idx])

    def new_state(self) -> PolicyState:
        return PolicyState(remaining=self.capacity.astype(float).copy())

    def decide(self, state: PolicyState, i: int, draw: float) -> int:
        raise NotImplementedError

    def commit(self, state: PolicyState, i: int, j: int) -> None:
        rem = state.remaining
        v = rem[j] - self.u_rows[i][j]
        rem[j] = v if v > 0.0 else 0.0

    def _fits(self, state: PolicyState, i: int, j: int) -> bool:
        return state.remaining[j] >= self.u_rows[i][j] - self.tol_list[j]


class _Selector:
    """A fixed set of resources for one type, with its sizes and fit thresholds.

    ``sel`` is a slice when the set is contiguous, so vector scans read views.
    """

    __slots__ = ("idx", "ids", "sel", "ui", "need", "need_list")

    def __init__(self, idx: np.ndarray, ui: np.ndarray, need: np.ndarray):
        self.idx = idx
        self.ids = idx.tolist()
        if len(idx) and idx[-1] - idx[0] + 1 == len(idx):
            self.sel = slice(int(idx[0]), int(idx[-1]) + 1)
        else:
            self.sel = idx
        self.ui = ui
        self.need = need
        self.need_list = need.tolist()

    def __len__(self) -> int:
        return len(self.ids)


class _RoutedPolicy(Policy):
    """Random routing by x*_ij / Lambda_i followed by a per-resource admission test."""

    def __init__(self, instance: Instance, routing: FractionalRouting):
        if routing is None:
            raise ValueError(f"{self.name} needs an LP routing")
        if routing.x.shape != instance.utilization.shape:
            raise ValueError(f"routing shape {routing.x.shape} does not match instance {instance.utilization.shape}")
        super().__init__(instance, routing)
        lam = instance.Lambda
        self.route_idx: list[list[int]] = []
        self.route_cum: list[list[float]] = []
        for i in range(instance.n):
            xi = routing.x[i]
            idx = np.flatnonzero(xi > 0)
            if lam[i] <= 0 or len(idx) == 0:
                self.route_idx.append([])
                self.route_cum.append([])
                continue
            cum = np.cumsum(xi[idx] / lam[i])
            cum = np.minimum(cum, 1.0)
            self.route_idx.append(idx.tolist())
            self.route_cum.append(cum.tolist())
        self.admissible = self._admissible()
        self.admissible_rows = self.admissible.tolist()

    def _admissible(self) -> np.ndarray:
        raise NotImplementedError

    def route(self, i: int, draw: float) -> int:
        """Resource picked by random routing, or -1 for the residual mass."""
        cum = self.route_cum[i]
        k = bisect_right(cum, draw)
        return self.route_idx[i][k] if k < len(cum) else -1

    def decide(self, state: PolicyState, i: int, draw: float) -> int:
        j = self.route(i, draw)
        if j < 0:
            return -1
        if self.admissible_rows[i][j] and self._fits(state, i, j):
            return j
        return -1


class LSPolicy(_RoutedPolicy):
    """Reserve each resource for its large types if U^L >= U^S, else for its small types."""

    name = "ls"

    def __init__(self, instance: Instance, routing: FractionalRouting):
        self.classification = classify_types(instance, routing, "ls")
        self.reserve_large = self.classification.UL >= self.classification.US
        super().__init__(instance, routing)

    def _admissible(self) -> np.ndarray:
        k = self.classification
        return np.where(self.reserve_large, k.L, k.S)


class MLSPolicy(_RoutedPolicy):
    """LS with the L/S split at c/(d+1) and a three-way reservation choice per resource."""

    name = "mls"

    def __init__(self, instance: Instance, routing: FractionalRouting, d: int | None = None):
        if d is None:
            d = mls_max_d(instance)
        self.d = int(d)
        k = classify_types(instance, routing, "mls", d=self.d)
        self.classification = k
        c = instance.capacity
        choice = []
        self.ratios = np.zeros((instance.m, 3))
        for j in range(instance.m):
            Uj = min(k.U[j], c[j])
            rL, rS, rA = mls_ratios(self.d, min(k.UL[j], Uj), min(k.US[j], Uj - min(k.UL[j], Uj)), Uj, c[j])
            self.ratios[j] = (rL, rS, rA)
            if rL >= rS and rL >= rA:
                choice.append("L")
            elif rS >= rL and rS >= rA:
                choice.append("S")
            else:
                choice.append("ALL")
        self.choice = tuple(choice)
        super().__init__(instance, routing)

    def _admissible(self) -> np.ndarray:
        k = self.classification
        sel = np.array(self.choice)
        return np.where(sel == "L", k.L, np.where(sel == "S", k.S, k.feasible))


class RLSPolicy(_RoutedPolicy):
    """Routed admission with type-A/B resources plus a resource-sharing fallback.

    On a type-A resource every feasible type is admissible; on a type-B
    resource only M_j and L_j are.  A routed customer rejected at its resource
    is offered to the admissible resource with the largest remaining capacity
    (lowest index on ties).  Customers falling in the residual routing mass are
    rejected outright.
    """

    name = "rls"

    def __init__(
        self,
        instance: Instance,
        routing: FractionalRouting,
        r_star: float | None = None,
        z_star: float | None = None,
    ):
        dr, dz = _default_rls_constants()
        self.r_star = dr if r_star is None else float(r_star)
        self.z_star = dz if z_star is None else float(z_star)
        k = classify_types(instance, routing, "rls", z_star=self.z_star)
        self.classification = k
        self.type_a = rls_resource_types(k, instance.capacity, self.r_star, self.z_star)
        super().__init__(instance, routing)
        self.share = [self._selector(i, np.flatnonzero(row)) for i, row in enumerate(self.admissible)]

    def _admissible(self) -> np.ndarray:
        k = self.classification
        return k.feasible & (self.type_a[None, :] | k.L | k.M)

    def decide(self, state: PolicyState, i: int, draw: float) -> int:
        j = self.route(i, draw)
        if j < 0:
            return -1
        if self.admissible_rows[i][j] and self._fits(state, i, j):
            return j
        sh = self.share[i]
        if not sh.ids:
            return -1
        rem = state.remaining[sh.sel]
        ok = rem >= sh.need
        if not ok.any():
            return -1
        return sh.ids[int(np.argmax(np.where(ok, rem, -np.inf)))]


def rls_resource_types(k: TypeClassification, capacity: np.ndarray, r_star: float, z_star: float) -> np.ndarray:
    """Boolean vector, True where the resource is type A."""
    c = capacity
    a1 = 1.0 - 2.0 * r_star * k.U / c
    a2 = 1.0 - r_star * k.U / (c * (1.0 - z_star))
    if (a1 <= 0).any() or (a2 <= 0).any():
        raise ArithmeticError("type-A thresholds undefined: a logarithm argument is not positive")
    return (k.US >= -0.5 * c * np.log(a1)) | (k.UT >= -(1.0 - z_star) * c * np.log(a2))


def rls_resource_bounds(policy: RLSPolicy) -> np.ndarray:
    """Per-resource lower bound on expected allocation implied by each resource's type (A or B)."""
    k = policy.classification
    c = policy.capacity
    z = policy.z_star
    bound_a = np.maximum(
        0.5 * c * (1.0 - np.exp(-2.0 * k.US / c)),
        (1.0 - z) * c * (1.0 - np.exp(-k.UT / ((1.0 - z) * c))),
    )
    eL, eM = np.exp(-k.muL), np.exp(-k.muM)
    bound_b = np.minimum(
        z * c,
        eM * (k.UL * eL + 0.5 * c * (1.0 - eL - k.muL * eL)) + (1.0 - eM) * z * c,
    )
    return np.where(policy.type_a, bound_a, bound_b)


class GRDPolicy(Policy):
    """Earliest feasible resource with room (lowest index; sessions are indexed by day)."""

    name = "grd"

    def new_state(self) -> PolicyState:
        st = super().new_state()
        # capacities only shrink, so each type's first fitting resource only moves forward
        st.scratch["ptr"] = [0] * self.instance.n
        return st

    def decide(self, state: PolicyState, i: int, draw: float) -> int:
        f = self.feasible[i]
        ids, need, rem = f.ids, f.need_list, state.remaining
        ptr = state.scratch["ptr"]
        k = ptr[i]
        while k < len(ids) and rem[ids[k]] < need[k]:
            k += 1
        ptr[i] = k
        return ids[k] if k < len(ids) else -1


class RSRVPolicy(Policy):
    """Nested capacity reservation by category, sized from the LP loads.

    Each resource's capacity is split into one tranche per category in
    proportion to the category's LP load there.  Categories are ordered by
    priority (lower index is higher priority); a category may draw on its own
    tranche and every lower-priority one, its own first.
    """

    name = "rsrv"

    def __init__(self, instance: Instance, routing: FractionalRouting):
        if routing is None:
            raise ValueError("rsrv needs an LP routing")
        super().__init__(instance, routing)
        s = instance.scheduling
        cat = np.asarray(s.type_category if s is not None else range(instance.n), dtype=int)
        self.category = cat.tolist()
        K = int(cat.max()) + 1 if len(cat) else 1
        load = routing.x * instance.utilization
        base = np.zeros((K, instance.m))
        np.add.at(base, cat, load)
        tot = base.sum(axis=0)
        c = instance.capacity
        pos = tot > 0
        base[:, pos] *= c[pos] / tot[pos]
        base[:, ~pos] = 0.0
        base[K - 1, ~pos] = c[~pos]
        self.tranche0 = base
        self.K = K

    def new_state(self) -> PolicyState:
        st = super().new_state()
        st.tranche = self.tranche0.tolist()
        # a category's available amount on a resource only shrinks, as in GRD
        st.scratch["ptr"] = [0] * self.instance.n
        return st

    def decide(self, state: PolicyState, i: int, draw: float) -> int:
        f = self.feasible[i]
        ids, need, rem = f.ids, f.need_list, state.remaining
        rows = state.tranche[self.category[i]:]
        ptr = state.scratch["ptr"]
        k = ptr[i]
        while k < len(ids):
            j = ids[k]
            if rem[j] >= need[k] and sum(r[j] for r in rows) >= need[k]:
                break
            k += 1
        ptr[i] = k
        return ids[k] if k < len(ids) else -1

    def commit(self, state: PolicyState, i: int, j: int) -> None:
        super().commit(state, i, j)
        need = self.u_rows[i][j]
        for row in state.tranche[self.category[i]:]:
            if need <= 0:
                break
            take = min(row[j], need)
            row[j] -= take
            need -= take


class PDPolicy(Policy):
    """Budgeted-allocation primal-dual: pick argmax u_ij (1 - dual_j) when positive."""

    name = "pd"

    def __init__(self, instance: Instance, routing: FractionalRouting | None = None):
        super().__init__(instance, routing)
        u = self.u
        feas = u > 0
        ratio = (u / self.capacity)[feas]
        r_max = float(ratio.max()) if ratio.size else 1.0
        self.r_max = r_max
        self.C = (1.0 + r_max) ** (1.0 / r_max)

    def new_state(self) -> PolicyState:
        st = super().new_state()
        st.dual = np.zeros(self.instance.m)
        return st

    def decide(self, state: PolicyState, i: int, draw: float) -> int:
        f = self.feasible[i]
        if not f.ids:
            return -1
        gain = f.ui * (1.0 - state.dual[f.sel])
        gain[state.remaining[f.sel] < f.need] = -np.inf
        k = int(np.argmax(gain))
        return f.ids[k] if gain[k] > 0 else -1

    def commit(self, state: PolicyState, i: int, j: int) -> None:
        super().commit(state, i, j)
        f = self.u_rows[i][j] / self.capacity[j]
        state.dual[j] = state.dual[j] * (1.0 + f) + f / (self.C - 1.0)


_CLASSES = {
    "ls": LSPolicy,
    "mls": MLSPolicy,
    "rls": RLSPolicy,
    "grd": GRDPolicy,
    "rsrv": RSRVPolicy,
    "pd": PDPolicy,
}


def make_policy(name: str, instance: Instance, routing: FractionalRouting | None = None, **params) -> Policy:
    """Build a policy by name: ls | mls | rls | grd | rsrv | pd.

    ``mls`` accepts ``d`` (default: the largest d the instance allows); ``rls``
    accepts ``r_star`` and ``z_star`` overrides.
    """
    key = str(name).lower()
    if key not in _CLASSES:
        raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
    return _CLASSES[key](instance, routing, **params)
