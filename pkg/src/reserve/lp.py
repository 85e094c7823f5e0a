"""Static routing LP: max sum x_ij u_ij  s.t. resource capacities and expected demands.

Two solvers are provided.  :func:`solve_routing_lp` is a revised simplex that
works on any instance; :func:`solve_layered_greedy` exploits the calendar
structure of scheduling instances and is used as a fast path there.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .instance import Instance

__all__ = [
    "LPError",
    "FractionalRouting",
    "simplex_max",
    "solve_routing_lp",
    "solve_layered_greedy",
    "solve_for",
    "upper_bound_check",
    "dump_routing",
]

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9


class LPError(RuntimeError):
    """Numerical failure of the LP solver (stall, singular basis, unboundedness)."""


@dataclass(frozen=True, eq=False)
class FractionalRouting:
    """Optimal fractional assignment ``x`` (expected customers of type i sent to j)."""

    x: np.ndarray
    objective: float
    method: str = "simplex"
    iterations: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape

    def loads(self, instance: Instance) -> np.ndarray:
        """Per-resource LP load U_j = sum_i x_ij u_ij."""
        return (self.x * instance.utilization).sum(axis=0)

    def check(self, instance: Instance, tol: float = FEAS_TOL) -> None:
        """Raise AssertionError if any routing invariant fails."""
        u = instance.utilization
        if self.x.shape != u.shape:
            raise AssertionError(f"routing shape {self.x.shape} != instance shape {u.shape}")
        if (self.x < 0).any():
            raise AssertionError("negative routing entry")
        if (self.x[u == 0] != 0).any():
            raise AssertionError("routing uses a zero-utilization pair")
        load = (self.x * u).sum(axis=0)
        cap = instance.capacity
        if (load > cap * (1 + tol) + tol).any():
            j = int(np.argmax(load - cap))
            raise AssertionError(f"resource {j} overloaded: {load[j]} > {cap[j]}")
        routed = self.x.sum(axis=1)
        lam = instance.Lambda
        if (routed > lam * (1 + tol) + tol).any():
            i = int(np.argmax(routed - lam))
            raise AssertionError(f"type {i} over-routed: {routed[i]} > {lam[i]}")
        total = float((self.x * u).sum())
        if abs(total - self.objective) > tol * max(1.0, abs(total)):
            raise AssertionError(f"objective {self.objective} != sum x*u = {total}")

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "method": self.method,
            "n": int(self.x.shape[0]),
            "m": int(self.x.shape[1]),
            "x": self.x.tolist(),
        }


def dump_routing(routing: FractionalRouting, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(routing.to_dict(), fh)
        fh.write("\n")


def simplex_max(
    c: np.ndarray,
    A,
    b: np.ndarray,
    *,
    tol: float = 1e-9,
    max_iter: int | None = None,
    refactor_every: int = 64,
    degenerate_limit: int = 40,
) -> tuple[np.ndarray, float, int]:
    """Maximize ``c @ x`` subject to ``A @ x <= b``, ``x >= 0`` with ``b >= 0``.

    Revised simplex over an explicit basis inverse, starting from the slack
    basis.  Pricing is Dantzig's largest reduced cost; after
    ``degenerate_limit`` consecutive degenerate pivots it switches to Bland's
    rule (lowest index enters, lowest basic index leaves) until the objective
    moves again, which rules out cycling.  Remaining ties go to the lowest index.

    Returns ``(x, objective, iterations)``.
    """
    A = sparse.csc_matrix(A, dtype=float)
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    rows, ns = A.shape
    if (b < 0).any():
        raise ValueError("simplex_max needs b >= 0 so the slack basis is feasible")
    if max_iter is None:
        max_iter = 50 * (rows + ns) + 1000
    if ns == 0 or rows == 0:
        return np.zeros(ns), 0.0, 0

    indptr, indices, data = A.indptr, A.indices, A.data
    AT = A.T.tocsr()
    scale_c = max(1.0, float(np.abs(c).max()))
    opt_tol = tol * scale_c

    basis = np.arange(ns, ns + rows)
    is_basic = np.zeros(ns + rows, dtype=bool)
    is_basic[ns:] = True
    cost = np.concatenate([c, np.zeros(rows)])
    Binv = np.eye(rows)
    xB = b.copy()
    bland = False
    degenerate_run = 0

    def column(q: int) -> tuple[np.ndarray, np.ndarray]:
        if q < ns:
            lo, hi = indptr[q], indptr[q + 1]
            return indices[lo:hi], data[lo:hi]
        return np.array([q - ns]), np.array([1.0])

    it = 0
    while True:
        if it >= max_iter:
            raise LPError(f"simplex stalled after {it} iterations")
        if it and it % refactor_every == 0:
            B = np.zeros((rows, rows))
            for k, q in enumerate(basis):
                idx, val = column(q)
                B[idx, k] = val
            try:
                Binv = np.linalg.inv(B)
            except np.linalg.LinAlgError:
                raise LPError("singular basis during refactorization") from None
            xB = Binv @ b
            if (xB < -1e-7 * max(1.0, float(b.max()))).any():
                raise LPError("basis lost primal feasibility")
            np.maximum(xB, 0.0, out=xB)

        y = cost[basis] @ Binv
        d = np.empty(ns + rows)
        d[:ns] = c - AT @ y
        d[ns:] = -y
        d[is_basic] = 0.0
        cand = d > opt_tol
        if not cand.any():
            break
        if bland:
            q = int(np.flatnonzero(cand)[0])
        else:
            q = int(np.argmax(d))

        idx, val = column(q)
        w = Binv[:, idx] @ val
        pos = w > 1e-11
        if not pos.any():
            raise LPError("LP is unbounded")
        ratios = np.full(rows, np.inf)
        ratios[pos] = xB[pos] / w[pos]
        theta = ratios.min()
        ties = np.flatnonzero(ratios <= theta + 1e-12 * (1.0 + theta))
        if bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            r = int(ties[np.argmax(w[ties])])
        theta = max(theta, 0.0)

        xB -= theta * w
        xB[r] = theta
        np.maximum(xB, 0.0, out=xB)
        piv = w[r]
        prow = Binv[r] / piv
        Binv -= np.outer(w, prow)
        Binv[r] = prow

        is_basic[basis[r]] = False
        is_basic[q] = True
        basis[r] = q

        if theta <= 1e-12:
            degenerate_run += 1
            if degenerate_run >= degenerate_limit:
                bland = True
        else:
            degenerate_run = 0
            bland = False
        it += 1

    x = np.zeros(ns + rows)
    x[basis] = xB
    x = x[:ns]
    return x, float(c @ x), it


def solve_routing_lp(instance: Instance) -> FractionalRouting:
    """Solve the routing LP with the revised simplex.

    Pairs with ``u_ij == 0`` and types with no expected demand are dropped
    before solving, so the returned ``x`` is zero on them by construction.
    """
    u = instance.utilization
    lam = instance.Lambda
    n, m = u.shape
    ii, jj = np.nonzero((u > 0) & (lam[:, None] > 0))
    nv = len(ii)
    x = np.zeros((n, m))
    if nv == 0:
        return FractionalRouting(x, 0.0, "simplex", 0)
    active_types, type_row = np.unique(ii, return_inverse=True)
    rows = m + len(active_types)
    vals = u[ii, jj]
    A = sparse.csc_matrix(
        (
            np.concatenate([vals, np.ones(nv)]),
            (np.concatenate([jj, m + type_row]), np.concatenate([np.arange(nv), np.arange(nv)])),
        ),
        shape=(rows, nv),
    )
    b = np.concatenate([instance.capacity, lam[active_types]])
    sol, _, iters = simplex_max(vals, A, b)
    x[ii, jj] = np.maximum(sol, 0.0)
    x = _trim(x, instance)
    obj = float((x * u).sum())
    routing = FractionalRouting(x, obj, "simplex", iters)
    routing.check(instance)
    log.debug("simplex: %d vars, %d rows, %d iterations, V=%g", nv, rows, iters, obj)
    return routing


def _trim(x: np.ndarray, instance: Instance) -> np.ndarray:
    """Scale away round-off so every constraint holds to FEAS_TOL."""
    u = instance.utilization
    load = (x * u).sum(axis=0)
    over = load > instance.capacity
    if over.any():
        x[:, over] *= instance.capacity[over] / load[over]
    routed = x.sum(axis=1)
    lam = instance.Lambda
    over = routed > lam
    if over.any():
        x[over] *= (lam[over] / routed[over])[:, None]
    return x


def is_layered(instance: Instance) -> bool:
    """True if the instance has the calendar structure the greedy solver relies on."""
    s = instance.scheduling
    if s is None or not s.layered:
        return False
    u = instance.utilization
    rday = np.asarray(s.resource_day)
    if np.any(np.diff(rday) < 0):
        return False
    for i in range(instance.n):
        feas = np.flatnonzero(u[i] > 0)
        if len(feas) == 0:
            continue
        if np.ptp(u[i, feas]) > 0:
            return False
        days = rday[feas]
        if days[0] != s.type_day[i]:
            return False
        if s.type_urgent[i] and days[-1] != s.type_day[i]:
            return False
        if feas[-1] - feas[0] + 1 != len(feas):
            return False
    return True


def solve_layered_greedy(instance: Instance) -> FractionalRouting:
    """Greedy optimum for scheduling instances.

    Urgent demand is packed into same-day sessions first.  Regular demand is
    then packed day by day, in arrival order, into the earliest sessions with
    room inside each type's window.
    """
    if not is_layered(instance):
        raise ValueError("solve_layered_greedy needs a layered scheduling instance")
    s = instance.scheduling
    u = instance.utilization
    lam = instance.Lambda
    n, m = u.shape
    room = instance.capacity.astype(float).copy()
    x = np.zeros((n, m))
    urgent = np.asarray(s.type_urgent)
    order = sorted(range(n), key=lambda i: (not urgent[i], s.type_day[i], s.type_category[i]))
    for i in order:
        if lam[i] <= 0:
            continue
        feas = np.flatnonzero(u[i] > 0)
        if len(feas) == 0:
            continue
        size = u[i, feas[0]]
        need = lam[i] * size
        for j in feas:
            if need <= 0:
                break
            take = min(room[j], need)
            if take > 0:
                x[i, j] += take / size
                room[j] -= take
                need -= take
    obj = float((x * u).sum())
    routing = FractionalRouting(x, obj, "greedy", 0)
    routing.check(instance)
    return routing


def solve_for(instance: Instance) -> FractionalRouting:
    """Greedy solve for layered scheduling instances, simplex otherwise."""
    if is_layered(instance):
        return solve_layered_greedy(instance)
    return solve_routing_lp(instance)


def upper_bound_check(
    instance: Instance,
    routing: FractionalRouting,
    offline_estimate: float | tuple[float, float],
    stderr: float = 0.0,
) -> bool:
    """True iff a Monte Carlo offline estimate stays below V^LP + 3 standard errors.

    ``offline_estimate`` may be a bare mean (with ``stderr`` given separately)
    or a ``(mean, stderr)`` pair as returned by ``estimate_offline``.
    """
    if routing.x.shape != instance.utilization.shape:
        raise ValueError("routing was not solved on this instance")
    if isinstance(offline_estimate, tuple):
        offline_estimate, stderr = offline_estimate
    return float(offline_estimate) <= routing.objective + 3.0 * float(stderr)
