"""Independent reference computations used only by the tests."""
from __future__ import annotations

import itertools
import math

import numpy as np


def lp_by_vertex_enumeration(c, A, b, fixed_zero=None):
    """max c@x s.t. A@x <= b, x >= 0 by enumerating every basic solution.

    Each vertex makes ``nv`` of the constraints tight; try every such choice,
    keep the feasible solutions and return the best objective.
    """
    c = np.asarray(c, float)
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    nv = len(c)
    G = np.vstack([A, -np.eye(nv)])
    h = np.concatenate([b, np.zeros(nv)])
    if fixed_zero is not None:
        # equality x_k = 0 as a pair of inequalities
        for k in np.flatnonzero(fixed_zero):
            row = np.zeros(nv)
            row[k] = 1.0
            G = np.vstack([G, row])
            h = np.append(h, 0.0)
    best = -math.inf
    for rows in itertools.combinations(range(len(G)), nv):
        M = G[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, h[list(rows)])
        if (G @ x <= h + 1e-9).all():
            best = max(best, float(c @ x))
    return best


def routing_lp_by_vertex_enumeration(capacity, u, Lam):
    """The routing LP written out densely and solved by vertex enumeration."""
    u = np.asarray(u, float)
    n, m = u.shape
    A = np.zeros((m + n, n * m))
    for i in range(n):
        for j in range(m):
            A[j, i * m + j] = u[i, j]
            A[m + i, i * m + j] = 1.0
    b = np.concatenate([capacity, Lam])
    return lp_by_vertex_enumeration(u.ravel(), A, b, fixed_zero=(u.ravel() == 0))


def ratio_all_closed_form(d: int) -> float:
    """1 - (1/d) E[(N - d + 1)^+] for N ~ Poisson(d), via E[(N-k)^+] = E[N-k] + E[(k-N)^+]."""
    k = d - 1
    pmf = [math.exp(-d) * d**i / math.factorial(i) for i in range(k)]
    below = sum((k - i) * p for i, p in enumerate(pmf))
    return 1.0 - (d - k + below) / d


def poisson_survival(k: int, mu: float) -> float:
    """P(N >= k) by direct summation of the pmf below k."""
    return 1.0 - sum(math.exp(-mu) * mu**i / math.factorial(i) for i in range(k))
