"""Exact exhaustive search over feasible user-to-AP assignments.

A feasible assignment maps every user to exactly one AP at every service
time of the horizon. For a fixed assignment the optimal shares have a closed
form, so the search only enumerates the discrete part.
"""

from __future__ import annotations

import itertools
import time
from typing import Iterator

import numpy as np

from .solver.mvr import AllocationSolution, ProblemInstance
from .utility import psi

DEFAULT_CAP = 10_000_000


class InstanceTooLargeError(ValueError):
    pass


def assignment_count(n_users: int, n_aps: int, T: int) -> int:
    return n_aps ** (n_users * T)


def enumerate_feasible(n_users: int, n_aps: int, T: int, cap: int = DEFAULT_CAP) -> Iterator[np.ndarray]:
    """Yield every feasible assignment once, lexicographically.

    Each item is an int array of shape (T, n_users) holding AP indices.
    """
    count = assignment_count(n_users, n_aps, T)
    if count > cap:
        raise InstanceTooLargeError(
            f"{n_aps}^({n_users}*{T}) = {count} assignments exceeds the enumeration cap {cap}"
        )
    for combo in itertools.product(range(n_aps), repeat=n_users * T):
        yield np.array(combo, dtype=int).reshape(T, n_users)


def effective_rates(assign: np.ndarray, inst: ProblemInstance) -> np.ndarray:
    """Rates of each user at its assigned AP, shape (T, users), with handover efficiency applied."""
    T, U = assign.shape
    users = np.arange(U)
    prev = np.argmax(inst.prev_assignment, axis=1)
    out = np.empty((T, U))
    for t in range(T):
        kept = assign[t] == prev
        eta = np.where(kept, 1.0, inst.eta0)
        out[t] = eta * inst.rates[t, users, assign[t]]
        prev = assign[t]
    return out


def per_assignment_allocation(assign: np.ndarray, inst: ProblemInstance) -> np.ndarray:
    """Optimal shares for a fixed assignment, shape (T, users).

    Each AP splits its resource in proportion to r^(1/beta - 1) over its users.
    Users with a zero effective rate get share 0 (their utility is -inf anyway).
    """
    r_hat = effective_rates(assign, inst)
    expo = 1.0 / inst.beta - 1.0
    with np.errstate(divide="ignore"):
        weight = np.where(r_hat > 0, np.where(r_hat > 0, r_hat, 1.0) ** expo, 0.0)
    shares = np.zeros_like(r_hat)
    for t in range(assign.shape[0]):
        totals = np.bincount(assign[t], weights=weight[t], minlength=inst.n_aps)
        denom = totals[assign[t]]
        shares[t] = np.where(denom > 0, weight[t] / np.where(denom > 0, denom, 1.0), 0.0)
    return shares


def assignment_utility(assign: np.ndarray, shares: np.ndarray, inst: ProblemInstance) -> float:
    """Total fairness utility of an assignment with the given shares."""
    r_hat = effective_rates(assign, inst)
    return float(np.sum(psi(shares * r_hat, inst.beta)))


def exhaustive_solve(inst: ProblemInstance, cap: int = DEFAULT_CAP) -> AllocationSolution:
    """Globally optimal assignment and shares; the lexicographically first optimum wins ties."""
    start = time.perf_counter()
    best_u = -np.inf
    best = None
    best_p = None
    count = 0
    for assign in enumerate_feasible(inst.n_users, inst.n_aps, inst.T, cap):
        count += 1
        p = per_assignment_allocation(assign, inst)
        u = assignment_utility(assign, p, inst)
        if best is None or u > best_u:
            best_u, best, best_p = u, assign, p
    U, A = inst.n_users, inst.n_aps
    x1 = np.zeros((U, A), dtype=int)
    x1[np.arange(U), best[0]] = 1
    p1 = np.zeros((U, A))
    p1[np.arange(U), best[0]] = best_p[0]
    sol = AllocationSolution(
        assignment=x1,
        shares=p1,
        effective_rates=inst.first_rates,
        horizon_assignment=best,
        iterations=count,
        wall_time=time.perf_counter() - start,
        utility=best_u,
    )
    return sol


def horizon_utility(horizon: np.ndarray, inst: ProblemInstance, first_shares=None) -> float:
    """Utility of a horizon assignment (T, users) with optimal shares.

    ``first_shares`` (users, aps) replaces the first-slot shares, e.g. with
    the normalised shares an approximate solver committed.
    """
    p = per_assignment_allocation(horizon, inst)
    if first_shares is not None:
        p[0] = np.asarray(first_shares)[np.arange(inst.n_users), horizon[0]]
    return assignment_utility(horizon, p, inst)
