"""Two-zone, two-user handover example.

Both users sit on AP 0 and walk away from it, user 0 towards AP 1 and user 1
towards AP 2. During the first service time each user is in the outer zone
(rate R/2) of AP 0 and of its destination AP; during the second it is in the
inner zone (rate R) of its destination AP only. Each user must hand over at
the first or the second service time, which leaves three strategies.
"""

from __future__ import annotations

import numpy as np

from .oracle import effective_rates
from .solver.mvr import ProblemInstance

DEFAULT_RATE = 400e6

# Horizon assignments (service time, user) -> AP, keyed by the number of
# handovers made at the first service time.
STRATEGIES = {
    0: np.array([[0, 0], [1, 2]]),
    1: np.array([[1, 0], [1, 2]]),
    2: np.array([[1, 2], [1, 2]]),
}


def two_zone_instance(rate: float = DEFAULT_RATE, eta0: float = 0.75, beta: float = 2.0) -> ProblemInstance:
    half = rate / 2
    R = np.zeros((2, 2, 3))
    R[0, 0] = [half, half, 0.0]
    R[0, 1] = [half, 0.0, half]
    R[1, 0, 1] = rate
    R[1, 1, 2] = rate
    prev = np.array([[1, 0, 0], [1, 0, 0]])
    return ProblemInstance(R, prev, eta0=eta0, beta=beta, rate_unit=rate)


def equal_share_rates(horizon: np.ndarray, inst: ProblemInstance) -> np.ndarray:
    """Per-user rates (T, users) when every AP splits its time equally among its users."""
    horizon = np.asarray(horizon)
    r_hat = effective_rates(horizon, inst)
    out = np.empty_like(r_hat)
    for t in range(horizon.shape[0]):
        load = np.bincount(horizon[t], minlength=inst.n_aps)
        out[t] = r_hat[t] / load[horizon[t]]
    return out


def strategy_average_rate(horizon: np.ndarray, inst: ProblemInstance) -> float:
    """Aggregate rate averaged over the service times of the horizon."""
    return float(equal_share_rates(horizon, inst).sum(axis=1).mean())


def strategy_table(inst: ProblemInstance | None = None) -> list[dict]:
    """One row per strategy: first/second service-time aggregate rate and their average."""
    inst = inst or two_zone_instance()
    rows = []
    for n, horizon in STRATEGIES.items():
        rates = equal_share_rates(horizon, inst).sum(axis=1)
        rows.append({
            "first_handovers": n,
            "first_rate": float(rates[0]),
            "second_rate": float(rates[1]),
            "average": float(rates.mean()),
        })
    return rows


def best_strategy(inst: ProblemInstance | None = None) -> int:
    rows = strategy_table(inst)
    return max(rows, key=lambda r: r["average"])["first_handovers"]


def myopic_strategy(inst: ProblemInstance | None = None) -> int:
    """Strategy a mobility-unaware scheme picks: best first-service-time rate."""
    rows = strategy_table(inst)
    return max(rows, key=lambda r: r["first_rate"])["first_handovers"]
