"""Closed-loop comparison of the MVR heuristic against exhaustive search."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .oracle import InstanceTooLargeError, assignment_count, exhaustive_solve, horizon_utility
from .sim import ScenarioConfig, SimulationResult, simulate


@dataclass
class GapRow:
    instance_id: int  # service-time index of the instance
    U_oracle: float
    U_mvr: float
    gap: float  # |U_mvr - U_oracle| / |U_oracle|
    enumerated_count: int
    wall_time: float  # oracle seconds

    FIELDS = ("instance_id", "U_oracle", "U_mvr", "gap", "enumerated_count", "wall_time")

    def row(self) -> list:
        return [getattr(self, f) for f in self.FIELDS]


@dataclass
class OracleComparison:
    rows: list[GapRow]
    mvr: SimulationResult
    exhaustive: SimulationResult

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.rows])

    @property
    def max_gap(self) -> float:
        return float(self.gaps.max(initial=0.0))

    def fraction_within(self, tol: float = 0.05) -> float:
        g = self.gaps
        return float(np.mean(g <= tol)) if g.size else 1.0

    @property
    def total_gap(self) -> float:
        """Relative gap of the closed-loop total objectives."""
        ref = self.exhaustive.total_objective
        return abs(self.mvr.total_objective - ref) / abs(ref)


def check_cap(cfg: ScenarioConfig) -> int:
    """Per-step enumeration size; refuses instances over the cap."""
    n = assignment_count(cfg.users, len(cfg.ap_positions), cfg.T)
    if n > cfg.enumeration_cap:
        raise InstanceTooLargeError(
            f"{len(cfg.ap_positions)}^({cfg.users}*{cfg.T}) = {n} assignments per step exceeds the cap "
            f"{cfg.enumeration_cap}; the cap applies to each service time separately"
        )
    return n


def per_step_gap(inst, sol) -> GapRow:
    """Oracle vs MVR utility on one instance.

    MVR is charged its committed first-slot shares and the optimal shares of
    its recovered later slots.
    """
    start = time.perf_counter()
    ex = exhaustive_solve(inst, cap=np.iinfo(np.int64).max)
    wall = time.perf_counter() - start
    u_mvr = horizon_utility(sol.horizon_assignment, inst, sol.shares)
    gap = abs(u_mvr - ex.utility) / abs(ex.utility)
    return GapRow(-1, ex.utility, u_mvr, gap, ex.iterations, wall)


def oracle_compare(cfg: ScenarioConfig) -> OracleComparison:
    """Run MVR in closed loop, score every step's instance against the oracle, then run the oracle loop."""
    check_cap(cfg)
    rows: list[GapRow] = []

    def hook(k, inst, sol):
        row = per_step_gap(inst, sol)
        row.instance_id = k
        rows.append(row)

    mvr = simulate(cfg.replace(algorithm="mvr"), hook)
    ex = simulate(cfg.replace(algorithm="exhaustive"))
    return OracleComparison(rows, mvr, ex)
