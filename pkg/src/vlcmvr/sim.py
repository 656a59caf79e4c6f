"""Service-time simulation loop: move users, predict, solve, commit, measure."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from . import mobility as mob
from .channel import ApLayout, InterferencePolicy, PhyParams, rate_tensor
from .oracle import DEFAULT_CAP, exhaustive_solve
from .solver.mvr import (
    AllocationSolution,
    DegenerateInstanceError,
    MultiplierSet,
    ProblemInstance,
    SolverConfig,
    normalize_allocation,
    solve,
)
from .utility import psi

ALGORITHMS = ("mvr", "exhaustive")
PREDICTION_MODES = ("two_fix_estimate", "oracle_positions")


@dataclass
class ScenarioConfig:
    room: mob.Room = field(default_factory=lambda: mob.Room(8.0, 4.0))
    ap_positions: np.ndarray = field(default_factory=lambda: np.array([[2.0, 2.0], [6.0, 2.0]]))
    interference_policy: InterferencePolicy = InterferencePolicy.FREQUENCY_REUSE
    phy: PhyParams = field(default_factory=PhyParams)
    mobility: mob.MobilityParams = field(default_factory=mob.MobilityParams)
    users: int = 15
    beta: float = 2.0
    eta0: float = 0.75
    T: int = 1
    tau_p: float = 0.3
    duration: float = 900.0
    algorithm: str = "mvr"
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    prediction: str = "two_fix_estimate"
    warm_start: bool = True
    enumeration_cap: int = DEFAULT_CAP

    def __post_init__(self):
        self.ap_positions = np.atleast_2d(np.asarray(self.ap_positions, dtype=float))
        self.interference_policy = InterferencePolicy(self.interference_policy)
        self.validate()

    def validate(self):
        if self.tau_p <= 0:
            raise ValueError("tau_p must be positive")
        if self.duration < self.tau_p:
            raise ValueError("duration must be at least one service time")
        if not self.beta > 1:
            raise ValueError("beta must be > 1")
        if not 0 < self.eta0 <= 1:
            raise ValueError("eta0 must lie in (0, 1]")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.users < 1:
            raise ValueError("need at least one user")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.prediction not in PREDICTION_MODES:
            raise ValueError(f"prediction must be one of {PREDICTION_MODES}")
        self.layout  # checks AP positions against the room

    @property
    def layout(self) -> ApLayout:
        return ApLayout(self.ap_positions, self.interference_policy, self.phy,
                        room=(self.room.width, self.room.depth))

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.tau_p))

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ap_positions"] = self.ap_positions.tolist()
        d["interference_policy"] = self.interference_policy.value
        return d


def preset(name: str, **overrides) -> ScenarioConfig:
    """Reference scenarios: ``room2ap`` (8 m x 4 m, 2 APs) and ``room4ap`` (8 m x 8 m, 2x2 APs)."""
    if name == "room2ap":
        base = dict(room=mob.Room(8.0, 4.0), ap_positions=np.array([[2.0, 2.0], [6.0, 2.0]]))
    elif name == "room4ap":
        base = dict(
            room=mob.Room(8.0, 8.0),
            ap_positions=np.array([[2.0, 2.0], [6.0, 2.0], [2.0, 6.0], [6.0, 6.0]]),
        )
    else:
        raise KeyError(f"unknown scenario preset {name!r}; choose room2ap or room4ap")
    base.update(overrides)
    return ScenarioConfig(**base)


@dataclass
class MetricsRecord:
    step: int
    time_s: float
    throughput_bps: float
    objective: float
    handovers: int
    iterations: int
    wall_time_s: float
    converged: bool = True
    degenerate: bool = False

    CSV_FIELDS = ("step", "time_s", "throughput_bps", "objective", "handovers", "iterations", "wall_time_s")

    def row(self) -> list:
        return [getattr(self, f) for f in self.CSV_FIELDS]


@dataclass
class SimulationResult:
    config: ScenarioConfig
    records: list[MetricsRecord]
    assignments: np.ndarray  # (steps + 1, users) AP index; row 0 is the initial association
    user_rates: np.ndarray  # (steps, users) realized bit/s

    @property
    def total_objective(self) -> float:
        return total_objective(self.records)

    @property
    def mean_throughput(self) -> float:
        return float(np.mean([r.throughput_bps for r in self.records]))

    @property
    def handovers(self) -> int:
        return handover_count(self.assignments)

    def summary(self) -> dict:
        return {
            "total_objective": self.total_objective,
            "mean_throughput_bps": self.mean_throughput,
            "handovers": self.handovers,
            "steps": len(self.records),
            "mean_iterations": float(np.mean([r.iterations for r in self.records])),
            "mean_wall_time_s": float(np.mean([r.wall_time_s for r in self.records])),
            "nonconverged_steps": int(sum(not r.converged for r in self.records)),
            "degenerate_steps": int(sum(r.degenerate for r in self.records)),
        }


def realized_rates(assignment, shares, prev_assignment, true_rates, eta0: float) -> np.ndarray:
    """Delivered rate of every user: share x efficiency x rate at the true position."""
    x = np.asarray(assignment)
    ap = np.argmax(x, axis=1)
    prev = np.argmax(np.asarray(prev_assignment), axis=1)
    users = np.arange(x.shape[0])
    eta = np.where(ap == prev, 1.0, eta0)
    return np.asarray(shares)[users, ap] * eta * np.asarray(true_rates)[users, ap]


def realized_rate(user: int, assignment, shares, prev_assignment, true_position, layout: ApLayout,
                  eta0: float) -> float:
    """Delivered rate of one user at its true (not predicted) position."""
    rates = rate_tensor(np.asarray(true_position, dtype=float)[None, None, :], layout)[0, 0]
    ap = int(np.argmax(assignment[user]))
    eta = 1.0 if ap == int(np.argmax(prev_assignment[user])) else eta0
    return float(shares[user][ap] * eta * rates[ap])


def handover_count(history) -> int:
    """Number of (user, step) pairs whose AP differs from the previous step.

    ``history`` is (steps, users) of AP indices, or (steps, users, aps) one-hot.
    """
    h = np.asarray(history)
    if h.ndim == 3:
        h = np.argmax(h, axis=2)
    if h.shape[0] < 2:
        return 0
    return int(np.sum(h[1:] != h[:-1]))


def total_objective(records) -> float:
    return float(sum(r.objective for r in records))


def step_objective(rates, beta: float, floor: float) -> float:
    """Fairness utility of the realized rates; zero rates are raised to ``floor``."""
    return float(np.sum(psi(np.maximum(rates, floor), beta)))


def _onehot(ap, n_aps) -> np.ndarray:
    out = np.zeros((len(ap), n_aps), dtype=int)
    out[np.arange(len(ap)), ap] = 1
    return out


StepHook = Callable[[int, ProblemInstance, AllocationSolution], None]


def simulate(cfg: ScenarioConfig, hook: StepHook | None = None,
             initial_states: list[mob.UserState] | None = None) -> SimulationResult:
    """Run the closed loop for ``cfg.steps`` service times.

    Ground truth is sampled once per service time. At step k the controller
    knows the positions at k-1 and k, forecasts k+1..k+T, solves, and the
    committed allocation is charged at the true position k+1. The user
    trajectory depends only on the seed, never on the algorithm or T.
    """
    layout = cfg.layout
    K = cfg.steps
    seq = np.random.SeedSequence(cfg.seed)
    init_seq, traj_seq = seq.spawn(2)
    states = initial_states or mob.rwp_init(cfg.room, cfg.mobility, cfg.users, np.random.default_rng(init_seq))
    if len(states) != cfg.users:
        raise ValueError("initial_states does not match the user count")
    truth = mob.trajectory(states, K + cfg.T + 1, cfg.tau_p, cfg.mobility, cfg.room, traj_seq)
    true_rates = rate_tensor(truth, layout)  # (samples, users, aps)
    floor_rate = cfg.solver.p_floor * cfg.phy.bandwidth

    x_prev = None
    history = np.empty((K + 1, cfg.users), dtype=int)
    user_rates = np.empty((K, cfg.users))
    records: list[MetricsRecord] = []
    warm: MultiplierSet | None = None
    for k in range(1, K + 1):
        if cfg.prediction == "oracle_positions":
            future = truth[k + 1:k + 1 + cfg.T]
            R = true_rates[k + 1:k + 1 + cfg.T]
        else:
            future = mob.predict(truth[k - 1], truth[k], cfg.tau_p, cfg.T, cfg.room)
            R = rate_tensor(future, layout)
        if x_prev is None:
            x_prev = _onehot(np.argmax(R[0], axis=1), layout.n_aps)
            history[0] = np.argmax(x_prev, axis=1)

        inst = ProblemInstance(R, x_prev, cfg.eta0, cfg.beta, rate_unit=cfg.phy.bandwidth)
        start = time.perf_counter()
        degenerate = False
        try:
            if cfg.algorithm == "mvr":
                sol = solve(inst, cfg.solver, warm if cfg.warm_start else None)
                warm = sol.multipliers
            else:
                sol = exhaustive_solve(inst, cfg.enumeration_cap)
            x1, p1 = sol.assignment, sol.shares
            iterations, converged = sol.iterations, sol.converged
        except DegenerateInstanceError:
            degenerate = True
            sol = None
            x1 = x_prev.astype(int)
            p1 = normalize_allocation(np.ones(x1.shape), x1)
            iterations, converged = 0, False
        elapsed = time.perf_counter() - start
        if hook is not None and sol is not None:
            hook(k, inst, sol)

        rates = realized_rates(x1, p1, x_prev, true_rates[k + 1], cfg.eta0)
        ap = np.argmax(x1, axis=1)
        history[k] = ap
        user_rates[k - 1] = rates
        records.append(MetricsRecord(
            step=k,
            time_s=k * cfg.tau_p,
            throughput_bps=float(rates.sum()),
            objective=step_objective(rates, cfg.beta, floor_rate),
            handovers=int(np.sum(history[k] != history[k - 1])),
            iterations=int(iterations),
            wall_time_s=elapsed,
            converged=bool(converged),
            degenerate=degenerate,
        ))
        x_prev = x1
    return SimulationResult(cfg, records, history, user_rates)


def run(cfg: ScenarioConfig) -> list[MetricsRecord]:
    return simulate(cfg).records
