"""Relaxed T-step look-ahead allocation solved by Lagrangian dual ascent (MVR).

Array conventions (0-based slice ``k`` is service time ``t = k + 1``):

* ``rates``, ``x``, ``p``, ``r``: shape (T, n_users, n_aps)
* ``lam``: (T, n_aps), ``zeta``: (T, n_users)
* ``gamma``: (T + 1, n_users, n_aps); ``gamma[0]`` (t = 1) and ``gamma[T]``
  (t = T + 1) are identically zero.

The binary indicator is relaxed to ``x ** (2 beta - 1)`` which keeps the
objective convex for every slice and gives closed-form primal minimisers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np


class DegenerateInstanceError(RuntimeError):
    """The relaxed problem carries no usable allocation for some user or AP."""


@dataclass(frozen=True)
class ProblemInstance:
    rates: np.ndarray  # (T, users, aps) bit/s
    prev_assignment: np.ndarray  # (users, aps) binary
    eta0: float = 0.75
    beta: float = 2.0
    rate_unit: float | None = None  # internal scaling; defaults to the mean positive rate

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        if rates.ndim == 2:
            rates = rates[None]
        if rates.ndim != 3:
            raise ValueError("rates must have shape (T, users, aps)")
        if not np.all(np.isfinite(rates)) or np.any(rates < 0):
            raise ValueError("rates must be finite and non-negative")
        x0 = np.asarray(self.prev_assignment)
        if x0.shape != rates.shape[1:]:
            raise ValueError(f"prev_assignment shape {x0.shape} does not match rates {rates.shape[1:]}")
        if not np.all((x0 == 0) | (x0 == 1)) or not np.all(x0.sum(axis=1) == 1):
            raise ValueError("prev_assignment must be binary with exactly one AP per user")
        if not self.beta > 1:
            raise ValueError("the relaxed solver needs beta > 1")
        if not 0 < self.eta0 <= 1:
            raise ValueError("eta0 must lie in (0, 1]")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "prev_assignment", x0.astype(float))

    @property
    def T(self) -> int:
        return self.rates.shape[0]

    @property
    def n_users(self) -> int:
        return self.rates.shape[1]

    @property
    def n_aps(self) -> int:
        return self.rates.shape[2]

    @property
    def unit(self) -> float:
        if self.rate_unit is not None:
            return float(self.rate_unit)
        pos = self.rates[self.rates > 0]
        return float(pos.mean()) if pos.size else 1.0

    @property
    def first_rates(self) -> np.ndarray:
        """Effective rates of the first service time, fixed by the previous assignment."""
        return ((1 - self.eta0) * self.prev_assignment + self.eta0) * self.rates[0]


@dataclass
class SolverConfig:
    """Dual-ascent settings.

    ``step`` is the resource/assignment step; the rate-multiplier step is
    ``step / gamma_step_ratio``. ``decay`` selects a constant step or
    ``step / sqrt(n)``. Iteration stops when the largest multiplier change
    drops below ``tol`` (in the scaled problem) or after ``max_iterations``.
    """

    max_iterations: int = 2000
    min_iterations: int = 20
    step: float = 0.05
    gamma_step_ratio: float = 100.0
    decay: str = "constant"
    tol: float = 1e-7
    residual_tol: float = 1e-3
    p_floor: float = 1e-6
    lam_floor: float = 1e-9
    x_floor: float = 1e-12
    gamma_floor: float = 1e-12
    record_trace: bool = False
    backend: str = "auto"  # "numpy", "numba", or "auto" (numba when importable)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        for name in ("step", "gamma_step_ratio", "tol", "p_floor", "lam_floor", "x_floor", "gamma_floor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.decay not in ("constant", "sqrt"):
            raise ValueError("decay must be 'constant' or 'sqrt'")
        if self.backend not in ("auto", "numpy", "numba"):
            raise ValueError("backend must be 'auto', 'numpy' or 'numba'")

    def use_kernel(self) -> bool:
        """Whether the compiled loop runs; tracing always uses the numpy path."""
        from . import _kernel

        if self.backend == "numba" and not _kernel.available:
            raise RuntimeError("backend='numba' requested but numba is not installed")
        return self.backend != "numpy" and _kernel.available and not self.record_trace

    def steps(self, n: int) -> tuple[float, float, float]:
        eps = self.step if self.decay == "constant" else self.step / math.sqrt(n)
        return eps, eps, eps / self.gamma_step_ratio


@dataclass
class MultiplierSet:
    lam: np.ndarray
    zeta: np.ndarray
    gamma: np.ndarray

    @classmethod
    def initial(cls, inst: ProblemInstance, scaled_rates: np.ndarray | None = None) -> "MultiplierSet":
        """lam = 1, zeta = 0, gamma = (beta - 1) / mean_rate ** beta in scaled units."""
        T, U, A = inst.rates.shape
        R = inst.rates / inst.unit if scaled_rates is None else scaled_rates
        gamma = np.zeros((T + 1, U, A))
        if T > 1:
            pos = R[R > 0]
            rbar = float(pos.mean()) if pos.size else 1.0
            gamma[1:T] = (inst.beta - 1.0) / rbar**inst.beta
        return cls(np.ones((T, A)), np.zeros((T, U)), gamma)

    def copy(self) -> "MultiplierSet":
        return MultiplierSet(self.lam.copy(), self.zeta.copy(), self.gamma.copy())

    def max_change(self, other: "MultiplierSet") -> float:
        return max(
            float(np.max(np.abs(self.lam - other.lam), initial=0.0)),
            float(np.max(np.abs(self.zeta - other.zeta), initial=0.0)),
            float(np.max(np.abs(self.gamma - other.gamma), initial=0.0)),
        )


@dataclass
class RelaxedPrimal:
    x: np.ndarray
    p: np.ndarray
    r: np.ndarray
    degenerate_aps: np.ndarray | None = None  # (T, aps): every share sits on the floor


@dataclass
class AllocationSolution:
    assignment: np.ndarray  # (users, aps) binary, first service time
    shares: np.ndarray  # (users, aps)
    effective_rates: np.ndarray  # (users, aps) bit/s, first service time
    horizon_assignment: np.ndarray | None = None  # (T, users) AP index per service time
    multipliers: MultiplierSet | None = None
    relaxed: RelaxedPrimal | None = None
    iterations: int = 0
    converged: bool = True
    residual: float = 0.0
    objective_trace: list = field(default_factory=list)
    residual_trace: list = field(default_factory=list)
    wall_time: float = 0.0
    utility: float | None = None

    @property
    def ap_of_user(self) -> np.ndarray:
        return np.argmax(self.assignment, axis=1)

    @property
    def user_rates(self) -> np.ndarray:
        """Allocated rate p * r of every user at its serving AP (bit/s)."""
        return np.sum(self.assignment * self.shares * self.effective_rates, axis=1)


def relaxed_objective(primal: RelaxedPrimal, beta: float, x_floor: float = 1e-12) -> float:
    """Sum of x^(2beta-1) / (r p)^(beta-1); entries with x <= x_floor contribute 0."""
    x, p, r = (np.asarray(a, dtype=float) for a in (primal.x, primal.p, primal.r))
    live = x > x_floor
    safe = np.where(live, r * p, 1.0)
    terms = np.where(live, np.where(live, x, 0.0) ** (2 * beta - 1) / safe ** (beta - 1), 0.0)
    return float(terms.sum())


def _next_slice(a: np.ndarray) -> np.ndarray:
    """a shifted one service time forward with a zero slice after the horizon."""
    out = np.zeros_like(a)
    out[:-1] = a[1:]
    return out


def primal_update(inst: ProblemInstance, mult: MultiplierSet, cfg: SolverConfig,
                  rates: np.ndarray | None = None) -> RelaxedPrimal:
    """Closed-form minimisers of the Lagrangian for fixed multipliers.

    ``rates`` are the (possibly rescaled) rates to use; defaults to
    ``inst.rates``. Shares are clamped to [p_floor, 1], assignments to [0, 1].
    """
    R = inst.rates if rates is None else rates
    beta, eta0 = inst.beta, inst.eta0
    T = R.shape[0]
    lam = np.maximum(mult.lam, cfg.lam_floor)[:, None, :]
    gamma_next = mult.gamma[1:T + 1]
    numer = gamma_next * (1 - eta0) * _next_slice(R) - mult.zeta[:, :, None]
    p_raw = (beta - 1) / (3 * beta - 2) * numer / lam
    p = np.clip(p_raw, cfg.p_floor, 1.0)

    r = np.empty_like(R)
    r[0] = ((1 - eta0) * inst.prev_assignment + eta0) * R[0]
    if T > 1:
        g = np.abs(mult.gamma[1:T])
        g = np.maximum(g, cfg.gamma_floor)
        r[1:] = (
            lam[1:] ** ((2 * beta - 1) / (beta - 1))
            * p[1:] ** ((3 * beta - 2) / (beta - 1))
            / ((beta - 1) ** (1 / (beta - 1)) * g**2)
        )
    x = ((r ** (beta - 1) * p**beta * lam) / (beta - 1)) ** (1 / (2 * beta - 2))

    # Share pinned at 1: the share equation no longer holds, so x (and r for
    # t >= 2) come from their own stationarity equations with p = 1.
    pinned = p_raw >= 1.0
    if np.any(pinned):
        drive = np.maximum(numer - lam * p, 0.0) / (2 * beta - 1)
        if T > 1:
            g = np.maximum(np.abs(mult.gamma[1:T]), cfg.gamma_floor)
            c = drive[1:] ** ((2 * beta - 1) / (2 * beta - 2))
            r_pin = ((beta - 1) * c / g) ** 2 * p[1:]
            r[1:] = np.where(pinned[1:], r_pin, r[1:])
        x_pin = drive ** (1 / (2 * beta - 2)) * np.sqrt(r * p)
        over = pinned & (x_pin > 1.0)
        if T > 1 and np.any(over[1:]):
            r_one = ((beta - 1) / (g * p[1:] ** (beta - 1))) ** (1 / beta)
            r[1:] = np.where(over[1:], r_one, r[1:])
        x = np.where(pinned, x_pin, x)
    x = np.clip(x, 0.0, 1.0)
    degenerate = np.all(p_raw <= cfg.p_floor, axis=1)
    return RelaxedPrimal(x, p, r, degenerate)


def constraint_gradients(inst: ProblemInstance, primal: RelaxedPrimal,
                         rates: np.ndarray | None = None):
    """Dual gradients (resource, assignment, rate-definition) at ``primal``."""
    R = inst.rates if rates is None else rates
    g_lam = np.sum(primal.x * primal.p, axis=1) - 1.0
    g_zeta = np.sum(primal.x, axis=2) - 1.0
    g_gamma = np.zeros((R.shape[0] + 1,) + R.shape[1:])
    if R.shape[0] > 1:
        target = ((1 - inst.eta0) * primal.x[:-1] + inst.eta0) * R[1:]
        g_gamma[1:-1] = primal.r[1:] - target
    return g_lam, g_zeta, g_gamma


def dual_step(inst: ProblemInstance, primal: RelaxedPrimal, mult: MultiplierSet, n: int,
              cfg: SolverConfig, rates: np.ndarray | None = None) -> MultiplierSet:
    """One projected gradient-ascent step on the multipliers (iteration ``n`` >= 1)."""
    if n < 1:
        raise ValueError("iteration index starts at 1")
    eps_lam, eps_zeta, eps_gamma = cfg.steps(n)
    g_lam, g_zeta, g_gamma = constraint_gradients(inst, primal, rates)
    lam = np.maximum(mult.lam + eps_lam * g_lam, 0.0)
    zeta = mult.zeta + eps_zeta * g_zeta
    gamma = mult.gamma + eps_gamma * g_gamma
    return MultiplierSet(lam, zeta, gamma)


def recover_assignment(x_relaxed, fallback=None) -> np.ndarray:
    """Binary assignment at the per-user argmax; ties go to the lowest AP index.

    Users whose row is all zero (or not finite) fall back to ``fallback``,
    the AP index (or one-hot row) of the previous service time.
    """
    x = np.asarray(x_relaxed, dtype=float)
    clean = np.where(np.isfinite(x), x, -np.inf)
    choice = np.argmax(clean, axis=1)
    dead = ~np.any(clean > 0, axis=1)
    if np.any(dead) and fallback is not None:
        fb = np.asarray(fallback)
        fb = np.argmax(fb, axis=1) if fb.ndim == 2 else fb
        choice = np.where(dead, fb, choice)
    out = np.zeros(x.shape, dtype=int)
    out[np.arange(x.shape[0]), choice] = 1
    return out


def normalize_allocation(p, x_binary) -> np.ndarray:
    """Rescale shares so every occupied AP hands out all of its resource.

    Pairs with x = 0 get share 0. An AP whose assigned shares sum to zero
    splits its resource equally.
    """
    x = np.asarray(x_binary, dtype=float)
    p = np.where(x > 0, np.asarray(p, dtype=float), 0.0)
    totals = p.sum(axis=0)
    counts = x.sum(axis=0)
    equal = np.where(counts > 0, 1.0 / np.maximum(counts, 1), 0.0)
    out = np.where(totals > 0, p / np.where(totals > 0, totals, 1.0), x * equal)
    return out * x


def _residual(g_lam, g_zeta, g_gamma, lam, R) -> float:
    # complementary slackness: a slack AP with lam = 0 is fine
    res_lam = np.where(lam > 0, np.abs(g_lam), np.maximum(g_lam, 0.0))
    scale = max(float(R.max()), 1e-300)
    return max(
        float(res_lam.max(initial=0.0)),
        float(np.abs(g_zeta).max(initial=0.0)),
        float(np.abs(g_gamma).max(initial=0.0)) / scale,
    )


def solve(inst: ProblemInstance, cfg: SolverConfig | None = None,
          init: MultiplierSet | None = None) -> AllocationSolution:
    """Run dual ascent, then recover a binary first-slot assignment and normalise its shares.

    ``init`` warm-starts the multipliers (scaled units, as returned in
    ``solution.multipliers``); it must match the instance dimensions.
    """
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    unit = inst.unit
    R = inst.rates / unit
    if np.any(R.max(axis=2) <= 0):
        raise DegenerateInstanceError("some user has zero rate to every AP in some service time")

    mult = init.copy() if init is not None else MultiplierSet.initial(inst, R)
    if mult.lam.shape != (inst.T, inst.n_aps) or mult.gamma.shape != (inst.T + 1, inst.n_users, inst.n_aps):
        raise ValueError("warm-start multipliers do not match the instance")
    mult.gamma[0] = 0.0
    mult.gamma[-1] = 0.0

    obj_trace: list[float] = []
    res_trace: list[float] = []
    converged = False
    n = 0
    if cfg.use_kernel():
        from . import _kernel

        x0 = np.ascontiguousarray(inst.prev_assignment, dtype=float)
        x, p, r, p_raw, n, converged = _kernel.run(
            np.ascontiguousarray(R), x0, inst.eta0, inst.beta, mult.lam, mult.zeta, mult.gamma, cfg)
        primal = RelaxedPrimal(x, p, r, np.all(p_raw <= cfg.p_floor, axis=1))
    else:
        primal = primal_update(inst, mult, cfg, R)
        for n in range(1, cfg.max_iterations + 1):
            new = dual_step(inst, primal, mult, n, cfg, R)
            change = new.max_change(mult)
            mult = new
            primal = primal_update(inst, mult, cfg, R)
            if cfg.record_trace:
                g = constraint_gradients(inst, primal, R)
                obj_trace.append(relaxed_objective(primal, inst.beta, cfg.x_floor))
                res_trace.append(_residual(*g, mult.lam, R))
            if n >= cfg.min_iterations and change < cfg.tol:
                converged = True
                break

    g = constraint_gradients(inst, primal, R)
    residual = _residual(*g, mult.lam, R)
    if not converged and residual <= cfg.residual_tol:
        converged = True

    if primal.degenerate_aps is not None and np.any(primal.degenerate_aps[0]):
        occupied = np.any(primal.x[0] > cfg.x_floor, axis=0)
        if np.any(primal.degenerate_aps[0] & occupied):
            raise DegenerateInstanceError("every share of an occupied AP is stuck at the floor")

    x1 = recover_assignment(primal.x[0], inst.prev_assignment)
    p1 = normalize_allocation(primal.p[0], x1)
    horizon = np.stack([np.argmax(recover_assignment(primal.x[k], x1), axis=1) for k in range(inst.T)])
    return AllocationSolution(
        assignment=x1,
        shares=p1,
        effective_rates=inst.first_rates,
        horizon_assignment=horizon,
        multipliers=mult,
        relaxed=RelaxedPrimal(primal.x, primal.p, primal.r * unit, primal.degenerate_aps),
        iterations=n,
        converged=converged,
        residual=residual,
        objective_trace=obj_trace,
        residual_trace=res_trace,
        wall_time=time.perf_counter() - start,
    )
