"""Stationarity checks of the closed-form primal update against a numeric Lagrangian.

The relaxed Lagrangian (minimisation form, rates in solver units) is

    L = sum x^(2b-1) (r p)^(1-b)
        + sum_t,a lam (sum_u x p - 1) + sum_t,u zeta (sum_a x - 1)
        + sum_{t>=2} gamma^t (r^t - ((1 - eta0) x^(t-1) + eta0) R^t)

Apart from constants it is a sum of per-coordinate terms, so one central
difference per variable array yields every partial derivative at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mvr import MultiplierSet, ProblemInstance, RelaxedPrimal, SolverConfig, primal_update


def lagrangian_terms(x, p, r, inst: ProblemInstance, mult: MultiplierSet, rates=None) -> np.ndarray:
    """Per-coordinate part of the Lagrangian; its sum differs from L by a constant."""
    R = inst.rates if rates is None else rates
    beta, eta0 = inst.beta, inst.eta0
    T = R.shape[0]
    out = x ** (2 * beta - 1) * (r * p) ** (1 - beta)
    out = out + mult.lam[:, None, :] * x * p + mult.zeta[:, :, None] * x
    nxt = np.zeros_like(R)
    nxt[:-1] = R[1:]
    out = out - mult.gamma[1:T + 1] * (1 - eta0) * x * nxt
    out[1:] = out[1:] + mult.gamma[1:T] * r[1:]
    return out


def lagrangian(x, p, r, inst: ProblemInstance, mult: MultiplierSet, rates=None) -> float:
    """Full scalar Lagrangian, including the constant offsets."""
    R = inst.rates if rates is None else rates
    const = -mult.lam.sum() - mult.zeta.sum()
    if R.shape[0] > 1:
        const -= float(np.sum(mult.gamma[1:R.shape[0]] * inst.eta0 * R[1:]))
    return float(lagrangian_terms(x, p, r, inst, mult, rates).sum() + const)


def fd_partials(x, p, r, inst, mult, rates=None, rel_step: float = 1e-5):
    """Central-difference partial derivatives of L with respect to x, p and r."""
    out = []
    args = [np.asarray(x, float), np.asarray(p, float), np.asarray(r, float)]
    for k in range(3):
        h = rel_step * np.maximum(np.abs(args[k]), 1e-12)
        up = list(args)
        dn = list(args)
        up[k] = args[k] + h
        dn[k] = args[k] - h
        out.append((lagrangian_terms(*up, inst, mult, rates) - lagrangian_terms(*dn, inst, mult, rates)) / (2 * h))
    return tuple(out)


def _scale(x, p, r, inst, mult, rates):
    """Magnitude of the largest term in each partial derivative, for relative residuals."""
    R = inst.rates if rates is None else rates
    beta = inst.beta
    T = R.shape[0]
    obj = x ** (2 * beta - 1) * (r * p) ** (1 - beta)
    lam = mult.lam[:, None, :]
    nxt = np.zeros_like(R)
    nxt[:-1] = R[1:]
    couple = np.abs(mult.gamma[1:T + 1]) * (1 - inst.eta0) * nxt
    sx = np.maximum.reduce([(2 * beta - 1) * obj / x, lam * p, np.abs(mult.zeta)[:, :, None] + 0 * x, couple])
    sp = np.maximum((beta - 1) * obj / p, lam * x)
    sr = np.zeros_like(R)
    sr[1:] = np.maximum((beta - 1) * obj[1:] / r[1:], np.abs(mult.gamma[1:T]))
    return sx, sp, sr


@dataclass
class StationarityReport:
    max_residual: float  # largest relative residual over all unclamped coordinates
    checked: int  # number of (variable, coordinate) pairs checked
    identity_residual: float  # max relative error of lam x p = gamma r at t >= 2


def stationarity_report(inst: ProblemInstance, mult: MultiplierSet, cfg: SolverConfig | None = None,
                        rates=None) -> StationarityReport:
    """Residuals of the three stationarity equations at the closed-form primal point.

    Only unclamped coordinates are checked: p strictly inside (p_floor, 1)
    and x strictly inside (0, 1); r only for t >= 2.
    """
    cfg = cfg or SolverConfig()
    R = inst.rates if rates is None else rates
    primal: RelaxedPrimal = primal_update(inst, mult, cfg, R)
    x, p, r = primal.x, primal.p, primal.r
    dx, dp, dr = fd_partials(x, p, r, inst, mult, R)
    sx, sp, sr = _scale(x, p, r, inst, mult, R)
    free = (p > cfg.p_floor) & (p < 1.0) & (x > 1e-9) & (x < 1.0) & (mult.lam[:, None, :] > cfg.lam_floor)
    res = [np.abs(dx) / sx, np.abs(dp) / sp]
    masks = [free, free]
    if R.shape[0] > 1:
        free_r = np.zeros_like(free)
        free_r[1:] = free[1:] & (np.abs(mult.gamma[1:R.shape[0]]) > cfg.gamma_floor)
        res.append(np.abs(dr) / np.where(sr > 0, sr, 1.0))
        masks.append(free_r)
    worst = max((float(v[m].max()) for v, m in zip(res, masks) if m.any()), default=0.0)
    checked = int(sum(m.sum() for m in masks))

    ident = 0.0
    if R.shape[0] > 1:
        m = masks[-1][1:]
        if m.any():
            lhs = (mult.lam[1:, None, :] * x[1:] * p[1:])[m]
            rhs = (np.abs(mult.gamma[1:R.shape[0]]) * r[1:])[m]
            ident = float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), np.abs(rhs))))
    return StationarityReport(worst, checked, ident)


def random_case(rng: np.random.Generator, max_T: int = 4, max_users: int = 5, max_aps: int = 3,
                beta: float | None = None):
    """A random instance (solver units) with multipliers that leave most coordinates unclamped."""
    T = int(rng.integers(1, max_T + 1))
    U = int(rng.integers(1, max_users + 1))
    A = int(rng.integers(1, max_aps + 1))
    beta = float(rng.choice([1.5, 2.0, 3.0])) if beta is None else beta
    R = rng.uniform(0.2, 5.0, (T, U, A))
    prev = np.eye(A, dtype=int)[rng.integers(0, A, U)]
    inst = ProblemInstance(R, prev, eta0=float(rng.uniform(0.5, 1.0)), beta=beta, rate_unit=1.0)
    lam = rng.uniform(0.5, 5.0, (T, A))
    zeta = -rng.uniform(0.1, 1.0, (T, U))
    gamma = np.zeros((T + 1, U, A))
    gamma[1:T] = rng.uniform(0.05, 2.0, (T - 1, U, A))
    return inst, MultiplierSet(lam, zeta, gamma)


def kkt_suite(cases: int = 100, rng_seed=0, cfg: SolverConfig | None = None) -> list[StationarityReport]:
    rng = np.random.default_rng(rng_seed)
    return [stationarity_report(*random_case(rng), cfg) for _ in range(cases)]
