"""Self-checks behind ``vlcmvr verify``: convexity conditions, stationarity, mobility statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mobility as mob
from .solver.convexity import check_monomial_convexity, numeric_hessian_witness, relaxation_exponents
from .solver.kkt import kkt_suite

UNIT_SQUARE_MEAN_LEG = 0.52141  # mean distance of two uniform points in the unit square


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def convexity_checks(samples: int = 10_000, rng_seed=0) -> list[Check]:
    """Boundary exponents pass, exponents just past the boundary yield a counterexample."""
    out = []
    cases = [(b, "convex", "psd", -0.1) for b in (1.5, 2.0, 3.0)]
    cases += [(b, "concave", "nsd", +0.1) for b in (0.6, 0.75, 0.9)]
    for beta, kind, definiteness, nudge in cases:
        for first in (False, True):
            a0 = beta if first else 2 * beta - 1
            exps = relaxation_exponents(beta, first, a=a0)
            bad = relaxation_exponents(beta, first, a=a0 + nudge)
            label = f"{kind} beta={beta} {'t=1' if first else 't>1'}"
            w = numeric_hessian_witness(*exps, samples=samples, rng_seed=rng_seed, definiteness=definiteness)
            verdict = check_monomial_convexity(*exps)
            out.append(Check(f"{label} a={a0:g}", w.holds and verdict == kind,
                             f"analytic {verdict}, worst eig ratio {w.worst_ratio:.2e}"))
            w = numeric_hessian_witness(*bad, samples=samples, rng_seed=rng_seed, definiteness=definiteness)
            verdict = check_monomial_convexity(*bad)
            found = w.counterexample is not None
            out.append(Check(f"{label} a={a0 + nudge:g} (expected counterexample)", found and verdict == "neither",
                             f"analytic {verdict}, counterexample at {np.round(w.counterexample, 3).tolist() if found else None}"))
    return out


def kkt_checks(cases: int = 100, rng_seed=0, tol: float = 1e-6, identity_tol: float = 1e-9) -> list[Check]:
    reports = kkt_suite(cases, rng_seed)
    worst = max(r.max_residual for r in reports)
    ident = max(r.identity_residual for r in reports)
    checked = sum(r.checked for r in reports)
    return [
        Check("stationarity residual", worst < tol, f"max relative residual {worst:.2e} over {checked} coordinates"),
        Check("lam x p = gamma r identity", ident < identity_tol, f"max relative error {ident:.2e}"),
    ]


def mobility_checks(leg_samples: int = 10_000_000, trials: int = 100_000, users: int = 2000,
                    rng_seed=0) -> list[Check]:
    seeds = np.random.SeedSequence(rng_seed).spawn(4)
    out = []
    el = mob.expected_leg_length(mob.Room(1.0, 1.0), leg_samples, seeds[0])
    out.append(Check("E[l] unit square", abs(el - UNIT_SQUARE_MEAN_LEG) <= 0.005, f"{el:.5f} vs {UNIT_SQUARE_MEAN_LEG}"))

    room = mob.Room(1.0, 1.0)
    params = mob.MobilityParams(v_min=0.1, v_max=1.0, pause_min=0.0, pause_max=1.0)
    tau = mob.service_time_bound(0.1, 3, 0.1, 1.0, UNIT_SQUARE_MEAN_LEG)
    freq = mob.misprediction_frequency(room, params, 3, tau, trials, seeds[1])
    out.append(Check("misprediction at the service-time bound", freq <= 0.13,
                     f"frequency {freq:.4f} with tau_p {tau:.4f} s (delta 0.1, T 3)"))

    # stationarity: the spatial law must not drift once users start moving
    room = mob.Room(8.0, 4.0)
    params = mob.MobilityParams(v_min=0.1, v_max=1.0, pause_min=0.0, pause_max=1.0)
    states = mob.rwp_init(room, params, users, np.random.default_rng(seeds[2]))
    traj = mob.trajectory(states, 2, 30.0, params, room, seeds[3])
    centre = np.array([room.width / 2, room.depth / 2])
    d0 = np.linalg.norm(traj[0] - centre, axis=1)
    d1 = np.linalg.norm(traj[1] - centre, axis=1)
    se = np.sqrt(d0.var() / users + d1.var() / users)
    z = abs(d0.mean() - d1.mean()) / se
    out.append(Check("stationary spatial law", z < 4.0,
                     f"mean distance to centre {d0.mean():.3f} m -> {d1.mean():.3f} m after 30 s (z={z:.2f})"))
    return out


def run_checks(quick: bool = False, rng_seed=0) -> list[Check]:
    if quick:
        return (convexity_checks(1_000, rng_seed) + kkt_checks(20, rng_seed)
                + mobility_checks(1_000_000, 10_000, 500, rng_seed))
    return convexity_checks(10_000, rng_seed) + kkt_checks(100, rng_seed) + mobility_checks(rng_seed=rng_seed)
