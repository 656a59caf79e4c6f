"""Compiled dual-ascent loop; mirrors ``primal_update`` + ``dual_step`` exactly."""

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is an optional accelerator
    njit = None


def _primal(R, x0, eta0, beta, lam, zeta, gamma, p_floor, lam_floor, gamma_floor, x, p, r, praw):
    T, U, A = R.shape
    c = (beta - 1.0) / (3.0 * beta - 2.0)
    e_lam = (2.0 * beta - 1.0) / (beta - 1.0)
    e_p = (3.0 * beta - 2.0) / (beta - 1.0)
    denom_r = (beta - 1.0) ** (1.0 / (beta - 1.0))
    e_x = 1.0 / (2.0 * beta - 2.0)
    b2 = beta == 2.0
    for t in range(T):
        for a in range(A):
            lamf = max(lam[t, a], lam_floor)
            for u in range(U):
                r_next = R[t + 1, u, a] if t + 1 < T else 0.0
                numer = gamma[t + 1, u, a] * (1.0 - eta0) * r_next - zeta[t, u]
                pr = c * numer / lamf
                praw[t, u, a] = pr
                pv = min(max(pr, p_floor), 1.0)
                g = 0.0
                if t > 0:
                    g = max(abs(gamma[t, u, a]), gamma_floor)
                if b2:
                    # beta = 2: every exponent is an integer or a half
                    if t == 0:
                        rv = ((1.0 - eta0) * x0[u, a] + eta0) * R[0, u, a]
                    else:
                        rv = lamf * lamf * lamf * (pv * pv) * (pv * pv) / (g * g)
                    xv = math.sqrt(rv * pv * pv * lamf)
                    if pr >= 1.0:
                        drive = max(numer - lamf * pv, 0.0) / 3.0
                        if t > 0:
                            rv = drive * drive * drive / (g * g) * pv
                        xv = math.sqrt(drive * rv * pv)
                        if t > 0 and xv > 1.0:
                            rv = math.sqrt(1.0 / (g * pv))
                else:
                    if t == 0:
                        rv = ((1.0 - eta0) * x0[u, a] + eta0) * R[0, u, a]
                    else:
                        rv = lamf**e_lam * pv**e_p / (denom_r * g * g)
                    xv = (rv ** (beta - 1.0) * pv**beta * lamf / (beta - 1.0)) ** e_x
                    if pr >= 1.0:
                        drive = max(numer - lamf * pv, 0.0) / (2.0 * beta - 1.0)
                        if t > 0:
                            c2 = drive ** ((2.0 * beta - 1.0) / (2.0 * beta - 2.0))
                            rv = ((beta - 1.0) * c2 / g) ** 2 * pv
                        xv = drive**e_x * math.sqrt(rv * pv)
                        if t > 0 and xv > 1.0:
                            rv = ((beta - 1.0) / (g * pv ** (beta - 1.0))) ** (1.0 / beta)
                x[t, u, a] = min(max(xv, 0.0), 1.0)
                p[t, u, a] = pv
                r[t, u, a] = rv


def _loop(R, x0, eta0, beta, lam, zeta, gamma, max_iterations, min_iterations, step, ratio,
          sqrt_decay, tol, p_floor, lam_floor, gamma_floor, x, p, r, praw):
    T, U, A = R.shape
    _primal(R, x0, eta0, beta, lam, zeta, gamma, p_floor, lam_floor, gamma_floor, x, p, r, praw)
    n = 0
    converged = False
    for n in range(1, max_iterations + 1):
        eps = step / math.sqrt(n) if sqrt_decay else step
        eps_g = eps / ratio
        change = 0.0
        for t in range(T):
            for a in range(A):
                s = 0.0
                for u in range(U):
                    s += x[t, u, a] * p[t, u, a]
                new = max(lam[t, a] + eps * (s - 1.0), 0.0)
                change = max(change, abs(new - lam[t, a]))
                lam[t, a] = new
            for u in range(U):
                s = 0.0
                for a in range(A):
                    s += x[t, u, a]
                d = eps * (s - 1.0)
                change = max(change, abs(d))
                zeta[t, u] += d
            if t >= 1:
                for u in range(U):
                    for a in range(A):
                        target = ((1.0 - eta0) * x[t - 1, u, a] + eta0) * R[t, u, a]
                        d = eps_g * (r[t, u, a] - target)
                        change = max(change, abs(d))
                        gamma[t, u, a] += d
        _primal(R, x0, eta0, beta, lam, zeta, gamma, p_floor, lam_floor, gamma_floor, x, p, r, praw)
        if n >= min_iterations and change < tol:
            converged = True
            break
    return n, converged


if njit is not None:
    _primal = njit(cache=True)(_primal)
    _loop = njit(cache=True)(_loop)


def run(R, x0, eta0, beta, lam, zeta, gamma, cfg):
    """Iterate in place on the multiplier arrays; returns (x, p, r, praw, iterations, converged)."""
    x = np.empty_like(R)
    p = np.empty_like(R)
    r = np.empty_like(R)
    praw = np.empty_like(R)
    n, converged = _loop(
        R, x0, float(eta0), float(beta), lam, zeta, gamma,
        int(cfg.max_iterations), int(cfg.min_iterations), float(cfg.step), float(cfg.gamma_step_ratio),
        cfg.decay == "sqrt", float(cfg.tol), float(cfg.p_floor), float(cfg.lam_floor),
        float(cfg.gamma_floor), x, p, r, praw,
    )
    return x, p, r, praw, int(n), bool(converged)


available = njit is not None
