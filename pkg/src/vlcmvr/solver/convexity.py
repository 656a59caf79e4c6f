"""Convexity checks for the monomial f(x, y, z) = x^a y^b z^c on the positive orthant.

The Hessian factors as f * D^-1 M D^-1 with D = diag(x, y, z) and
M = v v^T - diag(v), v = (a, b, c), so definiteness depends only on M.
Its principal minors are a(a-1), ab(1-a-b) and abc(a+b+c-1) (and the
permutations); convexity needs all of them non-negative, concavity needs
them to alternate in sign starting non-positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np


def _minors(a: float, b: float, c: float) -> dict[int, list[float]]:
    v = (a, b, c)
    first = [u * (u - 1) for u in v]
    second = [u * w * (1 - u - w) for u, w in combinations(v, 2)]
    third = [a * b * c * (a + b + c - 1)]
    return {1: first, 2: second, 3: third}


def is_convex_monomial(a: float, b: float, c: float = 0.0, tol: float = 1e-12) -> bool:
    return all(m >= -tol for ms in _minors(a, b, c).values() for m in ms)


def is_concave_monomial(a: float, b: float, c: float = 0.0, tol: float = 1e-12) -> bool:
    return all((-1) ** k * m >= -tol for k, ms in _minors(a, b, c).items() for m in ms)


def check_monomial_convexity(a: float, b: float, c: float = 0.0, tol: float = 1e-12) -> str:
    """Return 'convex', 'concave' or 'neither' for x^a y^b z^c on x, y, z > 0.

    An affine monomial (e.g. a = 1, b = c = 0) is both; it reports 'convex'.
    """
    if is_convex_monomial(a, b, c, tol):
        return "convex"
    if is_concave_monomial(a, b, c, tol):
        return "concave"
    return "neither"


def relaxation_exponents(beta: float, first_slot: bool = False, a: float | None = None):
    """Exponents (a, b, c) of h(x) (r p)^(1-beta) with h(x) = x^a.

    At the first service time r is a constant, so only p enters (c = 0).
    ``a`` defaults to 2 beta - 1.
    """
    a = 2 * beta - 1 if a is None else a
    return (a, 1 - beta, 0.0) if first_slot else (a, 1 - beta, 1 - beta)


@dataclass
class HessianWitness:
    holds: bool  # the sampled Hessians were all semi-definite in the requested direction
    worst_ratio: float  # most violating eigenvalue / scale, signed so negative is bad
    counterexample: np.ndarray | None  # first violating point, if any
    samples: int


def monomial(pts: np.ndarray, a: float, b: float, c: float) -> np.ndarray:
    return pts[..., 0] ** a * pts[..., 1] ** b * pts[..., 2] ** c


def fd_hessian(f, pts: np.ndarray, rel_step: float = 2e-3) -> np.ndarray:
    """Central-difference Hessians at ``pts`` (N, 3), Richardson-extrapolated.

    Steps are relative to each coordinate so points near 0.1 and 10 are
    resolved equally well.
    """

    def central(h):
        n, d = pts.shape
        H = np.empty((n, d, d))
        f0 = f(pts)
        step = h * pts
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = 1.0
            hi = step[:, i:i + 1] * ei
            H[:, i, i] = (f(pts + hi) - 2 * f0 + f(pts - hi)) / step[:, i] ** 2
            for j in range(i + 1, d):
                ej = np.zeros(d)
                ej[j] = 1.0
                hj = step[:, j:j + 1] * ej
                val = (f(pts + hi + hj) - f(pts + hi - hj) - f(pts - hi + hj) + f(pts - hi - hj))
                H[:, i, j] = H[:, j, i] = val / (4 * step[:, i] * step[:, j])
        return H

    return (4 * central(rel_step / 2) - central(rel_step)) / 3


def numeric_hessian_witness(a: float, b: float, c: float = 0.0, samples: int = 10_000, rng_seed=0,
                            definiteness: str = "psd", tol: float = 1e-8,
                            low: float = 0.1, high: float = 10.0) -> HessianWitness:
    """Sample points uniformly in [low, high]^3 and test finite-difference Hessians.

    ``definiteness='psd'`` checks convexity (min eigenvalue >= -tol * scale),
    ``'nsd'`` checks concavity (max eigenvalue <= tol * scale). The scale is
    the spectral norm of H, floored at |f| / min(q)^2 so that an affine
    monomial (H = 0) is not judged on differencing noise alone.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if definiteness not in ("psd", "nsd"):
        raise ValueError("definiteness must be 'psd' or 'nsd'")
    rng = np.random.default_rng(rng_seed)
    pts = rng.uniform(low, high, size=(samples, 3))
    H = fd_hessian(lambda q: monomial(q, a, b, c), pts)
    eig = np.linalg.eigvalsh(H)
    floor = np.abs(monomial(pts, a, b, c)) / pts.min(axis=1) ** 2
    norm = np.maximum(np.abs(eig).max(axis=1), floor)
    ratio = eig[:, 0] / norm if definiteness == "psd" else -eig[:, -1] / norm
    bad = np.flatnonzero(ratio < -tol)
    return HessianWitness(
        holds=bad.size == 0,
        worst_ratio=float(ratio.min()),
        counterexample=pts[bad[0]].copy() if bad.size else None,
        samples=samples,
    )
