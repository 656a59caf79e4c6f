"""beta-proportional fairness utility."""

from __future__ import annotations

import numpy as np


def psi(rate, beta: float):
    """r^(1-beta) / (1-beta); beta = 1 gives log(r).

    Negative for beta > 1. Zero rates map to -inf when beta >= 1.
    """
    r = np.asarray(rate, dtype=float)
    with np.errstate(divide="ignore"):
        if beta == 1:
            out = np.log(r)
        elif beta > 1:
            out = np.where(r > 0, -1.0 / ((beta - 1.0) * np.where(r > 0, r, 1.0) ** (beta - 1.0)), -np.inf)
        else:
            out = r ** (1.0 - beta) / (1.0 - beta)
    return float(out) if out.ndim == 0 else out
