"""Fixed-size random set sampling whose marginals match a policy vector.

Pairwise dependent rounding: repeatedly move probability mass between the two
leftmost fractional coordinates until at most one remains fractional.  Every
step preserves both touched coordinates' expectations and makes at least one
of them integral, so the loop runs at most n - 1 times and the returned set
always has exactly k members.
"""

from __future__ import annotations

import numpy as np

_INT_TOL = 1e-9


def _is_frac(x: float) -> bool:
    return abs(x - round(x)) > _INT_TOL


def _round_pair(a: float, b: float, r: float) -> tuple[float, float]:
    """One pairwise step driven by a uniform draw r in [0, 1)."""
    s = a + b
    if s <= 1.0:
        return (0.0, s) if r < b / s else (s, 0.0)
    t = s - 1.0
    return (1.0, t) if r < (1.0 - b) / (2.0 - s) else (t, 1.0)


def dependent_round(pi, rng: np.random.Generator) -> np.ndarray:
    """Sample indices S with |S| = sum(pi) exactly and P(i in S) = pi_i.

    ``pi`` must lie in [0, 1] with an integer sum (tolerance 1e-9).  Entries
    within 1e-9 of an integer are snapped before sampling and the residual is
    folded into one fractional partner to keep the sum integral.  All
    randomness comes from the generator handle, so draws are reproducible
    under a fixed seed.
    """
    work = np.asarray(pi, dtype=float).tolist()
    if not work:
        raise ValueError("marginals must be a nonempty 1-d vector")
    total = 0.0
    idxs = []
    for i, x in enumerate(work):
        if x < -_INT_TOL or x > 1.0 + _INT_TOL:
            raise ValueError("marginals must lie in [0, 1]")
        total += x
        snapped = round(x)
        if abs(x - snapped) > _INT_TOL:
            idxs.append(i)
        else:
            work[i] = snapped
    k = round(total)
    if abs(total - k) > _INT_TOL or k < 0:
        raise ValueError(f"marginals must sum to an integer, got {total!r}")

    if idxs:
        residual = k - sum(work)
        if residual != 0.0:
            j = idxs[0]
            work[j] = min(1.0, max(0.0, work[j] + residual))

    if len(idxs) >= 2:
        draws = rng.random(len(idxs) - 1)
        d = 0
        while len(idxs) >= 2:
            i, j = idxs[0], idxs[1]
            a, b = _round_pair(work[i], work[j], draws[d])
            d += 1
            work[i] = a
            work[j] = b
            keep = []
            if abs(a - round(a)) > _INT_TOL:
                keep.append(i)
            if abs(b - round(b)) > _INT_TOL:
                keep.append(j)
            idxs = keep + idxs[2:]

    out = np.array([i for i, x in enumerate(work) if x > 0.5], dtype=np.intp)
    if out.size != k:
        raise RuntimeError(
            f"rounding produced {out.size} selections for k={k}; "
            "input marginals are likely inconsistent")
    return out
