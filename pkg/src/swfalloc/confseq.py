"""Per-individual anytime-valid confidence sequences and their welfare lift.

The per-individual bands use a sub-Gaussian log-log boundary; monotonicity of
the welfare function alone lifts them to an anytime-valid band on the optimal
welfare: optimizing the lower utility bounds gives a lower welfare bound and
optimizing the upper bounds an upper one.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np

from swfalloc.oracle import Allocation, solve
from swfalloc.welfare import WelfareSpec, eval_welfare


class ConfState:
    """Running per-individual means with anytime-valid confidence bands.

    After ``m`` observations of an individual the band half-width is

        1.7 * sigma * sqrt((log(5.2 * B / delta) + max(0, log log 2m)) / m)

    where ``B = n`` under one-sided budgeting (each individual holds a
    ``1 - delta/n`` bound, enough for optimistic allocation) and ``B = 2n``
    under two-sided budgeting (``delta/(2n)`` per side, used for inference).
    The log-log term is clamped at zero, which only enlarges the radius and
    keeps it decreasing in ``m``.  Successive intervals are intersected, so
    bands shrink monotonically.  A known support interval, when given, is
    intersected as well; with utilities bounded away from zero this keeps
    lower bounds positive, which the allocation oracles require.

    Unobserved individuals carry ``(-inf, +inf)`` sentinel bounds; the lift
    refuses to consume them.

    Parameters
    ----------
    n : int
        Population size.
    delta : float
        Total miscoverage budget in (0, 1), split uniformly across
        individuals.
    sigma : float
        Sub-Gaussian scale of the observations.  1 covers the standard
        assumption; bounded utilities on ``[a, b]`` allow ``(b - a) / 2``.
    two_sided : bool
        Budgeting convention, see above.
    support : (float, float), optional
        Known bounds on every mean; intersected into the bands.
    """

    def __init__(self, n: int, delta: float, sigma: float = 1.0,
                 two_sided: bool = False,
                 support: Optional[Tuple[float, float]] = None):
        if n < 1:
            raise ValueError("need at least one individual")
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if sigma <= 0.0:
            raise ValueError("sigma must be positive")
        self.n = int(n)
        self.delta = float(delta)
        self.sigma = float(sigma)
        self.two_sided = bool(two_sided)
        if support is not None:
            s_lo, s_hi = float(support[0]), float(support[1])
            if not s_lo <= s_hi:
                raise ValueError("support must be an interval")
            support = (s_lo, s_hi)
        self.support = support
        self.count = np.zeros(self.n, dtype=np.int64)
        self.mean = np.zeros(self.n)
        self.lo = np.full(self.n, -np.inf)
        self.hi = np.full(self.n, np.inf)
        boundaries = 2 * self.n if self.two_sided else self.n
        self._log_term = math.log(5.2 * boundaries / self.delta)

    def radius(self, m: int) -> float:
        """Band half-width after m >= 1 observations."""
        if m < 1:
            raise ValueError("radius defined for m >= 1")
        loglog = max(0.0, math.log(math.log(2.0 * m)))
        return 1.7 * self.sigma * math.sqrt((self._log_term + loglog) / m)

    def update(self, i: int, x: float) -> "ConfState":
        """Fold one observed utility for individual i into the state."""
        x = float(x)
        if not math.isfinite(x):
            raise ValueError("observation must be finite")
        m = int(self.count[i]) + 1
        mean = (self.count[i] * self.mean[i] + x) / m
        self.count[i] = m
        self.mean[i] = mean
        r = self.radius(m)
        lo, hi = mean - r, mean + r
        if self.support is not None:
            lo = max(lo, self.support[0])
            hi = min(hi, self.support[1])
        self.lo[i] = max(self.lo[i], lo)
        self.hi[i] = min(self.hi[i], hi)
        return self

    @property
    def initialized(self) -> bool:
        """True once every individual has been observed at least once."""
        return bool(np.all(self.count >= 1))

    def copy(self) -> "ConfState":
        """Snapshot safe to hand to concurrent read-only queries."""
        out = ConfState(self.n, self.delta, self.sigma, self.two_sided,
                        self.support)
        out.count = self.count.copy()
        out.mean = self.mean.copy()
        out.lo = self.lo.copy()
        out.hi = self.hi.copy()
        return out


class LiftedBand(NamedTuple):
    w_lo: float
    w_hi: float
    p_lo: Allocation
    p_hi: Allocation


def lift_cs(spec: WelfareSpec, lo, hi, k: int,
            solver: Optional[Callable] = None) -> LiftedBand:
    """Welfare band on the optimal policy from coordinatewise utility bands.

    ``p_lo`` maximizes welfare under the lower bounds, ``p_hi`` under the
    upper bounds; the returned interval is
    ``[M(lo * p_lo), M(hi * p_hi)]``.  Requires ``0 < lo <= hi``
    coordinatewise, so every individual must have been observed.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("bands carry sentinels: some individual is unobserved")
    if np.any(lo <= 0.0) or np.any(hi < lo):
        raise ValueError("need 0 < lo <= hi coordinatewise")
    solver = solver or solve
    p_lo = solver(spec, lo, k)
    p_hi = solver(spec, hi, k)
    return LiftedBand(
        eval_welfare(spec, lo * p_lo.p),
        eval_welfare(spec, hi * p_hi.p),
        p_lo,
        p_hi,
    )


def lift_state(spec: WelfareSpec, state: ConfState, k: int,
               solver: Optional[Callable] = None) -> LiftedBand:
    """Lift the current bands of a confidence state."""
    if not state.initialized:
        raise ValueError("bands carry sentinels: some individual is unobserved")
    return lift_cs(spec, state.lo, state.hi, k, solver)


def fixed_policy_cs(spec: WelfareSpec, lo, hi, p) -> Tuple[float, float]:
    """Welfare band for a fixed, known policy: (M(lo * p), M(hi * p))."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("bands carry sentinels: some individual is unobserved")
    if np.any(lo <= 0.0) or np.any(hi < lo):
        raise ValueError("need 0 < lo <= hi coordinatewise")
    pv = p.p if isinstance(p, Allocation) else np.asarray(p, dtype=float)
    return eval_welfare(spec, lo * pv), eval_welfare(spec, hi * pv)
