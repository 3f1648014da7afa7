"""Exact allocation maximizers for each welfare family.

Every solver maximizes ``M(u * p)`` over the box-capped simplex
``P_k = {p in [0,1]^n : sum(p) = k}``:

* WPM: multiplicative water-filling ``p_i = clip(lam * r_i, 0, 1)`` with
  per-coordinate fill rates ``r_i`` and the scalar ``lam`` located exactly by
  walking sorted saturation breakpoints (O(n log n));
* Kolm: additive water-filling in the shift parameter ``eta``,
  ``p_i = clip((eta + log(w_i u_i)) / (|q| u_i), 0, 1)``, swept over the 2n
  event times at which coordinates activate or saturate;
* Gini: greedy block filling of the parametric LP over allocations ordered
  by non-decreasing utility, choosing at each stage the block suffix with
  the highest objective rate (O(kn));
* a projected-subgradient reference solver, kept independent of the closed
  forms, for differential testing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from swfalloc.welfare import NEG_INF, Family, WelfareSpec, eval_welfare

_SUM_TOL = 1e-9
_SAT_TOL = 1e-12


class ReferenceConvergenceWarning(UserWarning):
    """The reference solver was still improving near its iteration cap."""


@dataclass(frozen=True)
class Allocation:
    """Marginal allocation probabilities summing to the resource count k."""

    p: np.ndarray
    k: int

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        k = int(self.k)
        object.__setattr__(self, "k", k)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("allocation must be a nonempty 1-d vector")
        if not 1 <= k <= p.size:
            raise ValueError(f"need 1 <= k <= n, got k={k}, n={p.size}")
        if np.any(p < -_SUM_TOL) or np.any(p > 1.0 + _SUM_TOL):
            raise ValueError("allocation entries must lie in [0, 1]")
        if abs(p.sum() - k) > _SUM_TOL:
            raise ValueError(f"allocation mass {p.sum()!r} != k={k}")

    @property
    def n(self) -> int:
        return int(self.p.size)


def _check_problem(u, w, k) -> tuple[np.ndarray, np.ndarray, int]:
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.ndim != 1 or u.shape != w.shape:
        raise ValueError("utilities and weights must be 1-d vectors of equal length")
    if not np.all(np.isfinite(u)) or np.any(u <= 0.0):
        raise ValueError("utilities must be finite and strictly positive")
    k = int(k)
    if not 1 <= k <= u.size:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={u.size}")
    return u, w, k


def _check_power(family: Family, w: np.ndarray, q) -> float:
    """Family parameter validation without rebuilding a WelfareSpec per call."""
    if q is None:
        raise ValueError(f"{family.value} requires a power parameter")
    q = float(q)
    if math.isnan(q) or q == math.inf:
        raise ValueError("power parameter must be -inf or a finite real")
    limit = 1.0 if family is Family.WPM else 0.0
    if q > limit:
        raise ValueError(f"{family.value} power must not exceed {limit}")
    if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be a probability vector")
    if q <= 0.0 and np.any(w <= 0.0):
        raise ValueError("weights must be strictly positive for q <= 0")
    return q


def _check_gini_weights(w: np.ndarray) -> None:
    if np.any(w < 0.0) or np.any(w > 1.0) or np.any(np.diff(w) > 1e-12):
        raise ValueError("Gini weights must be non-increasing within [0, 1]")


def _finalize(p: np.ndarray, k: int) -> np.ndarray:
    """Clamp to [0,1] and fold the residual mass onto unsaturated entries."""
    p = np.clip(p, 0.0, 1.0)
    resid = k - p.sum()
    if abs(resid) > 1e-15:
        if resid > 0:
            room = np.flatnonzero(p < 1.0 - _SAT_TOL)
        else:
            room = np.flatnonzero(p > _SAT_TOL)
        if room.size:
            p[room] += resid / room.size
            p = np.clip(p, 0.0, 1.0)
    return p


def _top_k(score: np.ndarray, k: int) -> np.ndarray:
    """0/1 vector selecting the k largest scores; ties go to lower indices."""
    order = np.argsort(-score, kind="stable")
    p = np.zeros(score.size)
    p[order[:k]] = 1.0
    return p


def _waterfill_multiplicative(rates: np.ndarray, k: int) -> np.ndarray:
    """Solve sum_i min(1, lam * r_i) = k exactly and return the clipped fill.

    Walks saturation times 1/r_i in increasing order; mass held by
    unsaturated coordinates is linear in lam, so the crossing segment gives
    lam in closed form.  Zero-rate coordinates receive mass (in index order)
    only if every positive-rate coordinate saturates first.
    """
    n = rates.size
    p = np.zeros(n)
    pos = np.flatnonzero(rates > 0.0)
    rem = float(k)
    if pos.size:
        order = pos[np.argsort(-rates[pos], kind="stable")]
        r = rates[order]
        suffix = np.cumsum(r[::-1])[::-1]
        done = False
        for j in range(order.size):
            if suffix[j] / r[j] > rem:
                lam = rem / suffix[j]
                p[order[j:]] = lam * r[j:]
                rem = 0.0
                done = True
                break
            p[order[j]] = 1.0
            rem -= 1.0
        if not done and rem <= 1e-12:
            rem = 0.0
    if rem > 1e-12:
        # only reachable with zero-rate coordinates present and k large
        for i in np.flatnonzero(rates <= 0.0):
            fill = min(1.0, rem)
            p[i] = fill
            rem -= fill
            if rem <= 1e-12:
                break
    return p


def solve_wpm(u, w, q, k) -> Allocation:
    """Exact maximizer of weighted-power-mean welfare over P_k.

    Interior coordinates satisfy ``p_i = lam * (w_i u_i^q)^(1/(1-q))``;
    ``q = 1`` selects the k largest ``w_i u_i`` (ties to the lowest index),
    ``q = 0`` fills at rates ``w_i`` and ``q = -inf`` at rates ``1/u_i``.
    """
    u, w, k = _check_problem(u, w, k)
    q = _check_power(Family.WPM, w, q)
    n = u.size
    if k == n:
        return Allocation(np.ones(n), k)
    if q == 1.0:
        return Allocation(_top_k(w * u, k), k)
    if q == NEG_INF:
        rates = 1.0 / u
    elif q == 0.0:
        rates = w.copy()
    else:
        with np.errstate(divide="ignore"):
            log_rates = (np.log(w) + q * np.log(u)) / (1.0 - q)
        finite = np.isfinite(log_rates)
        rates = np.zeros(n)
        if finite.any():
            shifted = log_rates[finite] - log_rates[finite].max()
            rates[finite] = np.exp(shifted)
    return Allocation(_finalize(_waterfill_multiplicative(rates, k), k), k)


def solve_kolm(u, w, q, k) -> Allocation:
    """Exact maximizer of Kolm welfare over P_k.

    The shift ``eta`` is additive, so both box constraints can be active:
    coordinate i turns on at ``eta = -log(w_i u_i)`` and saturates at
    ``eta = |q| u_i - log(w_i u_i)``.  Sweeping the sorted 2n event times
    while tracking the active fill rate locates ``eta`` exactly.
    """
    u, w, k = _check_problem(u, w, k)
    q = _check_power(Family.KOLM, w, q)
    n = u.size
    if k == n:
        return Allocation(np.ones(n), k)
    if q == 0.0:
        return Allocation(_top_k(w * u, k), k)
    if q == NEG_INF:
        return Allocation(
            _finalize(_waterfill_multiplicative(1.0 / u, k), k), k)
    aq = -q
    c = 1.0 / (aq * u)
    start = -np.log(w * u)
    end = start + aq * u
    times = np.concatenate([start, end])
    deltas = np.concatenate([c, -c])
    order = np.argsort(times, kind="stable")
    mass = 0.0
    rate = 0.0
    eta_prev = times[order[0]]
    eta = None
    for idx in order:
        tau = times[idx]
        seg = tau - eta_prev
        if rate > 0.0 and mass + rate * seg >= k:
            eta = eta_prev + (k - mass) / rate
            break
        mass += rate * seg
        rate += deltas[idx]
        eta_prev = tau
    if eta is None:
        eta = eta_prev
    p = np.clip((eta - start) * c, 0.0, 1.0)
    return Allocation(_finalize(p, k), k)


def _gini_best_suffix(w, inv, lo, hi, whole_block):
    """Best (rate, start) suffix of the block [lo, hi); longest wins ties."""
    wsum = 0.0
    isum = 0.0
    best_rate = -math.inf
    best_s = lo
    for s in range(hi - 1, lo - 1, -1):
        wsum += w[s]
        isum += inv[s]
        if whole_block and s > lo:
            continue
        rate = wsum / isum
        if rate >= best_rate:
            best_rate = rate
            best_s = s
    return best_rate, best_s


def _solve_gini(u, w, k, whole_block=False) -> Allocation:
    u, w, k = _check_problem(u, w, k)
    _check_gini_weights(w)
    n = u.size
    if k == n:
        return Allocation(np.ones(n), k)
    order = np.argsort(u, kind="stable")
    us = u[order]
    inv = 1.0 / us
    p_sorted = np.zeros(n)
    regions: list[tuple[int, int]] = [(0, n)]
    rem = float(k)
    while rem > 1e-15 and regions:
        best = None
        for ridx, (lo, hi) in enumerate(regions):
            rate, s = _gini_best_suffix(w, inv, lo, hi, whole_block)
            if best is None or rate > best[0]:
                best = (rate, ridx, s)
        _, ridx, s = best
        lo, hi = regions[ridx]
        # all coordinates of a region share a common value u_(i) p_(i)
        value = us[lo] * p_sorted[lo]
        isum = inv[s:hi].sum()
        dv_sat = us[s] - value
        mass_sat = dv_sat * isum
        if mass_sat <= rem:
            p_sorted[s:hi] += dv_sat * inv[s:hi]
            p_sorted[s] = 1.0
            rem -= mass_sat
            new = [(lo, s), (s + 1, hi)]
            regions[ridx: ridx + 1] = [(a, b) for a, b in new if a < b]
        else:
            p_sorted[s:hi] += (rem / isum) * inv[s:hi]
            rem = 0.0
    p = np.zeros(n)
    p[order] = p_sorted
    return Allocation(_finalize(p, k), k)


def solve_gini(u, w, k) -> Allocation:
    """Exact maximizer of Gini welfare over P_k.

    Individuals are sorted by non-decreasing utility (stable, minimizing
    inversions on ties); the output keeps ``u_(i-1) p_(i-1) <= u_(i) p_(i)``.
    At each stage the suffix of an unsaturated block with the highest
    objective rate ``sum(w_i) / sum(1/u_i)`` is filled at probability rates
    proportional to ``1/u_i`` until its leftmost coordinate saturates or the
    mass budget runs out.
    """
    return _solve_gini(u, w, k, whole_block=False)


def solve(spec: WelfareSpec, u, k) -> Allocation:
    """Dispatch to the family-specific exact solver."""
    if spec.family is Family.WPM:
        return solve_wpm(u, spec.w, spec.q, k)
    if spec.family is Family.KOLM:
        return solve_kolm(u, spec.w, spec.q, k)
    return solve_gini(u, spec.w, k)


def project_capped_simplex(y, k) -> np.ndarray:
    """Euclidean projection onto {p in [0,1]^n : sum(p) = k}.

    The projection is ``clip(y - theta, 0, 1)`` where
    ``g(theta) = sum(clip(y - theta, 0, 1))`` is piecewise linear and
    non-increasing; theta is found exactly by bracketing over the 2n
    breakpoints ``{y_i - 1, y_i}`` and interpolating on the crossing segment.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    k = float(k)
    if not 0.0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if k == n:
        return np.ones(n)
    if k == 0.0:
        return np.zeros(n)
    bps = np.sort(np.concatenate([y - 1.0, y]))

    def g(theta):
        return float(np.clip(y - theta, 0.0, 1.0).sum())

    lo_i, hi_i = 0, bps.size - 1
    # g(bps[0]) = n >= k, g(bps[-1]) = 0 <= k
    while hi_i - lo_i > 1:
        mid = (lo_i + hi_i) // 2
        if g(bps[mid]) >= k:
            lo_i = mid
        else:
            hi_i = mid
    g_lo, g_hi = g(bps[lo_i]), g(bps[hi_i])
    if g_lo == g_hi:
        theta = bps[lo_i]
    else:
        theta = bps[lo_i] + (k - g_lo) * (bps[hi_i] - bps[lo_i]) / (g_hi - g_lo)
    return np.clip(y - theta, 0.0, 1.0)


def _policy_value(spec: WelfareSpec, u: np.ndarray, p: np.ndarray) -> float:
    """Objective for the reference solver; floors p away from zero where the
    WPM branches are undefined (the floored value differs by O(1e-12))."""
    if spec.family is Family.WPM and spec.q <= 0.0:
        p = np.maximum(p, 1e-12)
    return eval_welfare(spec, u * p)


def _policy_subgradient(spec: WelfareSpec, u: np.ndarray, p: np.ndarray) -> np.ndarray:
    """A supergradient of p -> M(u * p) (exact where differentiable)."""
    n = u.size
    w = spec.w
    v = u * p
    if spec.family is Family.GINI:
        order = np.argsort(v, kind="stable")
        g = np.zeros(n)
        g[order] = w * u[order]
        return g
    q = spec.q
    if q == NEG_INF:
        g = np.zeros(n)
        i = int(np.argmin(v))
        g[i] = u[i]
        return g
    if spec.family is Family.KOLM:
        if q == 0.0:
            return w * u
        z = np.log(w) + q * v
        z -= z.max()
        soft = np.exp(z)
        return u * soft / soft.sum()
    pc = np.maximum(p, 1e-12)
    m = _policy_value(spec, u, p)
    if q == 0.0:
        return m * w / pc
    if q == 1.0:
        return w * u
    if m <= 0.0:
        # corner where only zero-weight coordinates carry mass (q in (0,1))
        return w * u
    with np.errstate(divide="ignore"):
        logg = (1.0 - q) * math.log(m) + np.log(w) + q * np.log(u) \
            + (q - 1.0) * np.log(pc)
    return np.exp(np.minimum(logg, 700.0))


def solve_reference(spec: WelfareSpec, u, k, iters: int = 5000,
                    tol: float = 1e-6) -> Allocation:
    """Projected supergradient ascent over P_k, for differential testing.

    Diminishing 1/sqrt(t) steps for the first 40% of the budget, then a
    geometric decay driving the step to ~1e-9 of its warm value; the best
    iterate is returned.  Independent of the closed-form solvers.  Emits
    ``ReferenceConvergenceWarning`` if the objective was still improving by
    more than ``tol`` over the final 10% of iterations.
    """
    u, _, k = _check_problem(u, spec.w, k)
    n = u.size
    p = np.full(n, k / n)
    best_p = p.copy()
    best_f = _policy_value(spec, u, p)
    warm = max(int(0.4 * iters), 1)
    alpha0 = 0.5
    alpha_warm = alpha0 / math.sqrt(warm)
    decay = (1e-9) ** (1.0 / max(iters - warm, 1))
    checkpoint = max(iters - max(iters // 10, 1), 1)
    f_at_checkpoint = None
    for t in range(1, iters + 1):
        g = _policy_subgradient(spec, u, p)
        norm = np.linalg.norm(g)
        if norm > 0.0:
            step = alpha0 / math.sqrt(t) if t <= warm \
                else alpha_warm * decay ** (t - warm)
            p = project_capped_simplex(p + step * (g / norm), k)
            f = _policy_value(spec, u, p)
            if f > best_f:
                best_f = f
                best_p = p.copy()
        if t == checkpoint:
            f_at_checkpoint = best_f
    if f_at_checkpoint is not None and best_f - f_at_checkpoint > tol:
        warnings.warn(
            f"reference solver still improving ({best_f - f_at_checkpoint:.3e} "
            f"over the last 10% of {iters} iterations)",
            ReferenceConvergenceWarning,
        )
    return Allocation(_finalize(best_p, k), k)


def interior_multiplier_spread(spec: WelfareSpec, u, alloc: Allocation,
                               margin: float = 1e-7) -> float:
    """Relative spread of dM/dp_i across interior coordinates.

    At an exact optimum of a differentiable family the partial derivatives
    agree on every coordinate with 0 < p_i < 1 (the common stationarity
    multiplier), so this should be at float-noise level.  Only defined for
    WPM/Kolm with finite q.
    """
    if spec.family is Family.GINI or spec.q == NEG_INF:
        raise ValueError("multiplier spread needs a differentiable family")
    u = np.asarray(u, dtype=float)
    p = alloc.p
    interior = (p > margin) & (p < 1.0 - margin)
    if interior.sum() < 2:
        return 0.0
    g = _policy_subgradient(spec, u, p)[interior]
    return float((g.max() - g.min()) / max(np.abs(g).max(), 1e-300))
