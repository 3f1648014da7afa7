"""Social welfare functions over nonnegative utility vectors.

Three families are supported, each monotone and concave on the nonnegative
orthant:

* weighted power mean (WPM), power ``q`` in ``(-inf, 1]`` or ``-inf``,
  covering egalitarian (min, ``q = -inf``), Nash (weighted geometric mean,
  ``q = 0``) and utilitarian (weighted sum, ``q = 1``) welfare;
* Kolm, power ``q`` in ``(-inf, 0]`` or ``-inf``, with a log-sum-exp form
  for finite negative ``q``;
* Gini, a rank-weighted sum with non-increasing weights in ``[0, 1]``.

``q = -inf`` and ``q = 0`` are exact branches, never numerical limits of the
general formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

NEG_INF = float("-inf")


def _logsumexp(x: np.ndarray) -> float:
    # scipy's logsumexp carries too much dispatch overhead for tiny vectors
    m = x.max()
    if m == -np.inf:
        return -np.inf
    return float(m + math.log(np.exp(x - m).sum()))


class Family(str, Enum):
    """Welfare family tag."""

    WPM = "wpm"
    KOLM = "kolm"
    GINI = "gini"


def _as_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty 1-d vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    return w


@dataclass(frozen=True)
class WelfareSpec:
    """A welfare family together with its weight vector and power parameter.

    Family-specific invariants, checked on construction:

    * WPM: ``w`` on the probability simplex, ``q <= 1`` (``-inf`` allowed);
    * Kolm: ``w`` on the probability simplex, ``q <= 0`` (``-inf`` allowed);
    * Gini: ``w`` non-increasing with entries in ``[0, 1]``, no ``q``;
    * WPM/Kolm with ``q <= 0``: strictly positive weights (the allocation
      oracles take ``log w_i``; zero weights are Gini-only).
    """

    family: Family
    w: np.ndarray
    q: float | None = None

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        w = _as_weights(self.w)
        object.__setattr__(self, "w", w)
        if family is Family.GINI:
            if self.q is not None:
                raise ValueError("Gini takes no power parameter")
            if np.any(w < 0.0) or np.any(w > 1.0):
                raise ValueError("Gini weights must lie in [0, 1]")
            if np.any(np.diff(w) > 1e-12):
                raise ValueError("Gini weights must be non-increasing")
            return
        if self.q is None:
            raise ValueError(f"{family.value} requires a power parameter")
        q = float(self.q)
        object.__setattr__(self, "q", q)
        if math.isnan(q) or q == math.inf:
            raise ValueError("power parameter must be -inf or a finite real")
        if family is Family.WPM and q > 1.0:
            raise ValueError("WPM power must lie in (-inf, 1] or be -inf")
        if family is Family.KOLM and q > 0.0:
            raise ValueError("Kolm power must lie in (-inf, 0] or be -inf")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("WPM/Kolm weights must sum to 1")
        if q <= 0.0 and np.any(w <= 0.0):
            raise ValueError("weights must be strictly positive for q <= 0")

    @property
    def n(self) -> int:
        return int(self.w.size)

    @classmethod
    def egalitarian(cls, n: int) -> "WelfareSpec":
        """Min-utility welfare: WPM with ``q = -inf`` and uniform weights."""
        return cls(Family.WPM, np.full(n, 1.0 / n), NEG_INF)

    @classmethod
    def utilitarian(cls, n: int) -> "WelfareSpec":
        """Weighted-sum welfare with uniform weights: WPM with ``q = 1``."""
        return cls(Family.WPM, np.full(n, 1.0 / n), 1.0)


def _check_vector(spec: WelfareSpec, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != spec.w.shape:
        raise ValueError(f"utility vector has length {v.size}, expected {spec.n}")
    if not np.all(np.isfinite(v)):
        raise ValueError("utilities must be finite")
    if np.any(v < 0.0):
        raise ValueError("utilities must be nonnegative")
    if spec.family is Family.WPM and spec.q <= 0.0 and np.any(v <= 0.0):
        raise ValueError("WPM with q <= 0 requires strictly positive utilities")
    return v


def eval_welfare(spec: WelfareSpec, v) -> float:
    """Evaluate the welfare of a nonnegative utility vector.

    Gini sorts ``v`` ascending and pairs it with the weights in the given
    (non-increasing) order.  WPM with finite ``q`` not in ``{0, 1}`` is
    evaluated in log space for numerical stability.
    """
    v = _check_vector(spec, v)
    w = spec.w
    if spec.family is Family.GINI:
        return float(np.sort(v) @ w)
    q = spec.q
    if q == NEG_INF:
        return float(v.min())
    if spec.family is Family.WPM:
        if q == 0.0:
            return float(math.exp(np.dot(w, np.log(v))))
        if q == 1.0:
            return float(np.dot(w, v))
        mask = (w > 0.0) & (v > 0.0)
        if not mask.any():
            return 0.0
        lse = _logsumexp(q * np.log(v[mask]) + np.log(w[mask]))
        return float(math.exp(lse / q))
    if q == 0.0:
        return float(np.dot(w, v))
    return _logsumexp(q * v + np.log(w)) / q


def lipschitz_bound(spec: WelfareSpec, v_min: float | None = None,
                    v_max: float | None = None) -> float:
    """Lipschitz constant of the welfare w.r.t. the sup norm.

    WPM needs the utility range ``0 < v_min <= v_max`` (bound
    ``v_max / v_min``); Kolm is 1-Lipschitz and Gini ``sum(w)``-Lipschitz
    with no range inputs.
    """
    if spec.family is Family.KOLM:
        return 1.0
    if spec.family is Family.GINI:
        return float(spec.w.sum())
    if v_min is None or v_max is None:
        raise ValueError("WPM Lipschitz bound needs v_min and v_max")
    if not 0.0 < v_min <= v_max:
        raise ValueError("require 0 < v_min <= v_max")
    return float(v_max / v_min)
