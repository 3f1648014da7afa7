"""Anytime-valid decision procedures built on lifted welfare bands.

All procedures are pure functions of confidence-state snapshots; their
validity is inherited from the time-uniform coverage of the underlying
per-individual bands.  The stateful wrappers only record the first decision,
which is absorbing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Tuple

import numpy as np

from swfalloc.confseq import ConfState, fixed_policy_cs, lift_state
from swfalloc.oracle import Allocation
from swfalloc.welfare import WelfareSpec

Direction = Literal["exceeds", "below"]


@dataclass(frozen=True)
class TestSpec:
    """One-sided welfare threshold test.

    ``policy=None`` targets the optimal policy's welfare (the band is lifted
    through the allocation oracle); otherwise the fixed policy's welfare.
    ``direction="exceeds"`` rejects the null ``welfare < threshold`` once the
    lower welfare bound clears the threshold; ``"below"`` mirrors it with the
    upper bound.
    """

    __test__ = False  # not a pytest class despite the name

    threshold: float
    direction: Direction = "exceeds"
    policy: Optional[np.ndarray] = None
    delta: float = 0.1

    def __post_init__(self):
        if self.direction not in ("exceeds", "below"):
            raise ValueError("direction must be 'exceeds' or 'below'")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.policy is not None:
            object.__setattr__(self, "policy",
                               np.asarray(self.policy, dtype=float))


def check_coverage_floor(policy, gamma: float) -> None:
    """Raise if any allocation marginal falls below the coverage floor."""
    p = policy.p if isinstance(policy, Allocation) else np.asarray(policy, float)
    if gamma > 0.0 and np.any(p < gamma):
        worst = int(np.argmin(p))
        raise ValueError(
            f"marginal {p[worst]:.3g} of individual {worst} is below the "
            f"coverage floor gamma={gamma:.3g}")


def _band(test: TestSpec, state: ConfState, spec: WelfareSpec,
          k: int) -> Tuple[float, float]:
    if test.policy is None:
        lifted = lift_state(spec, state, k)
        return lifted.w_lo, lifted.w_hi
    return fixed_policy_cs(spec, state.lo, state.hi, test.policy)


class SequentialTest:
    """Threshold test that rejects the null the first time the relevant
    welfare bound crosses it; the verdict is absorbing."""

    def __init__(self, test: TestSpec, spec: WelfareSpec, k: int):
        self.test = test
        self.spec = spec
        self.k = k
        self.rejected_at: Optional[int] = None

    def observe(self, state: ConfState, t: int) -> str:
        """Returns "reject" or "continue" for the snapshot at time t."""
        if self.rejected_at is not None:
            return "reject"
        w_lo, w_hi = _band(self.test, state, self.spec, self.k)
        if self.test.direction == "exceeds":
            hit = w_lo > self.test.threshold
        else:
            hit = w_hi < self.test.threshold
        if hit:
            self.rejected_at = t
            return "reject"
        return "continue"


class OptimalStopper:
    """Stop as soon as the lower welfare bound clears the target and hand
    back the policy optimized on the lower utility bounds.  On the coverage
    event the deployed policy's true welfare exceeds the target, so the
    guarantee holds with probability at least 1 - delta."""

    def __init__(self, spec: WelfareSpec, k: int, threshold: float,
                 delta: float = 0.1):
        self.spec = spec
        self.k = k
        self.threshold = threshold
        self.delta = delta
        self.stopped_at: Optional[int] = None
        self.deployed: Optional[Allocation] = None

    def observe(self, state: ConfState, t: int):
        """Returns (tau, deployed policy) once stopped, else None."""
        if self.stopped_at is not None:
            return self.stopped_at, self.deployed
        lifted = lift_state(self.spec, state, self.k)
        if lifted.w_lo > self.threshold:
            self.stopped_at = t
            self.deployed = lifted.p_lo
            return self.stopped_at, self.deployed
        return None


def compare_policies(p1, p2, state: ConfState, spec: WelfareSpec) -> str:
    """'prefer1' when p1's lower welfare bound clears p2's upper bound,
    symmetrically 'prefer2', else 'undecided'.  Pure snapshot query."""
    l1, u1 = fixed_policy_cs(spec, state.lo, state.hi, p1)
    l2, u2 = fixed_policy_cs(spec, state.lo, state.hi, p2)
    if l1 > u2:
        return "prefer1"
    if l2 > u1:
        return "prefer2"
    return "undecided"


@dataclass
class ComparisonDecision:
    verdict: str
    time: int
    delta: float
    per_band_delta: float


class PolicyComparison:
    """Sticky two-policy comparison.

    Each policy's welfare band consumes delta/2 of the budget, so a
    preference is wrong with probability at most delta; the split is
    recorded in the decision."""

    def __init__(self, p1, p2, spec: WelfareSpec, delta: float = 0.1):
        self.p1 = np.asarray(p1.p if isinstance(p1, Allocation) else p1, float)
        self.p2 = np.asarray(p2.p if isinstance(p2, Allocation) else p2, float)
        self.spec = spec
        self.delta = delta
        self.decision: Optional[ComparisonDecision] = None

    def observe(self, state: ConfState, t: int) -> str:
        if self.decision is not None:
            return self.decision.verdict
        verdict = compare_policies(self.p1, self.p2, state, self.spec)
        if verdict != "undecided":
            self.decision = ComparisonDecision(
                verdict=verdict, time=t, delta=self.delta,
                per_band_delta=self.delta / 2.0)
        return verdict
