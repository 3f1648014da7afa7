"""Optimistic allocation loop, simulated utility environment, regret traces.

Each round: optimize the policy on the upper confidence bounds (after an
initial round-robin phase that observes every individual at least once),
sample a realized set of k recipients by dependent rounding, observe their
utilities and update the per-individual bands.  Regret is accounted ex ante
against the optimal policy under the true means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from swfalloc.confseq import ConfState
from swfalloc.oracle import solve
from swfalloc.rounding import dependent_round
from swfalloc.welfare import Family, WelfareSpec, eval_welfare


@dataclass
class UtilityModel:
    """Beta-distributed utilities rescaled to [floor, floor + scale]."""

    alpha: np.ndarray
    beta: np.ndarray
    floor: float = 0.1
    scale: float = 0.9

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        if a.ndim != 1 or a.shape != b.shape or a.size == 0:
            raise ValueError("alpha and beta must be 1-d vectors of equal length")
        if np.any(a <= 0.0) or np.any(b <= 0.0):
            raise ValueError("Beta parameters must be positive")
        if self.floor < 0.0 or self.scale <= 0.0:
            raise ValueError("need floor >= 0 and scale > 0")
        self.alpha = a
        self.beta = b

    @property
    def n(self) -> int:
        return int(self.alpha.size)

    def means(self) -> np.ndarray:
        return self.floor + self.scale * self.alpha / (self.alpha + self.beta)

    def support(self) -> tuple[float, float]:
        return (self.floor, self.floor + self.scale)

    def sample(self, idx, rng: np.random.Generator) -> np.ndarray:
        idx = np.asarray(idx, dtype=int)
        return self.floor + self.scale * rng.beta(self.alpha[idx], self.beta[idx])

    @classmethod
    def random(cls, n: int, rng: np.random.Generator,
               alpha_range=(0.5, 5.0), beta_range=(0.5, 5.0),
               floor: float = 0.1, scale: float = 0.9) -> "UtilityModel":
        """Instance with Beta parameters drawn uniformly from the ranges."""
        a = rng.uniform(alpha_range[0], alpha_range[1], size=n)
        b = rng.uniform(beta_range[0], beta_range[1], size=n)
        return cls(a, b, floor=floor, scale=scale)


def forced_rounds(n: int, k: int) -> int:
    return math.ceil(n / k)


def forced_exploration_set(t: int, n: int, k: int) -> np.ndarray:
    """Round-robin cover for rounds t = 1..ceil(n/k): k distinct indices,
    advancing cyclically so every individual is observed at least once."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    if not 1 <= t <= forced_rounds(n, k):
        raise ValueError(f"forced phase covers t = 1..{forced_rounds(n, k)}")
    start = ((t - 1) * k) % n
    return (start + np.arange(k)) % n


def policy_welfare(spec: WelfareSpec, mu, p) -> float:
    """Welfare of ``mu * p``.

    The 0/1 exploration-round policies zero out coordinates, where the
    WPM branches with q <= 0 take their continuous-limit value 0.
    """
    v = np.asarray(mu, dtype=float) * np.asarray(p, dtype=float)
    if spec.family is Family.WPM and spec.q <= 0.0 and np.any(v <= 0.0):
        return 0.0
    return eval_welfare(spec, v)


@dataclass
class BanditState:
    conf: ConfState
    t: int = 0
    regret_cum: float = 0.0
    policy: Optional[np.ndarray] = None


@dataclass
class StepRecord:
    t: int
    policy: np.ndarray
    chosen: np.ndarray
    welfare_t: float
    regret_inst: float
    w_lo: float = math.nan
    w_hi: float = math.nan


def step(state: BanditState, spec: WelfareSpec, env: UtilityModel, k: int,
         rng: np.random.Generator, welfare_opt: Optional[float] = None,
         mu: Optional[np.ndarray] = None,
         track_bounds: bool = False) -> StepRecord:
    """Advance the loop one round.

    Rounds up to ceil(n/k) use the deterministic exploration cover (their
    0/1 vector is the accounted policy); afterwards the policy maximizes
    welfare under the upper bounds and the recipient set is sampled to match
    its marginals.  Only recipients' bands are updated.
    """
    n = env.n
    t = state.t + 1
    w_lo = w_hi = math.nan
    if t <= forced_rounds(n, k):
        chosen = forced_exploration_set(t, n, k)
        policy = np.zeros(n)
        policy[chosen] = 1.0
    else:
        policy = solve(spec, state.conf.hi, k).p
        chosen = dependent_round(policy, rng)
        if track_bounds:
            w_hi = eval_welfare(spec, state.conf.hi * policy)
            if np.all(state.conf.lo > 0.0):
                # the lower lift needs positive bounds; without a known
                # support floor they stay negative for an initial stretch
                p_lo = solve(spec, state.conf.lo, k)
                w_lo = eval_welfare(spec, state.conf.lo * p_lo.p)
    obs = env.sample(chosen, rng)
    for i, x in zip(chosen, obs):
        state.conf.update(int(i), float(x))
    if mu is None:
        mu = env.means()
    if welfare_opt is None:
        welfare_opt = eval_welfare(spec, mu * solve(spec, mu, k).p)
    welfare_t = policy_welfare(spec, mu, policy)
    regret_inst = welfare_opt - welfare_t
    state.t = t
    state.regret_cum += regret_inst
    state.policy = policy
    return StepRecord(t, policy, chosen, welfare_t, regret_inst, w_lo, w_hi)


@dataclass
class RegretTrace:
    """Per-step record of one run; cumulative regret is the prefix sum of
    the instantaneous column.  Policies are snapshotted every
    ``snapshot_every`` steps to bound size."""

    seed: int
    t: np.ndarray
    regret_inst: np.ndarray
    regret_cum: np.ndarray
    welfare_opt: float
    welfare_t: np.ndarray
    w_lo: np.ndarray
    w_hi: np.ndarray
    policies: Dict[int, np.ndarray] = field(default_factory=dict)

    def final_regret(self) -> float:
        return float(self.regret_cum[-1]) if self.regret_cum.size else 0.0


def run_bandit(spec: WelfareSpec, env: UtilityModel, k: int, T: int,
               seed: int, delta: float = 0.1, sigma: float = 1.0,
               two_sided: bool = False, support=None,
               snapshot_every: int = 0, track_bounds: bool = True,
               welfare_opt: Optional[float] = None) -> RegretTrace:
    """Run one seeded trajectory of T rounds and collect its trace."""
    rng = np.random.default_rng(seed)
    state = BanditState(conf=ConfState(env.n, delta, sigma=sigma,
                                       two_sided=two_sided, support=support))
    mu = env.means()
    if welfare_opt is None:
        welfare_opt = eval_welfare(spec, mu * solve(spec, mu, k).p)
    inst = np.empty(T)
    cum = np.empty(T)
    welf = np.empty(T)
    w_lo = np.empty(T)
    w_hi = np.empty(T)
    policies: Dict[int, np.ndarray] = {}
    for j in range(T):
        rec = step(state, spec, env, k, rng, welfare_opt=welfare_opt, mu=mu,
                   track_bounds=track_bounds)
        inst[j] = rec.regret_inst
        cum[j] = state.regret_cum
        welf[j] = rec.welfare_t
        w_lo[j] = rec.w_lo
        w_hi[j] = rec.w_hi
        if snapshot_every and rec.t % snapshot_every == 0:
            policies[rec.t] = rec.policy.copy()
    return RegretTrace(seed=seed, t=np.arange(1, T + 1), regret_inst=inst,
                       regret_cum=cum, welfare_opt=welfare_opt,
                       welfare_t=welf, w_lo=w_lo, w_hi=w_hi,
                       policies=policies)


@dataclass
class ExperimentResult:
    config: "ExperimentConfig"
    spec: WelfareSpec
    env: UtilityModel
    mu: np.ndarray
    p_star: np.ndarray
    welfare_opt: float
    traces: list


def run_experiment(cfg) -> ExperimentResult:
    """Simulate the configured instance once per run seed.

    The environment is drawn once from the instance seed and held fixed;
    only the sampling randomness varies across run seeds.  The optimal
    policy and welfare are computed once from the true means.
    """
    cfg.require_scalar()
    spec = cfg.welfare_spec()
    env = cfg.utility_model()
    mu = env.means()
    p_star = solve(spec, mu, cfg.k).p
    welfare_opt = eval_welfare(spec, mu * p_star)
    traces = [
        run_bandit(spec, env, cfg.k, cfg.T, seed, delta=cfg.delta,
                   sigma=cfg.sigma, support=cfg.support,
                   snapshot_every=cfg.snapshot_every,
                   welfare_opt=welfare_opt)
        for seed in cfg.run_seeds
    ]
    return ExperimentResult(config=cfg, spec=spec, env=env, mu=mu,
                            p_star=p_star, welfare_opt=welfare_opt,
                            traces=traces)
