"""Persistence and drivers: single runs, sweep grids, inference streams and
the built-in validation suites behind the CLI."""

from __future__ import annotations

import dataclasses
import json
import math
import os
from multiprocessing import get_context
from pathlib import Path
from typing import Optional

import numpy as np

from swfalloc.bandit import (UtilityModel, forced_rounds, run_bandit,
                             run_experiment)
from swfalloc.config import ConfigError, ExperimentConfig, q_tag
from swfalloc.confseq import ConfState, lift_state
from swfalloc.inference import (OptimalStopper, PolicyComparison,
                                SequentialTest, TestSpec, check_coverage_floor)
from swfalloc.oracle import solve, solve_reference
from swfalloc.rounding import dependent_round
from swfalloc.welfare import NEG_INF, Family, WelfareSpec, eval_welfare

CSV_HEADER = "t,regret_inst,regret_cum,welfare_opt,welfare_t,W_lo,W_hi,seed"
SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else format(x, ".17g")


def write_trace_csv(path, traces) -> None:
    """Write traces of one experiment cell; the bound columns are empty
    during the forced exploration phase."""
    lines = [CSV_HEADER]
    for tr in traces:
        opt = format(tr.welfare_opt, ".17g")
        for j in range(tr.t.size):
            lines.append(
                f"{tr.t[j]},{_fmt(tr.regret_inst[j])},{_fmt(tr.regret_cum[j])},"
                f"{opt},{_fmt(tr.welfare_t[j])},{_fmt(tr.w_lo[j])},"
                f"{_fmt(tr.w_hi[j])},{tr.seed}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path):
    """Read a trace CSV back into per-seed column dicts."""
    out = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {header!r}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            seed = int(parts[7])
            rows = out.setdefault(seed, {"t": [], "regret_inst": [],
                                         "regret_cum": [], "welfare_opt": [],
                                         "welfare_t": [], "W_lo": [],
                                         "W_hi": []})
            rows["t"].append(int(parts[0]))
            for name, val in zip(("regret_inst", "regret_cum", "welfare_opt",
                                  "welfare_t", "W_lo", "W_hi"), parts[1:7]):
                rows[name].append(float(val) if val else math.nan)
    for seed, rows in out.items():
        out[seed] = {k: np.asarray(v) for k, v in rows.items()}
    return out


def _json_dump(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_single(cfg: ExperimentConfig, out_dir) -> dict:
    """Run a scalar config; writes trace.csv and summary.json."""
    cfg.require_scalar()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_experiment(cfg)
    write_trace_csv(out_dir / "trace.csv", result.traces)
    summary = {
        "config": cfg.to_dict(),
        "welfare_opt": result.welfare_opt,
        "p_star": [float(x) for x in result.p_star],
        "mu": [float(x) for x in result.mu],
        "final_regret": {str(tr.seed): tr.final_regret()
                         for tr in result.traces},
        "final_regret_mean": float(np.mean([tr.final_regret()
                                            for tr in result.traces])),
        "trace_csv": "trace.csv",
    }
    _json_dump(out_dir / "summary.json", summary)
    return summary


def _cell_name(cfg: ExperimentConfig) -> str:
    return f"cell_{cfg.family}_q{q_tag(cfg.q)}_k{cfg.k}_T{cfg.T}.csv"


def _run_cell(args) -> dict:
    cfg, out_dir = args
    result = run_experiment(cfg)
    path = Path(out_dir) / _cell_name(cfg)
    write_trace_csv(path, result.traces)
    return {
        "path": path.name,
        "family": cfg.family,
        "q": "-inf" if cfg.q == NEG_INF else cfg.q,
        "k": cfg.k,
        "T": cfg.T,
        "n": cfg.n,
        "seeds": list(cfg.run_seeds),
        "welfare_opt": result.welfare_opt,
        "final_regret_mean": float(np.mean([tr.final_regret()
                                            for tr in result.traces])),
    }


def resolve_jobs(jobs: Optional[int]) -> int:
    if jobs is None:
        env = os.environ.get("SWF_ALLOC_JOBS")
        jobs = int(env) if env else 1
    return max(1, jobs)


def run_sweep(cfg: ExperimentConfig, out_dir, jobs: Optional[int] = None) -> dict:
    """Run every cell of the k/T/q grid; one CSV per cell plus an index
    file written once by the coordinator."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(cell, out_dir) for cell in cfg.cells()]
    jobs = resolve_jobs(jobs)
    if jobs > 1 and len(tasks) > 1:
        with get_context("spawn").Pool(min(jobs, len(tasks))) as pool:
            cells = pool.map(_run_cell, tasks)
    else:
        cells = [_run_cell(t) for t in tasks]
    index = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "cells": cells,
    }
    _json_dump(out_dir / "index.json", index)
    return index


def _load_policy(path, n: int) -> np.ndarray:
    data = json.loads(Path(path).read_text())
    p = np.asarray(data, dtype=float)
    if p.size != n:
        raise ConfigError(f"policy in {path} has length {p.size}, expected {n}")
    return p


def run_infer(cfg: ExperimentConfig, mode: str, out_dir, w0: float = 0.0,
              direction: str = "exceeds", optimal: bool = False,
              policy_path=None, policy2_path=None, gamma: float = 0.0,
              t_max: Optional[int] = None, stream_seed: int = 0) -> dict:
    """Drive one sequential-inference procedure on a simulated stream.

    Data are collected under the fixed logging policy (default uniform k/n,
    or the supplied one) or, with ``optimal``, under the optimistic
    allocation loop itself; either way the procedures consume only the
    confidence-state snapshots.
    """
    cfg.require_scalar()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = cfg.welfare_spec()
    env = cfg.utility_model()
    n, k = cfg.n, cfg.k
    T = t_max if t_max is not None else cfg.T
    rng = np.random.default_rng(stream_seed)
    state = ConfState(n, cfg.delta / 2.0 if mode == "compare" else cfg.delta,
                      sigma=cfg.sigma, two_sided=True, support=cfg.support)

    logging_policy = None
    if not optimal:
        logging_policy = (_load_policy(policy_path, n) if policy_path
                          else np.full(n, k / n))
        check_coverage_floor(logging_policy, gamma)

    if mode == "test":
        fixed = None if optimal else logging_policy
        proc = SequentialTest(TestSpec(w0, direction, fixed, cfg.delta),
                              spec, k)
    elif mode == "stop":
        proc = OptimalStopper(spec, k, w0, cfg.delta)
    elif mode == "compare":
        if policy_path is None or policy2_path is None:
            raise ConfigError("compare mode needs --policy and --policy2")
        p1 = _load_policy(policy_path, n)
        p2 = _load_policy(policy2_path, n)
        check_coverage_floor(p1, gamma)
        check_coverage_floor(p2, gamma)
        logging_policy = 0.5 * p1 + 0.5 * p2
        proc = PolicyComparison(p1, p2, spec, cfg.delta)
    else:
        raise ConfigError(f"unknown inference mode {mode!r}")

    decision = {"mode": mode, "delta": cfg.delta, "t_max": T, "w0": w0,
                "direction": direction, "verdict": "undecided", "time": None}
    cover = forced_rounds(n, k)
    for t in range(1, T + 1):
        if optimal and mode != "compare":
            # optimistic collection: forced cover, then optimize upper bounds
            if t <= cover:
                chosen = ((t - 1) * k + np.arange(k)) % n
            else:
                chosen = dependent_round(solve(spec, state.hi, k).p, rng)
        else:
            chosen = dependent_round(logging_policy, rng)
        for i, x in zip(chosen, env.sample(chosen, rng)):
            state.update(int(i), float(x))
        if not state.initialized or np.any(state.lo <= 0.0):
            # lower bands are vacuous until they clear zero; waiting is
            # conservative and keeps the welfare lift well defined
            continue
        if mode == "test":
            if proc.observe(state, t) == "reject":
                decision.update(verdict="reject", time=proc.rejected_at)
                break
        elif mode == "stop":
            hit = proc.observe(state, t)
            if hit is not None:
                tau, deployed = hit
                decision.update(verdict="stop", time=tau,
                                policy=[float(x) for x in deployed.p])
                break
        else:
            verdict = proc.observe(state, t)
            if verdict != "undecided":
                decision.update(verdict=verdict, time=proc.decision.time,
                                per_band_delta=proc.decision.per_band_delta)
                break
    _json_dump(out_dir / "decision.json", decision)
    return decision


def _validate_oracles(instances: int, rng: np.random.Generator) -> bool:
    qs = [NEG_INF, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0]
    ok = True
    for _ in range(instances):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n + 1))
        u = rng.uniform(0.1, 1.0, size=n)
        fam = [Family.WPM, Family.KOLM, Family.GINI][int(rng.integers(3))]
        if fam is Family.GINI:
            w = np.sort(rng.uniform(0.0, 1.0, size=n))[::-1]
            spec = WelfareSpec(fam, w)
        else:
            w = rng.dirichlet(np.ones(n)) + 0.01
            w /= w.sum()
            valid = [q for q in qs if not (fam is Family.KOLM and q > 0)]
            spec = WelfareSpec(fam, w, valid[int(rng.integers(len(valid)))])
        exact = solve(spec, u, k)
        ref = solve_reference(spec, u, k, iters=3000)
        v_exact = eval_welfare(spec, u * np.maximum(exact.p, 1e-12)) \
            if fam is Family.WPM and spec.q <= 0 else eval_welfare(spec, u * exact.p)
        v_ref = eval_welfare(spec, u * np.maximum(ref.p, 1e-12)) \
            if fam is Family.WPM and spec.q <= 0 else eval_welfare(spec, u * ref.p)
        if v_exact < v_ref - 1e-5:
            ok = False
    return ok


def _validate_coverage(runs: int, T: int, rng: np.random.Generator) -> bool:
    n, delta = 4, 0.1
    bad = 0
    for _ in range(runs):
        env = UtilityModel.random(n, rng)
        mu = env.means()
        state = ConfState(n, delta, sigma=0.45, two_sided=True,
                          support=env.support())
        exited = False
        for _ in range(T):
            i = int(rng.integers(n))
            state.update(i, float(env.sample([i], rng)[0]))
            if not (state.lo[i] <= mu[i] <= state.hi[i]):
                exited = True
                break
        bad += exited
    return bad / runs <= delta


def _validate_rounding(rng: np.random.Generator) -> bool:
    for _ in range(5):
        n = 8
        k = int(rng.integers(1, n))
        pi = rng.dirichlet(np.ones(n)) * k
        while np.any(pi > 1.0):
            excess = np.clip(pi - 1.0, 0.0, None)
            pi = np.minimum(pi, 1.0)
            room = pi < 1.0
            pi[room] += excess.sum() * (1.0 - pi[room]) / (1.0 - pi[room]).sum()
        draws = 20000
        counts = np.zeros(n)
        for _ in range(draws):
            s = dependent_round(pi, rng)
            if s.size != k:
                return False
            counts[s] += 1
        if np.max(np.abs(counts / draws - pi)) > 0.02:
            return False
    return True


def run_validate(quick: bool = True) -> int:
    """Built-in cross-checks; prints one pass/fail line per suite."""
    rng = np.random.default_rng(20240521)
    suites = [
        ("oracle-differential", lambda: _validate_oracles(20 if quick else 60, rng)),
        ("cs-coverage", lambda: _validate_coverage(30 if quick else 120,
                                                   1000 if quick else 3000, rng)),
        ("dependent-rounding", lambda: _validate_rounding(rng)),
    ]
    failed = 0
    for name, fn in suites:
        ok = fn()
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        failed += not ok
    return 1 if failed else 0
