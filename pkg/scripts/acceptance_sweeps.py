#!/usr/bin/env python3
"""Run the desk-scale experiment sweeps behind the acceptance checks and the
figures: regret vs horizon, vs power parameter, and vs resource count.

Writes one sweep directory per axis under --out (default ./artifacts), each
holding per-cell trace CSVs plus an index.json that the plots tool consumes:

    python scripts/acceptance_sweeps.py --out artifacts --jobs 2
    plots --index artifacts/vs_T/index.json --kind t --norm sqrt --out vs_T.png
"""

import argparse
import time
from pathlib import Path

from swfalloc.config import ExperimentConfig
from swfalloc.harness import run_sweep

COMMON = dict(n=20, delta=0.1, sigma=1.0, support=None, instance_seed=0,
              run_seeds=(0, 1, 2, 3, 4))


def sweeps():
    yield "vs_T", ExperimentConfig(
        k=(1, 5, 10), T=(1_000, 4_000, 16_000, 64_000), family="wpm", q=-2.0,
        weights={"scheme": "geometric", "ratio": 0.9}, **COMMON)
    yield "vs_q", ExperimentConfig(
        k=(1, 5, 10), T=10_000, family="wpm",
        q=("-inf", -2.0, -1.0, -0.5, 0.0, 0.5, 1.0),
        weights={"scheme": "geometric", "ratio": 0.9}, **COMMON)
    yield "vs_k", ExperimentConfig(
        k=(1, 5, 10, 15, 19), T=10_000, family="wpm", q="-inf",
        weights={"scheme": "uniform"}, **COMMON)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="artifacts")
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args()
    root = Path(args.out)
    for name, cfg in sweeps():
        t0 = time.time()
        index = run_sweep(cfg, root / name, jobs=args.jobs)
        print(f"{name}: {len(index['cells'])} cells in {time.time() - t0:.0f}s "
              f"-> {root / name}")


if __name__ == "__main__":
    main()
