#!/usr/bin/env python3
"""Leak fraction and induced QBER as the hidden channel rate r varies."""

import argparse

from qsdc_attack import harness
from qsdc_attack.harness import AdversaryConfig, ExperimentConfig

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--rates", default="0.01,0.02,0.05,0.1,0.15,0.2,0.25")
p.add_argument("--n", type=int, default=100_000)
p.add_argument("--trials", type=int, default=20)
p.add_argument("--seed", type=int, default=9009)
p.add_argument("--csv", help="write long-format per-trial rows here")
args = p.parse_args()

base = ExperimentConfig(n=args.n, trials=args.trials, seed=args.seed, compare_honest=False,
                        adversary=AdversaryConfig(kind="paper_attack"))
rates = [float(x) for x in args.rates.split(",")]
results = harness.run_sweep(base, "r", rates)

print(f"{'r':>6} {'4r':>6} {'leak':>8} {'qber1':>8} {'qber2':>8} {'aborts':>6}")
for r, res in results:
    s = res.summary
    leak = s.leak.mean_leak if s.leak else float("nan")
    print(f"{r:6.3f} {4 * r:6.3f} {leak:8.4f} {s.mean_qber1:8.4f} {s.mean_qber2:8.4f} "
          f"{s.aborts1 + s.aborts2:6d}")

if args.csv:
    harness.write_text(harness.sweep_to_text(results, "r"), args.csv)
