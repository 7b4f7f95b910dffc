#!/usr/bin/env python3
"""Honest noisy channel vs channel-replacing attack: abort rates, QBERs, leak.

    python scripts/detection_experiment.py --trials 1000 --n 100000 --out results/
"""

import argparse
from dataclasses import replace
from pathlib import Path

from qsdc_attack import harness
from qsdc_attack.cli import format_summary
from qsdc_attack.harness import AdversaryConfig, ExperimentConfig
from qsdc_attack.stats import detection_test


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--r", type=float, default=0.05)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--k-sigma", type=float, default=3.0)
    ap.add_argument("--alpha", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=5005)
    ap.add_argument("--camouflage", action="store_true")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, help="directory for honest.csv / attack.csv")
    args = ap.parse_args()

    base = ExperimentConfig(n=args.n, r=args.r, k_sigma=args.k_sigma, trials=args.trials,
                            seed=args.seed, alpha=args.alpha, compare_honest=False)
    honest = harness.run_experiment(base, jobs=args.jobs)
    attack_cfg = replace(
        base, seed=args.seed + 1,
        adversary=AdversaryConfig(kind="paper_attack", camouflage=args.camouflage),
    )
    attack = harness.run_experiment(attack_cfg, jobs=args.jobs)

    print(format_summary(honest.summary, "honest"))
    print(format_summary(attack.summary, "attack"))
    rep = detection_test(honest.rows, attack.rows, args.alpha)
    verdict = "indistinguishable" if rep.indistinguishable else "distinguishable"
    print(f"abort-rate z={rep.z_statistic:.3f} at alpha={args.alpha}: {verdict}")

    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        harness.emit(honest.rows, "csv", args.out / "honest.csv")
        harness.emit(attack.rows, "csv", args.out / "attack.csv")


if __name__ == "__main__":
    main()
