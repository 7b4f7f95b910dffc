"""QBER estimates, abort thresholds, and trial-level aggregate tests."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable, Sequence

Z_95 = NormalDist().inv_cdf(0.975)
MIN_ARM_TRIALS = 30


@dataclass(frozen=True)
class QberEstimate:
    errors: int
    samples: int
    rate: float
    ci_low: float
    ci_high: float


def wilson_interval(errors: int, samples: int, z: float = Z_95) -> tuple[float, float]:
    p = errors / samples
    denom = 1.0 + z * z / samples
    centre = (p + z * z / (2 * samples)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / samples + z * z / (4 * samples * samples))
    # Clamp to the point estimate so rounding can never exclude it.
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


def estimate_qber(errors: int, samples: int) -> QberEstimate:
    """Point estimate with a 95% Wilson score interval."""
    if samples < 1:
        raise ValueError("cannot estimate a QBER from zero samples")
    if not 0 <= errors <= samples:
        raise ValueError(f"errors={errors} outside [0, samples={samples}]")
    low, high = wilson_interval(errors, samples)
    return QberEstimate(int(errors), int(samples), errors / samples, low, high)


def threshold(expected_r: float, samples: int, k_sigma: float) -> float:
    """One-sided abort threshold ``expected_r + k_sigma * binomial sd``, clamped to [0, 1]."""
    if samples < 1:
        raise ValueError("threshold needs at least one sample")
    tau = expected_r + k_sigma * math.sqrt(expected_r * (1.0 - expected_r) / samples)
    return min(1.0, max(0.0, tau))


@dataclass(frozen=True)
class DetectionReport:
    honest_trials: int
    attack_trials: int
    honest_aborts: int
    attack_aborts: int
    abort_rate_diff: float
    z_statistic: float
    alpha: float
    indistinguishable: bool


def _abort_flag(outcome) -> bool:
    return bool(getattr(outcome, "aborted", outcome))


def detection_test(honest: Iterable, attack: Iterable, alpha: float = 0.01) -> DetectionReport:
    """Two-sided pooled two-proportion z-test on abort rates.

    Arms may contain booleans or anything exposing an ``aborted`` attribute.
    When neither arm ever aborts (or both always do) the pooled variance is
    zero and z is defined as 0.
    """
    h = [_abort_flag(o) for o in honest]
    a = [_abort_flag(o) for o in attack]
    if len(h) < MIN_ARM_TRIALS or len(a) < MIN_ARM_TRIALS:
        raise ValueError(f"each arm needs at least {MIN_ARM_TRIALS} trials")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    nh, na = len(h), len(a)
    kh, ka = sum(h), sum(a)
    ph, pa = kh / nh, ka / na
    pooled = (kh + ka) / (nh + na)
    se = math.sqrt(pooled * (1 - pooled) * (1 / nh + 1 / na))
    z = 0.0 if se == 0.0 else (pa - ph) / se
    z_crit = NormalDist().inv_cdf(1 - alpha / 2)
    return DetectionReport(nh, na, kh, ka, pa - ph, z, alpha, abs(z) < z_crit)


@dataclass(frozen=True)
class LeakSummary:
    trials: int
    mean_leak: float
    leak_ci_low: float
    leak_ci_high: float
    mean_accuracy: float | None
    min_accuracy: float | None


def _leak_values(outcome) -> tuple[float, float | None]:
    report = getattr(outcome, "eve_report", None)
    if report is not None:
        return report.leak_fraction, report.accuracy_on_tapped
    return outcome.leak_fraction, getattr(outcome, "eve_accuracy", None)


def summarize_leak(outcomes: Sequence) -> LeakSummary:
    """Mean leak fraction (normal-approximation 95% CI) and Eve's accuracy.

    Takes session outcomes carrying an ``eve_report`` or flat rows with
    ``leak_fraction``/``eve_accuracy``; rows without a leak value are skipped.
    """
    pairs = [_leak_values(o) for o in outcomes if not _abort_flag_default(o)]
    pairs = [(leak, acc) for leak, acc in pairs if leak is not None]
    if not pairs:
        raise ValueError("no non-aborted attack trials to summarize")
    leaks = [leak for leak, _ in pairs]
    accs = [acc for _, acc in pairs if acc is not None]
    n = len(leaks)
    mean = math.fsum(leaks) / n
    if n > 1:
        sd = math.sqrt(math.fsum((x - mean) ** 2 for x in leaks) / (n - 1))
        half = Z_95 * sd / math.sqrt(n)
    else:
        half = 0.0
    return LeakSummary(
        trials=n,
        mean_leak=mean,
        leak_ci_low=max(0.0, mean - half),
        leak_ci_high=min(1.0, mean + half),
        mean_accuracy=math.fsum(accs) / len(accs) if accs else None,
        min_accuracy=min(accs) if accs else None,
    )


def _abort_flag_default(outcome) -> bool:
    return bool(getattr(outcome, "aborted", False))
