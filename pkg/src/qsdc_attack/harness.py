"""Experiment configuration, seeded trial execution, sweeps and result files.

Per-trial seeds
---------------
Trial ``i`` of an experiment with master seed ``S`` runs with seed
``splitmix64(S + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)`` where
``splitmix64`` is the standard finalizer::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    z =  z ^ (z >> 31)

That seed feeds ``numpy.random.SeedSequence``; the session spawns its actor
streams from it and the random message comes from spawn key ``(1000,)``.
A trial's row therefore depends only on (config, S, i).
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .adversary import NONE, PAPER_ATTACK, EveStrategy, attack_fraction_for
from .channel import IDEAL_CHANNEL, calibrate
from .protocol import ProtocolParams, SessionOutcome, ThresholdPolicy, capacity, run_session
from .stats import (
    DetectionReport,
    LeakSummary,
    QberEstimate,
    detection_test,
    estimate_qber,
    summarize_leak,
)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MESSAGE_SPAWN_KEY = (1000,)

CSV_COLUMNS = (
    "trial", "seed", "qber1", "abort1", "qber2", "abort2",
    "message_errors", "leak_fraction", "eve_accuracy",
)
SWEEP_PARAMS = ("r", "n", "attack_fraction", "k_sigma")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def splitmix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, index: int) -> int:
    return splitmix64(master_seed + (index + 1) * GOLDEN_GAMMA)


# --- configuration --------------------------------------------------------


@dataclass(frozen=True)
class AdversaryConfig:
    kind: str = NONE
    attack_fraction: float | None = None  # None: derived as 4r
    camouflage: bool = False
    replace_channel: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 10_000
    r: float = 0.05
    noise_kind: str = "depolarizing"
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    first_check_fraction: float = 0.2
    second_check_fraction: float = 0.1
    k_sigma: float = 3.0
    expected_r: float | None = None  # None: r for a noisy channel, 0 for ideal
    trials: int = 10
    seed: int = 0
    message_source: str = "random"  # or a hex string
    alpha: float = 0.01
    compare_honest: bool = True

    def __post_init__(self):
        validate(self)

    @property
    def attack_active(self) -> bool:
        return self.adversary.kind == PAPER_ATTACK

    @property
    def attack_fraction(self) -> float:
        if not self.attack_active:
            return 0.0
        if self.adversary.attack_fraction is not None:
            return self.adversary.attack_fraction
        return attack_fraction_for(self.r)

    @property
    def policy_expected_r(self) -> float:
        if self.expected_r is not None:
            return self.expected_r
        return self.r if self.noise_kind == "depolarizing" else 0.0

    def channels(self):
        """(forward, backward) channel models actually wired into a session."""
        if self.noise_kind == "ideal":
            return IDEAL_CHANNEL, IDEAL_CHANNEL
        if self.attack_active and self.adversary.replace_channel:
            return IDEAL_CHANNEL, IDEAL_CHANNEL
        model = calibrate(self.r)
        return model, model

    def strategy(self) -> EveStrategy | None:
        if not self.attack_active:
            return None
        return EveStrategy(
            kind=PAPER_ATTACK,
            attack_fraction=self.attack_fraction,
            camouflage=self.adversary.camouflage,
            noise_r=self.r,
            replace_channel=self.adversary.replace_channel,
        )

    def honest_twin(self) -> "ExperimentConfig":
        return replace(self, adversary=AdversaryConfig())

    def protocol_params(self, message_bits: np.ndarray) -> ProtocolParams:
        policy = ThresholdPolicy(self.policy_expected_r, self.k_sigma)
        return ProtocolParams(
            self.n, message_bits, self.first_check_fraction, self.second_check_fraction, policy
        )


def _check(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ConfigError(name, message)


def _is_prob(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and 0.0 <= x <= 1.0


def validate(cfg: ExperimentConfig) -> None:
    _check(isinstance(cfg.n, int) and not isinstance(cfg.n, bool) and cfg.n >= 1,
           "n", "must be an integer >= 1")
    _check(_is_prob(cfg.r) and cfg.r <= 0.5, "r", "must lie in [0, 0.5]")
    _check(cfg.noise_kind in ("ideal", "depolarizing"), "noise_kind",
           "must be 'ideal' or 'depolarizing'")
    for name in ("first_check_fraction", "second_check_fraction"):
        v = getattr(cfg, name)
        _check(_is_prob(v) and 0.0 < v < 1.0, name, "must lie in (0, 1)")
    _check(isinstance(cfg.k_sigma, (int, float)) and cfg.k_sigma >= 0, "k_sigma", "must be >= 0")
    _check(cfg.expected_r is None or (_is_prob(cfg.expected_r) and cfg.expected_r <= 0.5),
           "expected_r", "must lie in [0, 0.5]")
    _check(isinstance(cfg.trials, int) and cfg.trials >= 1, "trials", "must be an integer >= 1")
    _check(isinstance(cfg.seed, int) and 0 <= cfg.seed <= MASK64, "seed",
           "must be an unsigned 64-bit integer")
    _check(_is_prob(cfg.alpha) and 0.0 < cfg.alpha < 1.0, "alpha", "must lie in (0, 1)")

    adv = cfg.adversary
    _check(adv.kind in (NONE, PAPER_ATTACK), "adversary.kind",
           "must be 'none' or 'paper_attack'")
    if adv.attack_fraction is not None:
        _check(_is_prob(adv.attack_fraction), "adversary.attack_fraction", "must lie in [0, 1]")
    elif adv.kind == PAPER_ATTACK:
        _check(cfg.r <= 0.25, "adversary.attack_fraction",
               f"cannot derive 4r from r={cfg.r} (> 1); set it explicitly")

    _check(isinstance(cfg.message_source, str), "message_source",
           "must be 'random' or a hex string")
    cap = capacity(cfg.n, cfg.first_check_fraction, cfg.second_check_fraction)
    if cfg.message_source != "random":
        try:
            bits = hex_to_bits(cfg.message_source)
        except ValueError as exc:
            raise ConfigError("message_source", str(exc)) from None
        _check(bits.size <= cap, "message_source",
               f"{bits.size} bits exceed session capacity {cap}")


def hex_to_bits(text: str) -> np.ndarray:
    """Most-significant bit first, four bits per hex digit."""
    text = text.strip()
    if text.lower().startswith("0x"):
        text = text[2:]
    if not text or any(c not in "0123456789abcdefABCDEF" for c in text):
        raise ValueError(f"not a hex string: {text!r}")
    return np.array([int(b) for c in text for b in format(int(c, 16), "04b")], dtype=np.uint8)


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown field")
    data = dict(data)
    adv = data.pop("adversary", None)
    if adv is not None:
        if not isinstance(adv, dict):
            raise ConfigError("adversary", "must be an object")
        adv_known = {f.name for f in fields(AdversaryConfig)}
        for key in adv:
            if key not in adv_known:
                raise ConfigError(f"adversary.{key}", "unknown field")
        data["adversary"] = AdversaryConfig(**adv)
    return ExperimentConfig(**data)


def load_config(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"parse error: {exc}") from None
    return config_from_dict(data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


# --- running --------------------------------------------------------------


@dataclass(frozen=True)
class TrialRow:
    trial: int
    seed: int
    qber1: float
    abort1: bool
    qber2: float | None
    abort2: bool | None
    message_errors: int | None
    leak_fraction: float | None
    eve_accuracy: float | None

    @property
    def aborted(self) -> bool:
        return self.abort1 or bool(self.abort2)


@dataclass(frozen=True)
class ExperimentSummary:
    trials: int
    aborts1: int
    aborts2: int
    abort_rate: float
    mean_qber1: float
    mean_qber2: float | None
    pooled_qber1: QberEstimate | None
    pooled_qber2: QberEstimate | None
    message_error_rate: float | None
    leak: LeakSummary | None
    detection: DetectionReport | None = None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[TrialRow]
    summary: ExperimentSummary
    baseline: "ExperimentResult | None" = None
    # Per-trial (errors, samples) of both checks, for pooled estimates.
    counts: list[tuple[int, int, int, int]] = field(default_factory=list, repr=False)


def message_for_trial(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    if cfg.message_source != "random":
        return hex_to_bits(cfg.message_source)
    cap = capacity(cfg.n, cfg.first_check_fraction, cfg.second_check_fraction)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=MESSAGE_SPAWN_KEY))
    return rng.integers(0, 2, size=cap, dtype=np.uint8)


def run_trial(cfg: ExperimentConfig, index: int) -> tuple[TrialRow, SessionOutcome]:
    seed = trial_seed(cfg.seed, index)
    params = cfg.protocol_params(message_for_trial(cfg, seed))
    forward, backward = cfg.channels()
    out = run_session(params, forward, backward, cfg.strategy(), seed)
    rep = out.eve_report
    row = TrialRow(
        trial=index,
        seed=seed,
        qber1=out.qber1.rate,
        abort1=out.abort1,
        qber2=None if out.qber2 is None else out.qber2.rate,
        abort2=out.abort2,
        message_errors=out.message_errors,
        leak_fraction=None if rep is None else rep.leak_fraction,
        eve_accuracy=None if rep is None else rep.accuracy_on_tapped,
    )
    return row, out


def _trial_task(args):
    row, out = run_trial(*args)
    q2 = out.qber2
    return row, (out.qber1.errors, out.qber1.samples,
                 0 if q2 is None else q2.errors, 0 if q2 is None else q2.samples)


def _run_arm(cfg: ExperimentConfig, jobs: int) -> tuple[list[TrialRow], list]:
    tasks = [(cfg, i) for i in range(cfg.trials)]
    if jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trial_task, tasks, chunksize=max(1, cfg.trials // (4 * jobs))))
    else:
        results = [_trial_task(t) for t in tasks]
    return [r for r, _ in results], [c for _, c in results]


def summarize(rows: Sequence[TrialRow], counts: Sequence[tuple[int, int, int, int]],
              message_bits: int | None = None) -> ExperimentSummary:
    """Aggregate rows in trial order.

    ``counts`` holds per-trial (errors1, samples1, errors2, samples2); rows
    reloaded from CSV carry no counts and get no pooled estimates.
    """
    if not rows:
        raise ValueError("no trial rows to summarize")
    rows = sorted(rows, key=lambda r: r.trial)
    n = len(rows)
    reached2 = [r for r in rows if r.qber2 is not None]

    if counts:
        e1 = sum(c[0] for c in counts)
        s1 = sum(c[1] for c in counts)
        e2 = sum(c[2] for c in counts)
        s2 = sum(c[3] for c in counts)
        pooled1 = estimate_qber(e1, s1)
        pooled2 = estimate_qber(e2, s2) if s2 else None
    else:
        pooled1 = pooled2 = None

    msg_rate = None
    if message_bits and reached2:
        msg_rate = math.fsum(r.message_errors for r in reached2) / (len(reached2) * message_bits)

    leak = None
    if any(r.leak_fraction is not None and not r.aborted for r in rows):
        leak = summarize_leak(rows)

    return ExperimentSummary(
        trials=n,
        aborts1=sum(r.abort1 for r in rows),
        aborts2=sum(bool(r.abort2) for r in rows),
        abort_rate=sum(r.aborted for r in rows) / n,
        mean_qber1=math.fsum(r.qber1 for r in rows) / n,
        mean_qber2=math.fsum(r.qber2 for r in reached2) / len(reached2) if reached2 else None,
        pooled_qber1=pooled1,
        pooled_qber2=pooled2,
        message_error_rate=msg_rate,
        leak=leak,
    )


def _message_length(cfg: ExperimentConfig) -> int:
    if cfg.message_source != "random":
        return hex_to_bits(cfg.message_source).size
    return capacity(cfg.n, cfg.first_check_fraction, cfg.second_check_fraction)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Run ``cfg.trials`` sessions; for attack configs also an honest arm.

    The honest arm reuses the trial seeds with Eve removed and the natural
    channel restored, and the summary carries the abort-rate detection test
    between the two arms (when both have enough trials).
    """
    rows, counts = _run_arm(cfg, jobs)
    summary = summarize(rows, counts, _message_length(cfg))
    baseline = None
    if cfg.attack_active and cfg.compare_honest:
        honest = cfg.honest_twin()
        b_rows, b_counts = _run_arm(honest, jobs)
        baseline = ExperimentResult(
            honest, b_rows, summarize(b_rows, b_counts, _message_length(honest)), counts=b_counts
        )
        if min(len(rows), len(b_rows)) >= 30:
            summary = replace(summary, detection=detection_test(b_rows, rows, cfg.alpha))
    return ExperimentResult(cfg, rows, summary, baseline, counts)


def sweep_config(base: ExperimentConfig, param: str, value) -> ExperimentConfig:
    if param not in SWEEP_PARAMS:
        raise ConfigError("sweep", f"unknown parameter {param!r}; choose from {SWEEP_PARAMS}")
    if param == "n":
        return replace(base, n=int(value))
    if param == "attack_fraction":
        adv = replace(base.adversary, kind=PAPER_ATTACK, attack_fraction=float(value))
        return replace(base, adversary=adv)
    return replace(base, **{param: float(value)})


def run_sweep(base: ExperimentConfig, param: str, values: Sequence,
              jobs: int = 1) -> list[tuple[object, ExperimentResult]]:
    if param not in SWEEP_PARAMS:
        raise ConfigError("sweep", f"unknown parameter {param!r}; choose from {SWEEP_PARAMS}")
    if not values:
        raise ConfigError("sweep", "empty value list")
    return [(v, run_experiment(sweep_config(base, param, v), jobs)) for v in values]


# --- output ---------------------------------------------------------------


def format_value(v) -> str:
    """CSV cell text: fixed 10-decimal floats, lowercase booleans, empty for missing."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.10f}"
    return str(v)


def _row_cells(row: TrialRow) -> list[str]:
    return [format_value(getattr(row, c)) for c in CSV_COLUMNS]


def rows_to_csv(rows: Iterable[TrialRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(_row_cells(row))
    return buf.getvalue()


def rows_to_json(rows: Iterable[TrialRow]) -> str:
    return json.dumps([asdict(r) for r in rows], indent=1) + "\n"


def sweep_to_text(results: Sequence[tuple[object, ExperimentResult]], param: str,
                  fmt: str = "csv") -> str:
    """Long-format rows keyed by ``param,value`` ahead of the trial columns."""
    if fmt == "json":
        recs = [dict(param=param, value=v, **asdict(row)) for v, res in results for row in res.rows]
        return json.dumps(recs, indent=1) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["param", "value", *CSV_COLUMNS])
    for v, res in results:
        for row in res.rows:
            writer.writerow([param, format_value(v)] + _row_cells(row))
    return buf.getvalue()


def emit(rows: Sequence[TrialRow], fmt: str = "csv", destination=None) -> str:
    """Serialize rows as CSV or JSON and write them to ``destination``.

    ``destination`` may be a path, an open text stream, ``"-"``/None for
    stdout. Returns the text written.
    """
    if not rows:
        raise ValueError("no rows to emit")
    if fmt == "csv":
        text = rows_to_csv(rows)
    elif fmt == "json":
        text = rows_to_json(rows)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    write_text(text, destination)
    return text


def write_text(text: str, destination) -> None:
    if destination is None or destination == "-":
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(Path(destination), "w", newline="", encoding="utf-8") as fh:
            fh.write(text)


def _parse_cell(name: str, text: str):
    if text == "":
        return None
    if name in ("abort1", "abort2"):
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r} in column {name}")
        return text == "true"
    if name in ("trial", "seed", "message_errors"):
        return int(text)
    return float(text)


def rows_from_csv(text: str) -> list[TrialRow]:
    reader = csv.DictReader(io.StringIO(text))
    missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"CSV is missing columns: {sorted(missing)}")
    return [TrialRow(**{c: _parse_cell(c, rec[c]) for c in CSV_COLUMNS}) for rec in reader]


def rows_from_json(text: str) -> list[TrialRow]:
    return [TrialRow(**{c: rec[c] for c in CSV_COLUMNS}) for rec in json.loads(text)]
