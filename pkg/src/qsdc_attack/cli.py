"""Command-line entry point: ``qsdc-attack {run,sweep,analyze}``.

Exit status: 0 success, 1 configuration/usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .harness import ConfigError, ExperimentConfig, ExperimentSummary
from .stats import detection_test

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _colour(text: str, code: str, stream) -> str:
    if os.environ.get("NO_COLOR") or not getattr(stream, "isatty", lambda: False)():
        return text
    return f"\033[{code}m{text}\033[0m"


def _fmt(x, digits=4) -> str:
    return "n/a" if x is None else f"{x:.{digits}f}"


def format_summary(summary: ExperimentSummary, label: str = "", stream=None) -> str:
    stream = stream or sys.stdout
    head = f"[{label}] " if label else ""
    lines = [
        f"{head}trials={summary.trials} aborts: first={summary.aborts1} "
        f"second={summary.aborts2} rate={_fmt(summary.abort_rate)}",
        f"{head}mean qber1={_fmt(summary.mean_qber1)} mean qber2={_fmt(summary.mean_qber2)}"
        f" message error rate={_fmt(summary.message_error_rate)}",
    ]
    if summary.leak is not None:
        lk = summary.leak
        lines.append(
            f"{head}leak mean={_fmt(lk.mean_leak)} 95% CI=[{_fmt(lk.leak_ci_low)}, "
            f"{_fmt(lk.leak_ci_high)}] eve accuracy mean={_fmt(lk.mean_accuracy, 6)} "
            f"min={_fmt(lk.min_accuracy, 6)}"
        )
    if summary.detection is not None:
        d = summary.detection
        verdict = "indistinguishable" if d.indistinguishable else "DETECTED"
        verdict = _colour(verdict, "32" if d.indistinguishable else "31", stream)
        lines.append(
            f"{head}detection: honest aborts {d.honest_aborts}/{d.honest_trials}, "
            f"attack aborts {d.attack_aborts}/{d.attack_trials}, z={d.z_statistic:.3f}, "
            f"alpha={d.alpha} -> {verdict}"
        )
    return "\n".join(lines)


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from None
        cfg = harness.load_config(text)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    return replace(cfg, **overrides) if overrides else cfg


def _emit_result(result, args) -> None:
    dest = args.out or "-"
    harness.emit(result.rows, args.format, dest)


def cmd_run(args) -> int:
    cfg = _load(args)
    result = harness.run_experiment(cfg, jobs=args.jobs)
    _emit_result(result, args)
    out = sys.stderr if not args.out else sys.stdout
    if result.baseline is not None:
        print(format_summary(result.baseline.summary, "honest", out), file=out)
    print(format_summary(result.summary, "attack" if cfg.attack_active else "", out), file=out)
    return EXIT_OK


def _parse_sweep(spec: str):
    name, sep, values = spec.partition("=")
    if not sep or not name:
        raise ConfigError("sweep", f"expected param=v1,v2,... got {spec!r}")
    name = name.strip()
    items = [v.strip() for v in values.split(",") if v.strip()]
    try:
        parsed = [int(v) if name == "n" else float(v) for v in items]
    except ValueError:
        raise ConfigError("sweep", f"non-numeric value in {spec!r}") from None
    return name, parsed


def cmd_sweep(args) -> int:
    cfg = _load(args)
    name, values = _parse_sweep(args.sweep)
    # Validate every swept config before spending time on any of them.
    for v in values:
        harness.sweep_config(cfg, name, v)
    results = harness.run_sweep(cfg, name, values, jobs=args.jobs)

    text = harness.sweep_to_text(results, name, args.format)
    harness.write_text(text, args.out or "-")
    out = sys.stderr if not args.out else sys.stdout
    for v, res in results:
        print(format_summary(res.summary, f"{name}={v}", out), file=out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    rows = _read_rows(args.results)
    summary = harness.summarize(rows, [])
    if args.baseline:
        base = _read_rows(args.baseline)
        summary = replace(summary, detection=detection_test(base, rows, args.alpha))
    print(format_summary(summary, stream=sys.stdout))
    return EXIT_OK


def _read_rows(path: str):
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".json"):
        return harness.rows_from_json(text)
    return harness.rows_from_csv(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qsdc-attack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON experiment config (defaults if omitted)")
        p.add_argument("--seed", type=int, help="override the master seed (u64)")
        p.add_argument("--trials", type=int, help="override the trial count")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")

    common(sub.add_parser("run", help="run one experiment"))
    sw = sub.add_parser("sweep", help="run one experiment per swept value")
    common(sw)
    sw.add_argument("--sweep", required=True, metavar="PARAM=V1,V2,...",
                    help=f"PARAM in {', '.join(harness.SWEEP_PARAMS)}")
    an = sub.add_parser("analyze", help="re-aggregate a results file")
    an.add_argument("results", help="CSV or JSON rows from `run`")
    an.add_argument("--baseline", help="honest-arm rows for a detection test")
    an.add_argument("--alpha", type=float, default=0.01)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "analyze": cmd_analyze}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
