import json
from dataclasses import replace

import pytest

from qsdc_attack import harness
from qsdc_attack.cli import main
from qsdc_attack.harness import (
    AdversaryConfig,
    ConfigError,
    ExperimentConfig,
    TrialRow,
    load_config,
    run_experiment,
    run_sweep,
)


@pytest.fixture
def small_attack():
    return ExperimentConfig(n=2_000, r=0.05, trials=4, seed=3,
                            adversary=AdversaryConfig(kind="paper_attack"))


def test_load_config_defaults():
    cfg = load_config('{"n":1000,"r":0.05,"trials":10,"seed":42}')
    assert (cfg.n, cfg.r, cfg.trials, cfg.seed) == (1000, 0.05, 10, 42)
    assert cfg.first_check_fraction == 0.2 and cfg.second_check_fraction == 0.1
    assert cfg.k_sigma == 3.0 and cfg.noise_kind == "depolarizing"
    assert cfg.adversary.kind == "none" and cfg.message_source == "random"


@pytest.mark.parametrize(
    "text,field",
    [
        ('{"r":0.6}', "r"),
        ('{"n":0}', "n"),
        ('{"trials":0}', "trials"),
        ('{"seed":-1}', "seed"),
        ('{"first_check_fraction":1.0}', "first_check_fraction"),
        ('{"noise_kind":"lossy"}', "noise_kind"),
        ('{"bogus":1}', "bogus"),
        ('{"adversary":{"kind":"clone"}}', "adversary.kind"),
        ('{"adversary":{"kind":"paper_attack"},"r":0.3}', "adversary.attack_fraction"),
        ('{"message_source":"xyz"}', "message_source"),
        ('{"n":100,"message_source":"' + "f" * 40 + '"}', "message_source"),
        ("{not json", "<json>"),
    ],
)
def test_load_config_errors_name_field(text, field):
    with pytest.raises(ConfigError) as exc:
        load_config(text)
    assert exc.value.field == field


def test_attack_fraction_derived():
    cfg = load_config('{"r":0.05,"adversary":{"kind":"paper_attack"}}')
    assert cfg.attack_fraction == pytest.approx(0.2)
    fwd, back = cfg.channels()
    assert fwd.kind == back.kind == "ideal"
    no_replace = load_config('{"r":0.05,"adversary":{"kind":"paper_attack","replace_channel":false}}')
    assert no_replace.channels()[0].kind == "depolarizing"


def test_trial_seed_mixing_is_fixed():
    # splitmix64 reference values: first outputs of the generator seeded with 0.
    assert harness.trial_seed(0, 0) == 0xE220A8397B1DCDAF
    assert harness.trial_seed(0, 1) == 0x6E789E6AA1B965F4
    assert harness.trial_seed(0, 2) == 0x06C45D188009454F
    assert harness.trial_seed(42, 0) != harness.trial_seed(43, 0)


def test_rows_independent_of_execution_order():
    cfg = ExperimentConfig(n=1000, trials=5, seed=9)
    rows = run_experiment(cfg).rows
    for i in reversed(range(5)):
        row, _ = harness.run_trial(cfg, i)
        assert row == rows[i]


def test_parallel_matches_sequential():
    cfg = ExperimentConfig(n=1000, trials=6, seed=1)
    assert run_experiment(cfg, jobs=2).rows == run_experiment(cfg).rows


def test_attack_experiment_has_honest_arm(small_attack):
    res = run_experiment(small_attack)
    assert res.baseline is not None and len(res.baseline.rows) == 4
    assert all(r.leak_fraction is None for r in res.baseline.rows)
    assert all(r.eve_accuracy in (1.0, None) for r in res.rows)
    assert res.summary.detection is None  # fewer than 30 trials per arm
    big = run_experiment(replace(small_attack, n=500, trials=30))
    assert big.summary.detection is not None


def test_fixed_hex_message():
    cfg = ExperimentConfig(n=500, r=0.0, noise_kind="ideal", trials=2, message_source="0xA5")
    assert harness.hex_to_bits("A5").tolist() == [1, 0, 1, 0, 0, 1, 0, 1]
    rows = run_experiment(cfg).rows
    assert all(r.message_errors == 0 for r in rows)


def test_emit_csv_format(tmp_path):
    row = TrialRow(0, 7, 0.095, False, None, None, None, None, None)
    text = harness.emit([row], "csv", tmp_path / "x.csv")
    assert text == (
        "trial,seed,qber1,abort1,qber2,abort2,message_errors,leak_fraction,eve_accuracy\n"
        "0,7,0.0950000000,false,,,,,\n"
    )
    assert (tmp_path / "x.csv").read_bytes() == text.encode()
    assert "\r" not in text


def test_emit_roundtrip_and_agreement(small_attack, tmp_path):
    rows = run_experiment(small_attack).rows
    js = harness.emit(rows, "json", tmp_path / "r.json")
    assert harness.rows_from_json(js) == rows
    cs = harness.emit(rows, "csv", tmp_path / "r.csv")
    from_csv = harness.rows_from_csv(cs)
    assert len(from_csv) == len(rows)
    for a, b in zip(from_csv, rows):
        for col in harness.CSV_COLUMNS:
            va, vb = getattr(a, col), getattr(b, col)
            if isinstance(vb, float):
                assert va == pytest.approx(vb, abs=5e-11)
            else:
                assert va == vb
    assert [set(d) for d in json.loads(js)] == [set(harness.CSV_COLUMNS)] * len(rows)


def test_emit_errors(tmp_path):
    with pytest.raises(ValueError):
        harness.emit([], "csv", tmp_path / "x.csv")
    row = TrialRow(0, 7, 0.0, False, 0.0, False, 0, None, None)
    with pytest.raises(OSError):
        harness.emit([row], "csv", tmp_path / "missing" / "dir" / "x.csv")


def test_sweep_errors():
    cfg = ExperimentConfig(n=500, trials=1)
    with pytest.raises(ConfigError):
        run_sweep(cfg, "r", [])
    with pytest.raises(ConfigError):
        run_sweep(cfg, "temperature", [1])


def test_sweep_attack_fraction_on_ideal_channel():
    cfg = ExperimentConfig(n=20_000, r=0.0, noise_kind="ideal", trials=3, seed=4)
    res = dict(run_sweep(cfg, "attack_fraction", [0.0, 0.2]))
    assert res[0.0].summary.mean_qber1 == 0
    assert abs(res[0.2].summary.mean_qber1 - 0.05) < 0.015


def test_sweep_r_rederives_fraction():
    base = ExperimentConfig(n=500, adversary=AdversaryConfig(kind="paper_attack"))
    assert harness.sweep_config(base, "r", 0.1).attack_fraction == pytest.approx(0.4)


# --- CLI -------------------------------------------------------------------


def test_cli_run_is_reproducible(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"n": 2000, "trials": 3, "adversary": {"kind": "paper_attack"}}')
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--config", str(cfg), "--seed", "5", "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg), "--seed", "5", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    out = capsys.readouterr().out
    assert "leak mean" in out and "[honest]" in out


def test_cli_trials_override_and_json(tmp_path):
    out = tmp_path / "o.json"
    assert main(["run", "--trials", "2", "--format", "json", "--out", str(out)]) == 0
    assert len(json.loads(out.read_text())) == 2


def test_cli_sweep(tmp_path):
    out = tmp_path / "s.csv"
    cfg = tmp_path / "c.json"
    cfg.write_text('{"n": 2000, "trials": 2, "adversary": {"kind": "paper_attack"}}')
    assert main(["sweep", "--config", str(cfg), "--sweep", "r=0.01,0.05", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("param,value,trial,seed")
    assert len(lines) == 5 and lines[1].startswith("r,0.0100000000,0,")


def test_cli_analyze(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"n": 1000, "trials": 30}')
    a = tmp_path / "a.csv"
    assert main(["run", "--config", str(cfg), "--out", str(a)]) == 0
    capsys.readouterr()
    assert main(["analyze", str(a), "--baseline", str(a)]) == 0
    out = capsys.readouterr().out
    assert "trials=30" in out and "indistinguishable" in out


def test_cli_exit_codes(tmp_path, monkeypatch):
    bad = tmp_path / "bad.json"
    bad.write_text('{"r": 0.9}')
    assert main(["run", "--config", str(bad)]) == 1
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1
    assert main(["sweep", "--sweep", "bogus=1"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    assert main(["analyze", str(tmp_path / "nope.csv")]) == 2
    garbage = tmp_path / "g.csv"
    garbage.write_text("a,b\n1,2\n")
    assert main(["analyze", str(garbage)]) == 2


def test_no_color(monkeypatch):
    from qsdc_attack.cli import _colour

    class Tty:
        def isatty(self):
            return True

    monkeypatch.delenv("NO_COLOR", raising=False)
    assert "\033[" in _colour("x", "32", Tty())
    monkeypatch.setenv("NO_COLOR", "1")
    assert _colour("x", "32", Tty()) == "x"
