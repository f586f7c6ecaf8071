import csv
import math

import numpy as np
import pytest

from wpcra.cli import main
from wpcra.config import PRESETS, ExperimentConfig, parse_config
from wpcra.harness import run, run_replicates, sweep
from wpcra.metrics import read_report

SMOKE = PRESETS["smoke"]
FILES = ("metrics.json", "curves.csv", "ledger.csv", "config.txt", "radii.csv")


def test_run_writes_reports(tmp_path):
    out = run(SMOKE, tmp_path)
    for name in FILES:
        assert (tmp_path / name).exists()
    rep, doc = read_report(tmp_path / "metrics.json")
    assert rep == out.report
    assert parse_config(doc["config"]) == SMOKE
    assert doc["seed"] == SMOKE.seed
    assert rep.certified_accuracy <= rep.certified_rate
    assert 0 <= rep.acc <= 1 and 0 <= rep.fnr <= 1


def test_run_is_byte_identical(tmp_path):
    run(SMOKE, tmp_path / "a")
    run(SMOKE, tmp_path / "b")
    for name in FILES:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_curve_recomputes_certified_rate(tmp_path):
    out = run(SMOKE.replace(aggregator="crfl"), tmp_path)
    with open(tmp_path / "curves.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 101
    cr = np.mean([float(r["certified_fraction"]) for r in rows])
    assert abs(cr - out.report.certified_rate) <= 1e-12


def test_no_attackers_means_no_certificate():
    rep = run(SMOKE.replace(num_attackers=0)).report
    assert rep.radius_M is None and rep.certified_rate is None and rep.fnr == 0.0


def test_sweep_rows_and_single_value(tmp_path):
    rows = sweep(SMOKE, "sigma", [0.005, 0.01], tmp_path)
    assert len(rows) == 2
    with open(tmp_path / "sweep.csv") as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["axis", "value", "Radius", "Acc", "CR", "CA", "FNR"]
    assert len(table) == 3
    one = sweep(SMOKE, "sigma", [0.01])[0]
    rep = run(SMOKE).report
    assert one[2:] == (rep.radius_M, rep.acc, rep.certified_rate, rep.certified_accuracy, rep.fnr)
    with pytest.raises(ValueError):
        sweep(SMOKE, "beta", [1])


def test_replicates(tmp_path):
    outs, means = run_replicates(SMOKE.replace(replicates=3, aggregator="mean"), tmp_path)
    assert [o.result.config.seed for o in outs] == [42, 43, 44]
    assert means["Acc"] == pytest.approx(np.mean([o.report.acc for o in outs]))
    assert (tmp_path / "replicates.csv").read_text().splitlines()[-1].startswith("mean,")


def test_cli_run(tmp_path, capsys):
    assert main(["run", "--preset", "smoke", "--out", str(tmp_path / "w")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [ln.split()[0] for ln in lines] == ["Radius", "Acc", "CR", "CA", "FNR"]
    assert main(["run", "--preset", "smoke", "--aggregator", "mean",
                 "--out", str(tmp_path / "m")]) == 0
    a = (tmp_path / "w" / "metrics.json").read_bytes()
    b = (tmp_path / "m" / "metrics.json").read_bytes()
    assert a != b


def test_cli_flag_beats_config_file(tmp_path, capsys):
    f = tmp_path / "c.txt"
    f.write_text("sigma = 0.01\n")
    main(["run", "--preset", "smoke", "--config", str(f), "--sigma", "0.02", "--seed", "7",
          "--out", str(tmp_path / "o")])
    _, doc = read_report(tmp_path / "o" / "metrics.json")
    cfg = parse_config(doc["config"])
    assert cfg.sigma == 0.02 and cfg.seed == 7


def test_cli_sweep(tmp_path, capsys):
    assert main(["sweep", "N", "8", "10", "--preset", "smoke", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "N=8" / "metrics.json").exists()
    assert len(capsys.readouterr().out.splitlines()) == 3


def test_cli_reports_bad_config(capsys):
    assert main(["run", "--num-clients", "3", "--num-attackers", "3"]) == 2
    assert "num_attackers" in capsys.readouterr().err


def test_cli_reports_missing_csv(capsys):
    assert main(["run", "--csv", "/nonexistent/data.csv"]) == 2


def test_csv_input(tmp_path):
    rng = np.random.default_rng(0)
    lines = ["f0,f1,f2,state,label"]
    for i in range(300):
        y = i % 2
        lines.append(f"{rng.normal(y * 3)},{rng.normal()},{rng.normal(-y)},s{i % 5},{'ab'[y]}")
    (tmp_path / "d.csv").write_text("\n".join(lines) + "\n")
    cfg = ExperimentConfig(csv_path=str(tmp_path / "d.csv"), group_column="state",
                           partition="uniform", num_clients=5, num_attackers=0, rounds=10,
                           learning_rate=1.0, smoothing_samples=50)
    rep = run(cfg).report
    assert rep.acc > 0.7
    grouped = cfg.replace(partition="by_group")
    assert math.isfinite(run(grouped).report.acc)
