import csv
import json

import pytest

from fibqkd.cli import OUT_ENV, main


def _run(tmp_path, *extra):
    out = tmp_path / "out"
    code = main(["run", "--seed", "1", "--set", "target_pairs=2000", "--out", str(out), *extra])
    return code, out


def test_honest_run_passes_and_writes_outputs(tmp_path, capsys):
    code, out = _run(tmp_path, "--events", "jsonl", "--key")
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "pass" and report["keys_agree"]
    assert (out / "alice.key").read_text() == (out / "bob.key").read_text()
    assert (out / "alice.key.manifest.json").exists()
    assert len((out / "events.jsonl").read_text().splitlines()) > 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["config_hash"] == report["config_hash"] and m["runtime_seconds"] >= 0
    assert "verdict=pass" in capsys.readouterr().out


def test_intercepted_run_exits_one(tmp_path):
    code, out = _run(tmp_path, "--set", "eve=\"intercept-resend\"", "--set", "intercept_rate=1", "--set", "security_rate=0.5")
    assert code == 1
    assert json.loads((out / "report.json").read_text())["verdict"] == "compromised"


def test_inconclusive_run_exits_two(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--seed", "1", "--set", "target_pairs=40", "--out", str(out)]) == 2


def test_bad_config_writes_nothing(tmp_path, capsys):
    code, out = _run(tmp_path, "--set", "intercept_rate=2")
    assert code == 2 and not out.exists()
    assert "intercept_rate" in capsys.readouterr().err


def test_config_file_and_missing_seed(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"target_pairs": 500}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 2
    assert main(["run", "--config", str(tmp_path / "nope.json"), "--seed", "1"]) == 2
    cfg.write_text(json.dumps({"seed": 4, "target_pairs": 500, "security_rate": 0.2}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert main(["run", "--seed", "1", "--set", "nonsense", "--out", str(tmp_path / "c")]) == 2


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert main(["run", "--seed", "2", "--set", "target_pairs=500", "--set", "security_rate=0.2"]) == 0
    assert (tmp_path / "env" / "report.json").exists()


def test_sweep_writes_table(tmp_path):
    out = tmp_path / "s"
    code = main(["sweep", "--seed", "3", "--set", "target_pairs=400", "--set", "security_rate=0",
                 "--param", "alphabet_size", "--values", "2,4,8", "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(open(out / "sweep.csv")))
    assert [float(r["bits_per_pair"]) for r in rows] == [1, 2, 3]
    assert [r["seed"] for r in rows] == ["3", "4", "5"]
    assert len(json.loads((out / "sweep.json").read_text())["reports"]) == 3


def test_sweep_validates_every_point_first(tmp_path):
    out = tmp_path / "s"
    code = main(["sweep", "--seed", "3", "--param", "intercept_rate", "--values", "0,0.5,7", "--out", str(out)])
    assert code == 2 and not out.exists()


def test_verify_scheme_prints_table_and_rate(tmp_path, capsys):
    assert main(["verify-scheme", "--out", str(tmp_path / "v")]) == 0
    text = capsys.readouterr().out
    assert "13/48" in text and "5/16" in text and "ok" in text
    data = json.loads((tmp_path / "v" / "scheme.json").read_text())
    assert data["table"]["00"] == [3, 21, 34, 89]
    assert data["uniform_guess_success"] == "13/48"


def test_verify_scheme_reports_a_violating_table(capsys):
    bits = json.dumps({str(v): 0 for v in range(1, 56)})
    assert main(["verify-scheme", "--bits", bits, "--trials", "100"]) == 1
    assert "configuration=" in capsys.readouterr().out
    assert main(["verify-scheme", "--bits", "[1]"]) == 2


def test_spiral_spectrum_small(tmp_path, capsys):
    out = tmp_path / "sp"
    code = main(["spiral-spectrum", "--particles", "300", "--n-r", "64", "--out", str(out), "--field-csv"])
    assert code == 0
    peaks = json.loads((out / "peaks.json").read_text())
    assert peaks["all_fibonacci"] and peaks["peaks"]
    rows = list(csv.reader(open(out / "spectrum.csv")))
    assert rows[0] == ["m", "S"] and len(rows) == 202
    assert len(list(csv.reader(open(out / "field.csv")))) == 64 * 512 + 1
    assert (out / "manifest.json").exists()


def test_spiral_right_angle_gives_fourfold_peaks(tmp_path, capsys):
    code = main(["spiral-spectrum", "--particles", "300", "--n-r", "64", "--alpha", "90", "--out", str(tmp_path / "q")])
    assert code == 0
    peaks = json.loads((tmp_path / "q" / "peaks.json").read_text())["peaks"]
    assert peaks and all(p["m"] % 4 == 0 for p in peaks)


def test_spiral_aliasing_and_bad_alpha(tmp_path, capsys):
    out = tmp_path / "x"
    assert main(["spiral-spectrum", "--n-theta", "128", "--out", str(out)]) == 2
    assert not out.exists()
    with pytest.raises(SystemExit):
        main(["spiral-spectrum", "--alpha", "silver"])


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0 and "fibqkd" in capsys.readouterr().out
