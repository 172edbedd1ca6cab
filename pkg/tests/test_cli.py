import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from dysonlab.cli import EXPERIMENTS, list_experiments, main, parse_config, ConfigError, to_json


def write(tmp_path: Path, name: str, text: str) -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


DUC = "[experiment]\nname = duc\n[params]\nalpha = 2\nbeta = 0.5\nh = 3\n"


def test_duc_run(tmp_path):
    cfg = write(tmp_path, "duc.ini", DUC)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["results"]["unique"] == 1
    row = (tmp_path / "o" / "duc.csv").read_text().splitlines()[1].split(",")
    assert float(row[6]) == pytest.approx(3 - 2.8358, abs=1e-4)
    assert (tmp_path / "o" / "timing.json").exists()


def test_spectrum_at_zero_coupling(tmp_path):
    cfg = write(tmp_path, "s.ini", "[experiment]\nname = spectrum\n[params]\nalpha = 2\nbeta = 0\nh = 0.3, 1\n[options]\nm = 6\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "spectrum.csv").read_text().splitlines()[1:]
    for r in rows:
        h, lam = float(r.split(",")[2]), float(r.split(",")[4])
        assert lam == pytest.approx(2 * math.cosh(h), rel=1e-14)


def test_kakutani_verdict(tmp_path):
    cfg = write(tmp_path, "k.ini", "[experiment]\nname = kakutani\n[params]\nalpha = 2\nbeta = 0.5\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 0
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["results"]["2.0,0.5"]["verdict"] == "convergent: absolutely continuous"


def test_invariant_failure_exit_code(tmp_path):
    cfg = write(tmp_path, "c.ini", "[experiment]\nname = claim3\n[params]\nalpha = 2\nbeta = 0.3\nh = 3\n"
                                   "[window]\nL = 8\nR = 8\n[options]\nN_max = 8\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_warning_exit_code(tmp_path):
    cfg = write(tmp_path, "t.ini", "[experiment]\nname = tsequence\n[params]\nalpha = 2\nbeta = 0.3\nh = 1\n"
                                   "[window]\nL = 6\nR = 6\n[options]\nn_max = 4\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 3


@pytest.mark.parametrize("text,line,col", [
    ("[experiment]\nname = duc\n[params]\nalpha = 2\nbeta = oops\nh = 1\n", 5, 8),
    ("[experiment]\nname = nothing\n", 2, 8),
    ("alpha = 2\n", 1, 1),
    ("[experiment]\nname = duc\n[params]\nalpha = 2\nbeta = 1\nh = 1\nbogus line\n", 7, 1),
    ("[experiment]\nname = tsequence\n[params]\nalpha = 2\nbeta = 0.3\nh = 1\n[options]\nwidth = 3\n", 8, 9),
])
def test_parse_errors_have_positions(tmp_path, capsys, text, line, col):
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert (e.value.line, e.value.col) == (line, col)
    cfg = write(tmp_path, "bad.ini", text)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert f"line {line}, col {col}" in capsys.readouterr().err


def test_catalog():
    assert len(EXPERIMENTS) == 9
    text = list_experiments()
    assert text == list_experiments()
    for name in EXPERIMENTS:
        assert f"{name}\n  claim: " in text


def test_json_floats_keep_17_digits():
    assert to_json(0.1) == "0.10000000000000001"
    assert json.loads(to_json({"a": [1.0 / 3, True, None]}))["a"][0] == 1.0 / 3
    assert to_json(float("nan")) == '"nan"'


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "dysonlab", "list"], capture_output=True, text=True, check=True)
    assert out.stdout == list_experiments()


def test_seed_override_and_reproducibility(tmp_path):
    text = ("[experiment]\nname = tsequence\nseed = 3\n[params]\nalpha = 2\nbeta = 0.3\nh = 3\n"
            "[window]\nL = 6\nR = 6\n[options]\nn_max = 4\nbackend = mc\nsweeps = 400\nburn_in = 40\n")
    cfg = write(tmp_path, "mc.ini", text)
    main(["run", str(cfg), "--out", str(tmp_path / "a")])
    main(["run", str(cfg), "--out", str(tmp_path / "b")])
    main(["run", str(cfg), "--out", str(tmp_path / "c"), "--seed", "4"])
    a = (tmp_path / "a" / "summary.json").read_text()
    assert a == (tmp_path / "b" / "summary.json").read_text()
    c = json.loads((tmp_path / "c" / "summary.json").read_text())
    assert c["seed"] == 4 and c["config"]["experiment"]["seed"] == 4
    assert (tmp_path / "a" / "tsequence.csv").read_text() != (tmp_path / "c" / "tsequence.csv").read_text()
