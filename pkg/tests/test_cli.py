import json
from pathlib import Path

import numpy as np
import pytest

from inrlab.cli import main
from inrlab.modelfile import load_model
from inrlab.rng import Rng
from inrlab.signal_io import AudioClip, ImageGrid, load_pgm_ppm, save_pgm_ppm, save_wav


@pytest.fixture
def files(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    x = np.linspace(0, 1, 16)
    save_pgm_ppm(ImageGrid(np.outer(x, 1 - x) * 3), tmp_path / "img.pgm")
    save_pgm_ppm(ImageGrid(Rng(0).random((8, 8, 3))), tmp_path / "rgb.ppm")
    save_pgm_ppm(ImageGrid(np.full((8, 8), 0.25)), tmp_path / "flat.pgm")
    save_wav(AudioClip(8000, 0.5 * np.sin(np.arange(128) / 3.0)), tmp_path / "tone.wav")
    return tmp_path


SMALL = {
    "fit": ["--signal", "img.pgm", "--hidden", "8,8", "--steps", "20"],
    "pyramid-fit": ["--signal", "img.pgm", "--levels", "2", "--patch", "4", "--hidden", "8",
                    "--steps", "10", "--coarse-steps", "20"],
    "mire-select": ["--signal", "img.pgm", "--dictionary", "relu,sine", "--depth", "2", "--width", "8",
                    "--trial-steps", "5", "--final-steps", "5"],
    "fresh-select": ["--signal", "tone.wav", "--hidden", "16,16"],
    "meta-fit": ["--hidden", "8", "--outer-steps", "5", "--tasks-per-batch", "2", "--eval-tasks", "3"],
    "analyze-riesz": ["--atom", "gaussian"],
    "probe-spectral-bias": ["--hidden", "8", "--steps", "20", "--every", "5", "--n", "128", "--f-hi", "8"],
    "probe-harmonics": [],
}


def outputs(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.mark.parametrize("command", sorted(SMALL))
def test_commands_rerun_byte_identical(files, command):
    args = [command, *SMALL[command], "--seed", "3"]
    assert main(args + ["--out-dir", "a"]) == 0
    assert main(args + ["--out-dir", "b"]) == 0
    a, b = outputs(files / "a"), outputs(files / "b")
    assert a and a == b
    assert sorted(p.name for p in files.iterdir()) == ["a", "b", "flat.pgm", "img.pgm", "rgb.ppm", "tone.wav"]


def test_fit_outputs(files):
    assert main(["fit", *SMALL["fit"], "--out-dir", "o"]) == 0
    rows = (files / "o" / "metrics.csv").read_text().splitlines()
    assert rows[0] == "step,loss,psnr" and len(rows) == 21
    assert rows[1].startswith("1,") and rows[1].endswith(",")
    assert load_pgm_ppm(files / "o" / "reconstruction.pgm").shape == (16, 16)
    _, _, meta = load_model(files / "o" / "model.inr")
    assert meta["config"]["steps"] == 20


def test_eval_reproduces_training_reconstruction(files):
    main(["fit", *SMALL["fit"], "--out-dir", "o"])
    assert main(["eval", "--model", "o/model.inr", "--out-dir", "e"]) == 0
    assert (files / "e" / "reconstruction.pgm").read_bytes() == (files / "o" / "reconstruction.pgm").read_bytes()
    assert main(["eval", "--model", "o/model.inr", "--width", "40", "--height", "24", "--out-dir", "big"]) == 0
    assert load_pgm_ppm(files / "big" / "reconstruction.pgm").shape == (24, 40)


def test_eval_on_listed_coordinates(files):
    main(["fit", *SMALL["fit"], "--out-dir", "o"])
    (files / "pts.csv").write_text("x0,x1\n0,0\n0.5,-0.25\n")
    assert main(["eval", "--model", "o/model.inr", "--coords", "pts.csv", "--out-dir", "e"]) == 0
    lines = (files / "e" / "values.csv").read_text().splitlines()
    assert len(lines) == 3


def test_constant_image_upsamples_to_constant(files):
    args = ["fit", "--signal", "flat.pgm", "--atom", "relu", "--hidden", "8", "--steps", "1000",
            "--lr", "0.01", "--out-dir", "o"]
    assert main(args) == 0
    assert main(["eval", "--model", "o/model.inr", "--width", "32", "--height", "32", "--out-dir", "e"]) == 0
    v = load_pgm_ppm(files / "e" / "reconstruction.pgm").values
    # the 4x grid reaches past the outermost training samples, where a relu net only stays near constant
    assert np.all(np.abs(v - 0.25) <= 3 / 255)


def test_color_and_audio_fits(files):
    assert main(["fit", "--signal", "rgb.ppm", "--hidden", "8", "--steps", "3", "--out-dir", "c"]) == 0
    assert (files / "c" / "reconstruction.ppm").exists()
    assert main(["fit", "--audio", "tone.wav", "--hidden", "8", "--steps", "3", "--out-dir", "w"]) == 0
    assert (files / "w" / "reconstruction.wav").exists()


def test_harmonics_report(files):
    assert main(["probe-harmonics", "--alpha", "0.5,1,0.25,0.1", "--omega", "4", "--out-dir", "h"]) == 0
    rows = (files / "h" / "harmonics.csv").read_text().splitlines()[1:]
    assert [int(r.split(",")[0]) for r in rows] == [0, 4, 8, 12]


def test_riesz_line(files, capsys):
    assert main(["analyze-riesz", "--atom", "sinc", "--out-dir", "r"]) == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    assert line.startswith("sinc: riesz (A=") and "B=" in line and "pou=" in line


def test_fresh_single_candidate_echoed(files):
    cand = json.dumps([{"name": "only", "atom": "sine", "scheme": "siren", "w0": 20}])
    assert main(["fresh-select", "--signal", "tone.wav", "--candidates", cand, "--hidden", "8",
                 "--out-dir", "f"]) == 0
    rows = (files / "f" / "fresh.csv").read_text().splitlines()
    assert len(rows) == 2 and rows[1].startswith("only,") and rows[1].endswith(",1")


@pytest.mark.parametrize("command", sorted(SMALL))
def test_dump_config_round_trips(files, command, capsys):
    assert main([command, *SMALL[command], "--dump-config"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    (files / "c.json").write_text(json.dumps(cfg))
    assert main([command, "--config", "c.json", "--dump-config"]) == 0
    assert json.loads(capsys.readouterr().out) == cfg


def test_flags_override_config_file(files, capsys):
    (files / "c.json").write_text(json.dumps({"steps": 7, "signal": "img.pgm"}))
    main(["fit", "--config", "c.json", "--steps", "9", "--dump-config"])
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["steps"] == 9 and cfg["signal"] == "img.pgm"


@pytest.mark.parametrize("args,code", [
    (["fit", "--signal", "missing.pgm"], 2),
    (["fit", "--signal", "img.pgm", "--bogus", "1"], 1),
    (["fit", "--signal", "img.pgm", "--encoding", "nope"], 1),
    (["fit", "--signal", "img.pgm", "--steps", "-1"], 1),
    (["fit", "--signal", "img.pgm", "--config", "bad.json"], 1),
    (["fit", "--signal", "img.pgm", "--config", "unknown.json"], 1),
    (["fit", "--signal", "notes.txt"], 2),
    (["eval", "--model", "corrupt.inr"], 2),
    (["fit", "--signal", "img.pgm", "--hidden", "32,32", "--steps", "50", "--lr", "1000"], 3),
    (["analyze-riesz", "--atom", "relu", "--max-window", "64"], 3),
])
def test_exit_codes(files, args, code, capsys):
    (files / "bad.json").write_text("{not json")
    (files / "unknown.json").write_text(json.dumps({"colour": 1}))
    (files / "notes.txt").write_text("hello")
    main(["fit", *SMALL["fit"], "--out-dir", "m"])
    data = bytearray((files / "m" / "model.inr").read_bytes())
    data[len(data) // 2] ^= 0x10
    (files / "corrupt.inr").write_bytes(bytes(data))
    capsys.readouterr()
    assert main([*args, "--out-dir", "x"]) == code
    if code == 2 and "missing.pgm" in args:
        assert "missing.pgm" in capsys.readouterr().err


def test_task_mismatch_rejected(files):
    (files / "c.json").write_text(json.dumps({"task": "eval"}))
    assert main(["fit", "--signal", "img.pgm", "--config", "c.json"]) == 1
