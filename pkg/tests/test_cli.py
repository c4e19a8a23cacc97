import subprocess
import sys

import numpy as np
import pytest

from freqbias.cli import main
from freqbias.datasets import load_dataset, save_dataset
from freqbias.metrics import write_features
from freqbias.spectral import read_spectrum_csv


def run_txt(out):
    return dict(line.split("=", 1) for line in (out / "run.txt").read_text().splitlines())


@pytest.fixture
def gray_dir(tmp_path, rng):
    d = tmp_path / "gray"
    save_dataset(rng.random((6, 16, 16)), d)
    return d


def test_spectrum(tmp_path, gray_dir):
    out = tmp_path / "o"
    assert main(["spectrum", str(gray_dir), "--out", str(out), "--windowed", "--threads", "2"]) == 0
    ps = read_spectrum_csv(out / "spectrum.csv")
    assert ps.mode == "display" and ps.shape == (16, 16)
    assert (out / "spectrum.png").exists()
    cfg = run_txt(out)
    assert cfg["windowed"] == "True" and cfg["threads"] == "2"


def test_corr_verify(tmp_path):
    out = tmp_path / "o"
    assert main(["corr-verify", "--out", str(out), "--k", "5", "--d", "16,32", "--N", "2000"]) == 0
    lines = (out / "corr.csv").read_text().splitlines()
    assert lines[0] == "k,d,du,dv,analytic_mag,mc_mag,stderr,N,seed,brute_mag"
    row = lines[1].split(",")
    assert row[:4] == ["5", "16", "1", "1"]
    assert float(row[4]) == pytest.approx(0.726576427067, abs=1e-12)
    assert abs(float(row[5]) - float(row[4])) < 4 * float(row[6])


def test_fid_levels_modes(tmp_path, rng):
    a, b = tmp_path / "a", tmp_path / "b"
    save_dataset(rng.random((8, 8, 8)), a)
    save_dataset(rng.random((8, 8, 8)), b)
    out = tmp_path / "o"
    assert main(["fid-levels", str(a), str(b), "--out", str(out),
                 "--cutoffs", "0,0.25,0.5", "--extractor", "pixel:2"]) == 0
    lines = (out / "fid_levels.csv").read_text().splitlines()
    assert lines[0] == "cutoff,value" and len(lines) == 4
    assert main(["fid-levels", str(a), "--true-split", "--out", str(tmp_path / "t"),
                 "--cutoffs", "0", "--extractor", "tanh:1:0.5"]) == 0
    assert len((tmp_path / "t" / "fid_levels.csv").read_text().splitlines()) == 2


def test_fid_levels_from_feature_files(tmp_path, rng):
    feats = tmp_path / "f"
    feats.mkdir()
    for i in range(2):
        write_features(rng.standard_normal((50, 3)), feats / f"a_{i:03d}.fset")
        write_features(rng.standard_normal((50, 3)) + 1.0, feats / f"b_{i:03d}.fset")
    out = tmp_path / "o"
    assert main(["fid-levels", "--extractor", f"file:{feats}", "--cutoffs", "0,0.1", "--out", str(out)]) == 0
    values = [float(line.split(",")[1]) for line in (out / "fid_levels.csv").read_text().splitlines()[1:]]
    assert all(v > 1.5 for v in values)


def test_fid_levels_usage_errors(tmp_path, gray_dir, capsys):
    out = str(tmp_path / "o")
    assert main(["fid-levels", str(gray_dir), "--out", out]) == 2
    assert main(["fid-levels", str(gray_dir), str(gray_dir), "--extractor", "vgg", "--out", out]) == 2
    assert main(["fid-levels", str(gray_dir), str(gray_dir), "--extractor", "pixel:x", "--out", out]) == 2
    assert "error" in capsys.readouterr().err


def test_shift_round_trip(tmp_path, rng):
    src = tmp_path / "src"
    imgs = np.round(rng.random((3, 8, 8)) * 255) / 255
    save_dataset(imgs, src)
    once, twice = tmp_path / "s1", tmp_path / "s2"
    assert main(["shift", str(src), "--out", str(once)]) == 0
    assert (once / "scale.txt").exists()
    shifted = load_dataset(once)
    sign = np.where(np.add.outer(np.arange(8), np.arange(8)) % 2 == 0, 1.0, -1.0)
    np.testing.assert_allclose(shifted, imgs * sign, atol=1 / 255)
    assert main(["shift", str(once), "--out", str(twice)]) == 0
    np.testing.assert_allclose(load_dataset(twice), imgs, atol=1 / 255)


def test_koch_and_waves(tmp_path):
    k = tmp_path / "k"
    assert main(["koch", "--out", str(k), "--level", "2", "--size", "64", "--count", "2", "--seed", "3"]) == 0
    imgs = load_dataset(k)
    assert imgs.shape == (2, 64, 64)
    assert (k / "manifest.txt").exists() and (k / "run.txt").exists()
    w = tmp_path / "w"
    assert main(["waves", "--out", str(w), "--m", "16", "--n", "16", "--u", "0.125", "--count", "3"]) == 0
    waves = load_dataset(w)
    assert waves.shape == (3, 16, 16)
    assert waves.min() < 0


def test_lr(tmp_path, gray_dir, capsys):
    out = tmp_path / "o"
    assert main(["lr", str(gray_dir), str(gray_dir), "--out", str(out)]) == 0
    assert capsys.readouterr().out.strip() == "0.00"
    assert (out / "lr.csv").read_text().splitlines()[0] == "lr"


def test_effective_filter(tmp_path):
    out = tmp_path / "o"
    assert main(["effective-filter", "--out", str(out), "--layer", "3", "--masks", "recorded"]) == 0
    assert (out / "effective_filter_l3_c0.csv").exists()
    out2 = tmp_path / "all"
    assert main(["effective-filter", "--out", str(out2)]) == 0
    assert sorted(p.name for p in out2.glob("*.csv")) == [f"effective_filter_l{i}_c0.csv" for i in range(1, 5)]


def test_mask_check(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["mask-check", "--out", str(out), "--trials", "10"]) == 0
    assert "stable_fraction=1.00" in capsys.readouterr().out
    header, row = (out / "mask_check.csv").read_text().splitlines()
    assert header == "epsilon,stable_fraction,measure_zero"


def test_missing_dataset_and_bad_threads(tmp_path, capsys):
    assert main(["spectrum", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["spectrum", "x", "--out", "y", "--threads", "0"])
    assert exc.value.code == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "freqbias", "corr-verify", "--out", str(tmp_path),
                           "--d", "8", "--N", "1000"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "corr.csv").exists()
