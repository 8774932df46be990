import json
import subprocess
import sys

import numpy as np
import pytest

from trltsk.cli import main
from trltsk.data import load_dataset
from trltsk.pipeline import load_model, transform


def run(*args):
    return subprocess.run([sys.executable, "-m", "trltsk", *map(str, args)],
                          capture_output=True, text=True)


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def fit_dir(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert main(["fit", "--source", str(synth_dir / "source.csv"),
                 "--target", str(synth_dir / "target.csv"),
                 "--truth", str(synth_dir / "target_truth.csv"),
                 "--rules", "3", "--dim", "4", "--out", str(out)]) == 0
    return out


def test_synth_files(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--seed", "3", "--n-per-class", "50", "--out", str(tmp_path / name)]) == 0
    for f in ("source.csv", "target.csv", "target_truth.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    src = load_dataset(tmp_path / "a" / "source.csv", "label")
    assert src.n == 100 and src.d == 2
    assert load_dataset(tmp_path / "a" / "target.csv").labels is None


def test_fit_outputs(fit_dir):
    report = json.loads((fit_dir / "report.json").read_text())
    assert len(report["iterations"]) == 5
    assert report["config"]["dim"] == 4 and report["config_origin"]["dim"] == "flag"
    assert set(report["baselines"]) == {"knn_raw", "knn_standardized", "knn_pca"}
    assert report["target_accuracy"] == pytest.approx(0.93)
    assert (fit_dir / "timings.json").is_file()
    load_model(fit_dir / "model.json")


def test_fit_bundled_defaults(tmp_path):
    res = run("fit", "--synthetic", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["iterations"]) == 5
    assert report["config"]["rules"] == 3 and report["config"]["dim"] == 9


def test_labeled_target_file_is_held_out(synth_dir, fit_dir, tmp_path):
    tgt = load_dataset(synth_dir / "target.csv").features
    truth = (synth_dir / "target_truth.csv").read_text().split()[1:]
    lines = ["f1,f2,label"] + [f"{float(a)!r},{float(b)!r},{t}" for (a, b), t in zip(tgt, truth)]
    (tmp_path / "t.csv").write_text("\n".join(lines) + "\n")
    assert main(["fit", "--source", str(synth_dir / "source.csv"), "--target", str(tmp_path / "t.csv"),
                 "--rules", "3", "--dim", "4", "--out", str(tmp_path / "o")]) == 0
    a = json.loads((tmp_path / "o" / "report.json").read_text())
    b = json.loads((fit_dir / "report.json").read_text())
    assert a["iterations"] == b["iterations"]
    assert a["target_accuracy"] == b["target_accuracy"]


def test_transform_and_eval_match_report(synth_dir, fit_dir, tmp_path, capsys):
    model = fit_dir / "model.json"
    for dom, f in (("source", "source.csv"), ("target", "target.csv")):
        assert main(["transform", "--model", str(model), "--data", str(synth_dir / f),
                     "--domain", dom, "--out", str(tmp_path / f"z_{dom}.csv")]) == 0
    zs = load_dataset(tmp_path / "z_source.csv")
    assert zs.n == 200 and zs.d == 4
    src = load_dataset(synth_dir / "source.csv", "label")
    assert np.array_equal(zs.features, transform(load_model(model), src, "source"))
    capsys.readouterr()
    assert main(["eval", "--train", str(tmp_path / "z_source.csv"), "--labels", str(synth_dir / "source.csv"),
                 "--test", str(tmp_path / "z_target.csv"),
                 "--truth", str(synth_dir / "target_truth.csv")]) == 0
    acc = json.loads(capsys.readouterr().out)["accuracy"]
    assert acc == json.loads((fit_dir / "report.json").read_text())["target_accuracy"]


def test_config_file_precedence(synth_dir, tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"rules": 2, "lambda": 0.1, "dim": 3, "iters": 2}))
    assert main(["fit", "--synthetic", "--config", str(tmp_path / "c.json"), "--dim", "2",
                 "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["config"]["rules"] == 2 and report["config"]["lam"] == 0.1
    assert report["config"]["dim"] == 2 and report["config_origin"]["dim"] == "flag"
    assert report["config_origin"]["rules"] == "file"


def test_grid_file(tmp_path):
    grid = {"rules": [2, 3], "dim": [2], "alpha": [0.1, 1.0], "beta": [0.01], "lambda": [0.01]}
    (tmp_path / "g.json").write_text(json.dumps(grid))
    assert main(["fit", "--synthetic", "--iters", "1", "--grid-file", str(tmp_path / "g.json"),
                 "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    g = report["grid"]
    assert g["criterion"] == "target_accuracy" and g["n_configs"] == 4
    assert g["best"]["accuracy"] == max(r["accuracy"] for r in g["results"])
    assert report["config"] == g["best"]["config"]


def test_invalid_alpha_exit_code(tmp_path):
    res = run("fit", "--synthetic", "--alpha", "0", "--out", tmp_path)
    assert res.returncode == 2
    assert res.stderr.startswith("error[input]:") and "alpha > 0" in res.stderr
    assert len(res.stderr.strip().splitlines()) == 1


def test_missing_and_malformed_inputs(tmp_path):
    (tmp_path / "bad.csv").write_text("f1,label\nx,1\n")
    assert run("fit", "--source", tmp_path / "bad.csv", "--target", tmp_path / "bad.csv",
               "--out", tmp_path / "o").returncode == 2
    assert run("fit", "--out", tmp_path / "o").returncode == 2
    assert run("transform", "--model", tmp_path / "nope.json", "--data", tmp_path / "bad.csv",
               "--domain", "source", "--out", tmp_path / "z.csv").returncode == 2


def test_numerical_failure_exit_code(monkeypatch, tmp_path, capsys):
    from trltsk import cli
    from trltsk.solver import SolverError

    def boom(*args, **kwargs):
        raise SolverError("a is not numerically positive definite (minimum eigenvalue -1.000e-03)")

    monkeypatch.setattr(cli, "fit", boom)
    assert cli.main(["fit", "--synthetic", "--out", str(tmp_path)]) == 3
    err = capsys.readouterr().err
    assert err.startswith("error[numerical]:") and len(err.strip().splitlines()) == 1
