import json

import pytest

from heatload.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def noiseless(tmp_path_factory):
    d = tmp_path_factory.mktemp("noiseless")
    assert run("generate", "--preset", "noiseless", "-o", d) == 0
    return d


def test_generate_writes_dataset(tmp_path):
    assert run("generate", "--days", 3, "--seed", 4, "-o", tmp_path) == 0
    for name in ("consumption.csv", "temperature.csv", "true_load.csv", "config.json",
                 "effective_config_generate.json", "manifest_generate.json"):
        assert (tmp_path / name).is_file()
    manifest = json.loads((tmp_path / "manifest_generate.json").read_text())
    assert manifest["complete"] and "consumption.csv" in manifest["files"]
    assert json.loads((tmp_path / "config.json").read_text())["rng_seed"] == 4


def test_generate_refuses_to_overwrite(tmp_path, capsys):
    assert run("generate", "--days", 2, "-o", tmp_path) == 0
    before = (tmp_path / "consumption.csv").read_bytes()
    assert run("generate", "--days", 2, "--seed", 1, "-o", tmp_path) == 1
    assert "refusing to overwrite" in capsys.readouterr().err
    assert (tmp_path / "consumption.csv").read_bytes() == before
    assert run("generate", "--days", 2, "--seed", 1, "-o", tmp_path, "--force") == 0
    assert (tmp_path / "consumption.csv").read_bytes() != before


@pytest.mark.parametrize("argv", [
    ["generate", "--days", "0"],
    ["generate", "--preset", "nope"],
    ["analyze", "--max-lag", "0"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(tmp_path, argv, noiseless):
    with pytest.raises(SystemExit) as exc:
        main(argv + ["-o", str(tmp_path), "--data", str(noiseless)] if argv[0] == "analyze"
             else argv + ["-o", str(tmp_path)])
    assert exc.value.code == 2


def test_config_file_precedence(tmp_path):
    conf = tmp_path / "gen.conf"
    conf.write_text("# generator settings\ndays = 2\nseed = 9\n")
    assert run("generate", "--config", conf, "--seed", 3, "-o", tmp_path / "a") == 0
    cfg = json.loads((tmp_path / "a" / "effective_config_generate.json").read_text())
    assert cfg["days"] == 2 and cfg["seed"] == 3
    conf.write_text("colour = blue\n")
    with pytest.raises(SystemExit) as exc:
        run("generate", "--config", conf, "-o", tmp_path / "b")
    assert exc.value.code == 2


def test_analyze_outputs(tmp_path, noiseless):
    assert run("analyze", "--data", noiseless, "--max-lag", 30, "-o", tmp_path) == 0
    doc = json.loads((tmp_path / "correlograms.json").read_text())
    assert set(doc) >= {"accumulated", "load", "temperature", "cross_correlation"}
    assert len(doc["load"]["parcor"]["coefficients"]) == 31
    assert (tmp_path / "rolling.json").is_file()
    for name, width in (("correlograms.dat", 9), ("decomposition.dat", 5)):
        rows = (tmp_path / name).read_text().splitlines()[1:]
        for row in rows:
            fields = row.split()
            assert len(fields) == width
            [float(v) for v in fields[1:]]


def test_missing_input_is_an_error(tmp_path, capsys):
    assert run("train", "--data", tmp_path / "nowhere", "-o", tmp_path) == 1
    assert "not found" in capsys.readouterr().err


def test_forecast_without_model_is_an_error(tmp_path, noiseless, capsys):
    assert run("forecast", "--data", noiseless, "-o", tmp_path) == 1
    assert "model file not found" in capsys.readouterr().err


@pytest.mark.slow
def test_noiseless_train_forecast_evaluate(tmp_path, noiseless):
    assert run("train", "--data", noiseless, "--trace", "-o", tmp_path) == 0
    trace = json.loads((tmp_path / "trace_w0.json").read_text())
    assert all(b <= a for a, b in zip(trace["history"], trace["history"][1:]))
    assert run("forecast", "--data", noiseless, "-o", tmp_path) == 0
    report = json.loads((tmp_path / "report_w0.json").read_text())
    assert report["mode"] == "recursive" and len(report["predicted_load"]) == 24
    lines = (tmp_path / "forecast_w0.dat").read_text().splitlines()
    assert len(lines) == 25 and len(lines[1].split()) == 3
    assert run("evaluate", "-o", tmp_path) == 0
    ev = json.loads((tmp_path / "evaluation.json").read_text())
    assert ev["n_windows"] == 1
    assert ev["mape_percent"]["mean"] <= 1.0
