import json

import numpy as np
import pytest
import yaml

from fbm_lab.__main__ import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, run
from fbm_lab.utils.loader_and_saver import load_paths_csv


def read(path):
    return json.loads(path.read_text())


def test_constants_report(tmp_path):
    out = tmp_path / "constants.json"
    assert run(["constants", "--H", "0.3", "--out", str(out)]) == EXIT_OK
    report = read(out)
    assert report["schema_version"] == "1"
    assert report["subcommand"] == "constants"
    assert report["config"]["H"] == 0.3
    assert report["results"]["theta"]["lower"] < report["results"]["theta"]["upper"]


def test_constants_csv_on_stdout(capsys):
    assert run(["constants", "--H", "0.3", "--format", "csv"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "name,lower,upper,point"
    assert any(line.startswith("theta,") for line in lines)


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--format", "xml"],
        ["simulate", "--replicas", "0"],
        ["unknown"],
        ["verify", "--suite", "nope"],
    ],
)
def test_usage_errors(argv):
    assert run(argv) == EXIT_USAGE


@pytest.mark.parametrize(
    "argv",
    [
        ["localtime", "--H", "0.6", "--d", "2"],
        ["moments", "--H", "0.6", "--d", "2"],
        ["intersect", "--H", "0.7", "--d", "3"],
        ["rkhs", "--action", "norm"],
    ],
)
def test_domain_errors(argv):
    assert run(argv) == EXIT_DOMAIN


def test_suite_listing(capsys):
    assert run(["verify", "--list"]) == EXIT_OK
    names = capsys.readouterr().out.split()
    assert names == ["core", "moments", "rkhs", "intersection"]


def test_configuration_file(tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text(yaml.safe_dump({"model": {"H": 0.25}, "experiment": {"seed": 9}}))
    out = tmp_path / "constants.json"
    assert run(["constants", "-config", str(config), "--out", str(out)]) == EXIT_OK
    report = read(out)
    assert report["config"]["H"] == 0.25
    assert report["config"]["seed"] == 9


def test_reports_are_reproducible(tmp_path):
    argv = ["moments", "--H", "0.3", "--m-max", "2", "--budget", "2000"]
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    assert run([*argv, "--out", str(first)]) == EXIT_OK
    assert run([*argv, "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    results = read(first)["results"]
    assert [record["m"] for record in results["unit_time"]] == [1, 2]


def test_simulate_csv(tmp_path):
    out = tmp_path / "paths.csv"
    argv = ["simulate", "--process", "rl", "--n", "8", "--replicas", "2"]
    assert run([*argv, "--format", "csv", "--out", str(out)]) == EXIT_OK
    batch = load_paths_csv(out)
    assert batch.values.shape == (2, 9, 1)
    np.testing.assert_array_equal(batch.values[:, 0, 0], 0.0)


def test_localtime_report(tmp_path):
    out = tmp_path / "localtime.json"
    argv = ["localtime", "--H", "0.3", "--n", "16", "--replicas", "20"]
    assert run([*argv, "--out", str(out)]) == EXIT_OK
    results = read(out)["results"]
    assert results["summary"]["samples"] == 20
    assert len(results["tail"]) == 20


def test_intersect_report(tmp_path):
    out = tmp_path / "alpha.json"
    argv = ["intersect", "--H", "0.3", "--n", "16", "--replicas", "4"]
    assert run([*argv, "--out", str(out)]) == EXIT_OK
    assert len(read(out)["results"]["sample"]["values"]) == 4


def test_rkhs_norm_of_sampled_function(tmp_path):
    times = np.linspace(0.0, 1.0, 65)
    table = tmp_path / "f.csv"
    np.savetxt(table, np.column_stack([times, times**2]), delimiter=",", header="t,f")
    out = tmp_path / "norm.json"
    argv = ["rkhs", "--action", "norm", "--input", str(table), "--H", "0.3"]
    assert run([*argv, "--out", str(out)]) == EXIT_OK
    results = read(out)["results"]
    assert results["norm"] > 0.0
    assert 0.0 <= results["discretization"] < results["norm"]


def test_rkhs_demo(tmp_path):
    out = tmp_path / "demo.json"
    argv = ["rkhs", "--action", "demo", "--H", "0.3", "--n", "8", "--replicas", "2"]
    assert run([*argv, "--out", str(out)]) == EXIT_OK
    paths = read(out)["results"]["paths"]
    assert len(paths) == 2
    assert paths[0]["values"][0] == pytest.approx(0.0, abs=1e-12)
