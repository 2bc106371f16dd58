import json

import numpy as np
import pytest

from rieszsplit import cli
from rieszsplit.analysis import kadec_sets
from rieszsplit.rearrange import BudgetError

YELLOW = [-5, -4, -3, -1, 0, 2, 3, 4, 6, 7, 9, 10, 12, 13, 14, 16, 17, 19, 20, 21, 23, 24]
BLUE = [-6, -2, 1, 5, 8, 11, 15, 18, 22]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def sqrt2_partition(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "part.json"
    code = cli.main(["partition", "--lengths", "sqrt2inv,1-sqrt2inv", "--window", "-60:60",
                     "--out", str(path)])
    assert code == cli.EXIT_OK
    return path


def test_partition_reports_pass(sqrt2_partition):
    doc = json.loads(sqrt2_partition.read_text())
    assert doc["status"]["pass"]
    assert len(doc["sets"]) == 2


def test_partition_output_is_deterministic(tmp_path, sqrt2_partition):
    again = tmp_path / "again.json"
    cli.main(["partition", "--lengths", "sqrt2inv,1-sqrt2inv", "--window=-60:60",
              "--out", str(again)])
    assert again.read_bytes() == sqrt2_partition.read_bytes()


def test_verify_round_trip(capsys, sqrt2_partition):
    code, out, _ = run(capsys, "verify", str(sqrt2_partition))
    assert code == cli.EXIT_OK
    report = json.loads(out)
    assert report["pass"]
    assert all(s["identical"] for s in report["sets"])
    assert all(u["identical"] for u in report["unions"])


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lengths": ["1/2", "1/2"], "window": "-10:10"}))
    code, out, _ = run(capsys, "partition", "--config", str(cfg), "--lengths", "1/3,2/3")
    assert code == cli.EXIT_OK
    doc = json.loads(out)
    assert doc["window"] == cli.parse_window("-10:10", 0, 64).to_json()
    assert doc["spec"]["lengths"][0] != doc["spec"]["lengths"][1]


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lenghts": ["1/2", "1/2"]}))
    code, _, err = run(capsys, "partition", "--config", str(cfg))
    assert code == cli.EXIT_INPUT
    assert json.loads(err)["kind"] == "input"


@pytest.mark.parametrize("lengths", ["1/2,1/3", "abc,1/2", "1/2"])
def test_bad_specs_exit_4(capsys, lengths):
    code, _, err = run(capsys, "partition", "--lengths", lengths)
    assert code == cli.EXIT_INPUT


def test_tie_exits_3(capsys):
    code, _, err = run(capsys, "partition", "--lengths", "irr:0.5,irr:0.5")
    assert code == cli.EXIT_TIE
    assert json.loads(err)["kind"] == "precision"


def test_budget_exits_2(capsys, monkeypatch):
    def fail(*args, **kwargs):
        raise BudgetError("no block size met the budget", stage=2)
    monkeypatch.setattr(cli, "build_partition", fail)
    code, _, err = run(capsys, "partition", "--lengths", "1/2,1/2")
    assert code == cli.EXIT_BUDGET
    assert json.loads(err)["kind"] == "budget"


def test_malformed_verify_input(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "verify", str(bad))[0] == cli.EXIT_INPUT
    bad.write_text(json.dumps({"sets": []}))
    assert run(capsys, "verify", str(bad))[0] == cli.EXIT_INPUT


def test_figures_reproduce_first_split(capsys):
    code, out, _ = run(capsys, "figures", "--figure", "1")
    assert code == cli.EXIT_OK
    data = json.loads(out)
    by_color = {s["color"]: s["indices"] for s in data["sets"]}
    assert by_color["yellow"] == YELLOW
    assert by_color["blue"] == BLUE


def test_figure_two_splits_yellow(capsys):
    code, out, _ = run(capsys, "figures", "--figure", "2")
    assert code == cli.EXIT_OK
    data = json.loads(out)
    by_color = {s["color"]: set(s["indices"]) for s in data["sets"]}
    assert by_color["blue"] == set(BLUE)
    stage = data["stages"][0]
    assert set(stage["outer"]) == set(YELLOW)
    assert by_color["green"] | by_color["red"] == set(YELLOW)
    assert not by_color["green"] & by_color["red"]


def _set_file(tmp_path, sets):
    path = tmp_path / "sets.json"
    path.write_text(json.dumps({"sets": sets}))
    return str(path)


def test_integers_verify_as_orthonormal(tmp_path, capsys):
    z = np.arange(-600, 601, dtype=float)
    path = _set_file(tmp_path, [{"label": "Z", "length": "1", "frequencies": z.tolist()}])
    code, out, _ = run(capsys, "verify", path)
    assert code == cli.EXIT_OK
    gram = json.loads(out)["sets"][0]["gram"]
    for g in gram:
        assert abs(float(g["lambda_min"]) - 1) < 1e-10
        assert abs(float(g["lambda_max"]) - 1) < 1e-10


def test_kadec_union_is_an_expected_negative(tmp_path, capsys):
    first, second = kadec_sets(1000)
    union = np.sort(np.concatenate([first, second]))
    path = _set_file(tmp_path, [{"label": "union", "length": "1",
                                 "frequencies": union.tolist()}])
    assert run(capsys, "verify", path)[0] == cli.EXIT_BUDGET
    code, out, _ = run(capsys, "verify", path, "--expect-fail")
    assert code == cli.EXIT_OK
    assert json.loads(out)["expected_negative"]
    good = _set_file(tmp_path, [{"label": "Z", "length": "1",
                                 "frequencies": np.arange(-300, 301.0).tolist()}])
    assert run(capsys, "verify", good, "--expect-fail")[0] == cli.EXIT_BUDGET


def test_parse_helpers():
    assert cli.parse_unions("none", 3) == []
    assert cli.parse_unions("1,2;2,3", 3) == [(1, 2), (2, 3)]
    with pytest.raises(cli.InputError):
        cli.parse_unions("1,4", 3)
    with pytest.raises(cli.InputError):
        cli.parse_window("5", 1e-30, 256)
