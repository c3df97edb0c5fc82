import json
from pathlib import Path

import jsonschema
import pytest

from nlcc import cli

FIXTURES = Path(__file__).parent / "fixtures"
SCHEMA = cli.load_schema()


def small_config(name, mode):
    trials = 50 if name in ("smp-quantum", "intersection") else 200
    params = {"samples": 20} if name == "tsirelson" else {}
    if name == "lb-lindsey":
        params = {"n": 4, "samples": 200}
    return {"target": name, "mode": mode, "seed": 5, "trials": trials, "params": params}


ALL = [(name, mode) for name, t in cli.CATALOG.items() for mode in t.modes]


@pytest.mark.parametrize("name, mode", ALL)
def test_every_target_report_validates(name, mode):
    report = cli.run(small_config(name, mode))
    jsonschema.validate(report, SCHEMA)
    assert report["passed"]
    if mode == "exact":
        assert "radius" not in report["aggregate"]
    else:
        assert "radius" in report["aggregate"]


def test_catalog_contents():
    names = set(cli.CATALOG)
    for required in ("ghz", "chsh", "magic-square", "dj", "dj-nonlocal", "hm", "hm-nonlocal",
                     "intersection", "raz", "vandam", "pr-table", "detect-threshold"):
        assert required in names
    assert any(n.startswith("eq-") for n in names)
    assert any(n.startswith("smp-") for n in names)
    assert any(n.startswith("lb-") for n in names)


def test_catalog_defaults_validate():
    for name, t in cli.CATALOG.items():
        cfg = cli.validate_config({"target": name})
        assert set(cfg["params"]) == set(t.params)


def test_chsh_exact_value(capsys):
    assert cli.main(["run", "--config", str(FIXTURES / "chsh_exact.json")]) == cli.EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["aggregate"]["value"] == pytest.approx(0.8535533905932737, abs=1e-12)
    assert report["results"]["classical_value"] == "3/4"


def test_vandam_fixture(capsys):
    assert cli.main(["run", "--config", str(FIXTURES / "vandam_exact.json")]) == cli.EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["aggregate"]["value"] == 1.0
    assert report["ledger"]["nl_boxes"] == 2 * report["results"]["and_gates"] == 10
    assert report["ledger"]["classical_bits"] == 1


@pytest.mark.parametrize("cfg", [
    {"target": "chsh", "mode": "exact", "seed": 1},
    {"target": "chsh", "mode": "sampled", "seed": 1, "trials": 300},
    {"target": "intersection", "mode": "sampled", "seed": 99, "trials": 20},
    {"target": "vandam", "mode": "sampled", "seed": 4, "trials": 300, "params": {"p": 0.85}},
])
def test_determinism(cfg):
    assert cli.payload(cli.run(dict(cfg))) == cli.payload(cli.run(dict(cfg)))


def test_seed_changes_sampled_payload():
    a = cli.run({"target": "chsh", "mode": "sampled", "seed": 1, "trials": 100})
    b = cli.run({"target": "chsh", "mode": "sampled", "seed": 2, "trials": 100})
    assert cli.payload(a) != cli.payload(b)


@pytest.mark.parametrize("name, param", [("chsh", {}), ("pr-table", {"p": "0.85"}), ("swap-test", {})])
def test_exact_and_sampled_agree(name, param):
    ex = cli.run({"target": name, "mode": "exact", "params": param, "seed": 3})
    sa = cli.run({"target": name, "mode": "sampled", "params": param, "seed": 3, "trials": 4000})
    exact = ex["aggregate"]["value"]
    if name == "pr-table":
        exact = ex["reference"]["parity_success"]
    elif name == "swap-test":
        exact = ex["results"]["p_one"]
    assert abs(sa["aggregate"]["mean"] - exact) <= sa["aggregate"]["radius"] + 1e-3


@pytest.mark.parametrize("argv", [
    ["target", "no-such-target"],
    ["target", "dj", "--param", "n=3"],
    ["target", "dj", "--param", "bogus=1"],
    ["target", "chsh", "--mode", "wrong"],
    ["target", "dj", "--param", "n"],
    ["target", "chsh", "--seed", "-1"],
    ["target", "chsh", "--mode", "sampled", "--trials", "0"],
    ["run", "--config", "/nonexistent/config.json"],
])
def test_config_errors_exit_2(argv, capsys):
    assert cli.main(argv) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_error_message_names_field():
    with pytest.raises(cli.ConfigError, match="'n'"):
        cli.run({"target": "dj", "params": {"n": 6}})
    with pytest.raises(cli.ConfigError, match="target"):
        cli.run({"target": "nope"})
    with pytest.raises(cli.ConfigError, match="unknown config field"):
        cli.run({"target": "chsh", "colour": "blue"})


def test_failed_check_exit_3(capsys):
    # A single bisection step cannot locate the threshold to within 0.01.
    assert cli.main(["target", "detect-threshold", "--param", "iters=1"]) == cli.EXIT_CHECK
    captured = capsys.readouterr()
    assert "threshold" in captured.err
    assert json.loads(captured.out)["passed"] is False


def test_out_and_csv(tmp_path):
    out = tmp_path / "r.csv"
    code = cli.main(["target", "chsh", "--mode", "sampled", "--trials", "20", "--seed", "3",
                     "--out", str(out), "--format", "csv"])
    assert code == cli.EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("trial,") and len(lines) == 21
    out_json = tmp_path / "r.json"
    cli.main(["target", "lb-rank", "--out", str(out_json)])
    jsonschema.validate(json.loads(out_json.read_text()), SCHEMA)


def test_list_and_schema_commands(capsys):
    assert cli.main(["list"]) == 0
    listing = json.loads(capsys.readouterr().out)
    assert set(listing) == set(cli.CATALOG)
    assert cli.main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out) == SCHEMA


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"target": "chsh", "mode": "sampled", "trials": 50, "seed": 1}))
    cli.main(["run", "--config", str(cfg), "--seed", "9"])
    report = json.loads(capsys.readouterr().out)
    assert report["config"]["seed"] == 9
