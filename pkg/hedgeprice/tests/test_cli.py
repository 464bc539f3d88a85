import csv
import json

import pytest

from experiments.runner.common import _fmt
from experiments.runner.run import main
from hedgeprice.market_geometry import move_set_preset
from hedgeprice.payoffs import make_payoff
from hedgeprice.pricing import price


@pytest.fixture(autouse=True)
def _no_env_out_dir(monkeypatch):
    monkeypatch.delenv("HEDGE_OUT_DIR", raising=False)


def _write(tmp_path, cfg):
    path = tmp_path / f"{cfg.get('name', 'cfg')}.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def _report(out, name):
    with open(out / name / "report.json", encoding="utf-8") as f:
        return json.load(f)


def test_census_command(tmp_path, capsys):
    cfg = _write(tmp_path, {"name": "c3", "command": "census", "d": 3, "points": [["3/10", "2/5", "9/20"]]})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    result = _report(out, "c3")["result"]
    assert result["count"] == 58
    assert result["cutting_planes"] == 14
    assert result["points"][0]["count"] == 14
    assert result["points"][0]["lower_bound_family"] == 2
    assert (out / "c3" / "census_d3.json").exists()
    assert "58 full-dimensional simplexes" in capsys.readouterr().out


def test_converge_writes_csv(tmp_path):
    cfg = _write(tmp_path, {"name": "conv", "command": "converge", "n_range": [1, 3]})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    with open(out / "conv" / "convergence.csv", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [r["N"] for r in rows] == ["1", "2", "3"]
    assert len(rows[0]["upper"].split(".")[1]) == 10


def test_reruns_are_identical(tmp_path):
    cfg = _write(tmp_path, {"name": "p", "command": "price", "N": 4})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    first = (out / "p" / "report.json").read_text(encoding="utf-8")
    assert main(["--config", cfg, "--out", str(out)]) == 0
    assert (out / "p" / "report.json").read_text(encoding="utf-8") == first
    result = json.loads(first)["result"]
    assert result["upper"] >= result["lower"]


def test_command_line_overrides_config(tmp_path):
    cfg = _write(tmp_path, {"name": "sv", "command": "price", "N": 3, "side": "upper"})
    out = tmp_path / "out"
    assert main(["strategy-verify", "--config", cfg, "--out", str(out)]) == 0
    report = _report(out, "sv")
    assert report["command"] == "strategy-verify"
    assert report["result"]["upper"]["worst_slack"] >= -1e-9
    assert "lower" not in report["result"]


def test_limit_gaussian_named_simplex(tmp_path):
    cfg = _write(tmp_path, {"name": "g", "command": "limit-gaussian", "simplex": "chi_minus"})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    assert _report(out, "g")["result"]["price"] == pytest.approx(0.1666309412, abs=1e-7)


def test_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("HEDGE_OUT_DIR", str(tmp_path / "env"))
    cfg = _write(tmp_path, {"name": "b", "command": "boyle-sweep", "N": 2, "rhos": [-1.0, 0.0, 1.0]})
    assert main(["--config", cfg]) == 0
    assert (tmp_path / "env" / "b" / "boyle.csv").exists()


def test_dry_run(tmp_path, capsys):
    cfg = _write(tmp_path, {"name": "dry", "N": 5})
    assert main(["price", "--config", cfg, "--out", str(tmp_path), "--dry-run"]) == 0
    printed = capsys.readouterr().out
    assert '"command": "price"' in printed
    assert not (tmp_path / "dry").exists()


@pytest.mark.parametrize(
    "cfg",
    [
        {"name": "bad", "command": "price", "N": 0},
        {"name": "bad", "command": "price", "strike": 1},
        {"name": "bad", "command": "converge", "n_range": [5, 2]},
        {"name": "bad"},
    ],
)
def test_invalid_config_exits_2(tmp_path, capsys, cfg):
    assert main(["--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    assert main(["price", "--config", str(tmp_path / "nope.json")]) == 2


def test_pricing_error_exits_1(tmp_path, capsys):
    cfg = _write(tmp_path, {"name": "e", "command": "price", "move_set": {"points": [[1, 0], [0, 1]]}})
    assert main(["--config", cfg, "--out", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().out.strip().splitlines()[-1])["error"]
    assert err["type"] == "TooFewPoints"
    assert err["command"] == "price"


def test_price_defaults_to_unscaled_payoff(tmp_path):
    cfg = _write(tmp_path, {"name": "raw", "command": "price", "N": 4})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    report = _report(out, "raw")
    assert report["config"]["payoff"]["scaling"] == "none"
    expected = price(move_set_preset("chi1"), make_payoff("max_option", {"K": 1}), 4)
    assert report["result"]["upper"] == pytest.approx(expected.upper, abs=1e-12)
    assert report["result"]["lower"] == pytest.approx(expected.lower, abs=1e-12)


def test_converge_defaults_to_sqrt_n(tmp_path, capsys):
    cfg = _write(tmp_path, {"name": "conv", "command": "converge", "n_range": [1, 2]})
    assert main(["--config", cfg, "--out", str(tmp_path), "--dry-run"]) == 0
    assert json.loads(capsys.readouterr().out.split("\n", 2)[2])["payoff"]["scaling"] == "sqrt_n"


def test_negated_and_shifted_payoff(tmp_path):
    payoff = {"kind": "max_option", "params": {"K": 1}, "negate": True, "shift": 0.5}
    cfg = _write(tmp_path, {"name": "neg", "command": "price", "N": 3, "payoff": payoff})
    out = tmp_path / "out"
    assert main(["--config", cfg, "--out", str(out)]) == 0
    result = _report(out, "neg")["result"]
    plain = price(move_set_preset("chi1"), make_payoff("max_option", {"K": 1}), 3)
    assert result["lower"] == pytest.approx(0.5 - plain.upper, abs=1e-12)
    assert result["upper"] == pytest.approx(0.5 - plain.lower, abs=1e-12)


@pytest.mark.parametrize("value, text", [(-0.0, "0.0000000000"), (-1e-13, "0.0000000000"), (-0.25, "-0.2500000000"), (1, 1)])
def test_fixed_decimals_have_no_negative_zero(value, text):
    assert _fmt(value) == text
