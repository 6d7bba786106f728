import csv
import datetime
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from coherent_capm import cli, spectral
from coherent_capm.scenarios import load_returns


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def csv_tables(text):
    """Parse ``--csv`` output into {title: [rows]}."""
    tables = {}
    for block in text.strip().split("\n\n"):
        lines = block.splitlines()
        title = lines[0][2:]
        tables[title] = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    return tables


def kv(rows):
    return {r["key"]: r["value"] for r in rows}


def write_single(tmp_path, values):
    p = tmp_path / "one.csv"
    start = datetime.date(2020, 1, 1)
    lines = ["date,X"] + [f"{start + datetime.timedelta(days=k)},{float(v)!r}" for k, v in enumerate(values)]
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


# ---------------------------------------------------------------- risk


def test_risk_tail_one_is_minus_mean(tmp_path, capsys):
    vals = [0.01, -0.02, 0.03, 0.005, -0.01]
    p = write_single(tmp_path, vals)
    code, out, _ = run(["risk", "--data", p, "--measure", "tail:1", "--csv"], capsys)
    assert code == 0
    row = csv_tables(out)["risk"][0]
    assert float(row["risk"]) == pytest.approx(-np.mean(vals), rel=1e-9)


def test_risk_portfolio(returns_csv, capsys):
    code, out, _ = run(["risk", "--data", returns_csv, "--portfolio", "0.5,0.5,0,0", "--csv"], capsys)
    assert code == 0
    rows = {r["asset"]: r for r in csv_tables(out)["risk"]}
    s = load_returns(returns_csv)
    want = spectral.risk_of(s.outcomes[:, :2] @ [0.5, 0.5], s.weights, spectral.Dirac(0.05))
    assert float(rows["portfolio"]["risk"]) == pytest.approx(want, rel=1e-9)


@pytest.mark.parametrize("argv", [
    ["risk", "--measure", "tail:2"],
    ["risk", "--gen", "boot:0,5"],
    ["risk", "--seed", "-1"],
    ["risk", "--seed", str(2**64)],
    ["risk", "--bogus"],
    ["optimize", "--method", "newton"],
    [],
])
def test_usage_errors_exit_2(returns_csv, capsys, argv):
    code, _, err = run(argv[:1] + ["--data", returns_csv] + argv[1:] if argv else argv, capsys)
    assert code == 2
    assert err


def test_data_errors_exit_4(tmp_path, capsys):
    code, _, err = run(["risk", "--data", tmp_path / "missing.csv"], capsys)
    assert code == 4 and "cannot open" in err
    bad = tmp_path / "bad.csv"
    bad.write_text("date,A\n2020-01-01,oops\n", encoding="utf-8")
    code, _, err = run(["risk", "--data", bad], capsys)
    assert code == 4 and "line 2" in err


def test_config_file_and_override(returns_csv, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"data": str(returns_csv), "measure": "tail:1", "csv": True}), encoding="utf-8")
    _, out1, _ = run(["risk", "--config", cfg], capsys)
    assert kv(csv_tables(out1)["run"])["measure"] == "tail:1"
    _, out2, _ = run(["risk", "--config", cfg, "--measure", "alpha:3"], capsys)
    assert kv(csv_tables(out2)["run"])["measure"] == "alpha:3"
    cfg.write_text("[1, 2]", encoding="utf-8")
    assert run(["risk", "--config", cfg], capsys)[0] == 2


def test_out_file(returns_csv, tmp_path, capsys):
    target = tmp_path / "report.txt"
    code, out, _ = run(["risk", "--data", returns_csv, "--out", target], capsys)
    assert code == 0 and out == ""
    assert target.read_text(encoding="utf-8").startswith("== run")


@pytest.mark.parametrize("gen", ["hist", "whist:0.97", "boot:3,200", "mc:300"])
def test_reproducible(returns_csv, capsys, gen):
    argv = ["risk", "--data", returns_csv, "--gen", gen, "--seed", "99"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert a == b and a


# ---------------------------------------------------------------- contrib


def test_contrib_cash_and_mc_agreement(tmp_path, capsys):
    g = np.random.default_rng(1)
    idx = g.normal(0.01, 0.05, 150)
    a = 0.9 * idx + g.normal(0, 0.02, 150)
    p = tmp_path / "c.csv"
    lines = ["date,A,CASH,IDX"] + [f"2010-01-01,{float(x)!r},0.0,{float(y)!r}" for x, y in zip(a, idx)]
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    code, out, _ = run(["contrib", "--data", p, "--index", "IDX", "--measure", "beta:4,2", "--csv",
                        "--draws", 20000, "--seed", 4], capsys)
    assert code == 0
    rows = {r["asset"]: r for r in csv_tables(out)["contributions"]}
    assert float(rows["CASH"]["reward_q"]) == 0.0
    for r in rows.values():
        if r["asset"] == "CASH":
            continue
        assert abs(float(r["contribution"]) - float(r["mc_contribution"])) <= 3 * float(r["mc_std_err"])


def test_contrib_needs_index(returns_csv, capsys):
    code, _, err = run(["contrib", "--data", returns_csv], capsys)
    assert code == 2 and "--index" in err
    code, _, err = run(["contrib", "--data", returns_csv, "--index", "NOPE"], capsys)
    assert code == 2


# ---------------------------------------------------------------- optimize / sml / equilibrium


def test_optimize_single_asset(tmp_path, capsys):
    vals = list(np.random.default_rng(2).normal(0.01, 0.05, 60))
    p = write_single(tmp_path, vals)
    code, out, _ = run(["optimize", "--data", p, "--measure", "tail:0.1", "--csv"], capsys)
    assert code == 0
    t = csv_tables(out)
    want = np.mean(vals) / spectral.risk_of(np.array(vals), np.full(60, 1 / 60), spectral.Dirac(0.1))
    assert float(kv(t["optimum"])["r_star"]) == pytest.approx(want, rel=1e-9)
    assert [float(r["reward"]) for r in t["frontier"]][2] == pytest.approx(want, rel=1e-9)


def test_optimize_reports_small_residual(returns_csv, capsys):
    code, out, _ = run(["optimize", "--data", returns_csv, "--index", "IDX", "--csv"], capsys)
    assert code == 0
    t = csv_tables(out)
    summary = kv(t["optimum"])
    assert [r["asset"] for r in t["strategy"]] == ["A", "B", "C"]
    s = load_returns(returns_csv)
    scale = np.abs(s.weights @ s.outcomes[:, :3]).max()
    assert float(summary["max_sml_residual"]) <= 1e-5 * scale


def test_optimize_nonconvergence_exit_3(returns_csv, capsys):
    code, _, err = run(["optimize", "--data", returns_csv, "--max-iter", 2], capsys)
    assert code == 3
    assert "iterations: 2" in err


def test_sml_table(returns_csv, capsys):
    code, out, _ = run(["sml", "--data", returns_csv, "--index", "IDX", "--measure", "beta:10,3", "--csv"], capsys)
    assert code == 0
    rows = {r["asset"]: r for r in csv_tables(out)["sml"]}
    assert float(rows["market"]["beta"]) == 1.0
    for a in "ABC":
        assert float(rows[a]["excess_p"]) == pytest.approx(float(rows[a]["beta_x_market_p"]), rel=1e-6)


def test_equilibrium(returns_csv, tmp_path, capsys):
    econ = tmp_path / "e.csv"
    econ.write_text("endowment,aversion\n100,2\n50,1\n", encoding="utf-8")
    code, out, _ = run(["equilibrium", "--data", returns_csv, "--index", "IDX", "--economy", econ,
                        "--market", "1,2,3", "--csv"], capsys)
    assert code == 0
    t = csv_tables(out)
    summary = kv(t["equilibrium"])
    r = float(summary["r_star"])
    k = (float(summary["expected_market_value"]) + float(summary["market_risk"])) / 100.0
    assert r * r + r == pytest.approx(k, rel=1e-8)
    alloc = t["allocations"]
    assert [float(x["A"]) for x in alloc] == [0.5, 0.5]
    assert run(["equilibrium", "--data", returns_csv, "--economy", econ, "--market", "1,2"], capsys)[0] == 2
    assert run(["equilibrium", "--data", returns_csv], capsys)[0] == 2


# ---------------------------------------------------------------- price


def _price(argv, capsys):
    code, out, err = run(argv + ["--csv"], capsys)
    assert code == 0, err
    return kv(csv_tables(out)["price"])


def test_price_constant_table(returns_csv, tmp_path, capsys):
    table = tmp_path / "flat.csv"
    table.write_text("0,3.25\n1000,3.25\n", encoding="utf-8")
    got = _price(["price", "--data", returns_csv, "--index", "IDX", "--underlier", "A", "--spot", 100,
                  "--payoff", "table", "--table", table, "--rstar", 0.4], capsys)
    assert float(got["nbc_price"]) == pytest.approx(3.25, rel=1e-12)
    assert float(got["empirical_price"]) == pytest.approx(3.25, rel=1e-12)


def test_price_zero_rstar_is_p_mean(returns_csv, capsys):
    got = _price(["price", "--data", returns_csv, "--index", "IDX", "--underlier", "A", "--spot", 100,
                  "--strike", 101, "--rstar", 0], capsys)
    assert got["nbc_price"] == got["p_mean"]
    assert float(got["adjustment_exact"]) == 0.0


def test_price_strike_zero_is_linear(returns_csv, tmp_path, capsys):
    table = tmp_path / "lin.csv"
    table.write_text("S1,F\n0,0\n1000,1000\n", encoding="utf-8")
    common = ["price", "--data", returns_csv, "--index", "IDX", "--underlier", "A", "--spot", 100, "--rstar", 0.3]
    call = _price(common + ["--strike", 0], capsys)
    lin = _price(common + ["--payoff", "table", "--table", table], capsys)
    assert float(call["nbc_price"]) == pytest.approx(float(lin["nbc_price"]), rel=1e-9)


def test_price_from_optimum(returns_csv, capsys):
    got = _price(["price", "--data", returns_csv, "--underlier", "B", "--spot", 50, "--strike", 50,
                  "--payoff", "put"], capsys)
    assert got["extreme_measure"] == "optimum"
    assert "empirical_price" not in got


def test_price_argument_errors(returns_csv, capsys):
    base = ["price", "--data", returns_csv, "--index", "IDX"]
    assert run(base + ["--spot", 100, "--strike", 1], capsys)[0] == 2
    assert run(base + ["--underlier", "A", "--strike", 1], capsys)[0] == 2
    assert run(base + ["--underlier", "A", "--spot", 100], capsys)[0] == 2
    assert run(base + ["--underlier", "A", "--spot", 100, "--payoff", "table"], capsys)[0] == 2
    assert run(base + ["--underlier", "Z", "--spot", 100, "--strike", 1], capsys)[0] == 2


def test_module_entry_point(returns_csv):
    proc = subprocess.run([sys.executable, "-m", "coherent_capm", "risk", "--data", str(returns_csv)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("== run")
