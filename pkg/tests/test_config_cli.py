import csv
import json
from pathlib import Path

import numpy as np
import pytest

from jumpfct import cli
from jumpfct import config as cfgmod
from jumpfct.analytic_core import Degenerate, Erlang, TwoPoint

ROOT = Path(__file__).resolve().parents[1]

SMALL = """
[spec]
boundary_s = 5.0

[spec.wiener]
mu = 1.0
sigma2 = 0.2
x0 = 0.0

[spec.jumps]
kind = two_point
a = 3.75
b = 3.75
eta = 0.5

[spec.renewals]
kind = exponential
lam = 0.2

[sim]
n_samples = 2000
horizon = auto
seed = 17

[grid]
t_max = 3.0
step = 0.05
"""


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_parse_and_build():
    exp = cfgmod.build(cfgmod.parse_ini(SMALL))
    assert isinstance(exp.spec.jumps, TwoPoint) and exp.spec.jumps.eta == 0.5
    assert exp.sim.seed == 17 and exp.sim.n_samples == 2000
    assert exp.sim.horizon > 0
    assert exp.grid[0] == pytest.approx(0.05) and exp.grid[-1] == pytest.approx(3.0)
    assert exp.n_max is None and exp.bandwidth == "auto"


def test_round_trip():
    raw = cfgmod.parse_ini(SMALL)
    again = cfgmod.parse_ini(cfgmod.dump_ini(raw))
    assert again == raw
    raw = cfgmod.figure1_raw(mu=1.5, eta=0.2)
    assert cfgmod.parse_ini(cfgmod.dump_ini(raw)) == raw


@pytest.mark.parametrize("name", sorted(p.name for p in (ROOT / "configs").glob("*.ini")))
def test_shipped_configs_load(name):
    exp = cfgmod.load(ROOT / "configs" / name)
    assert exp.sim.n_samples == 1_000_000
    assert isinstance(exp.spec.jumps, (Degenerate, TwoPoint))


def test_erlang_renewals_config():
    raw = cfgmod.parse_ini(SMALL)
    raw["spec.renewals"] = {"kind": "erlang", "lam": 0.5, "n": 3}
    exp = cfgmod.build(raw)
    assert isinstance(exp.spec.renewals, Erlang) and exp.spec.renewals.n == 3


@pytest.mark.parametrize(
    "section,key,value,where",
    [
        ("spec.wiener", "sigma2", -1.0, "spec.wiener.sigma2"),
        ("spec.jumps", "eta", 1.5, "spec.jumps.eta"),
        ("spec.jumps", "kind", "gaussian", "spec.jumps.kind"),
        ("sim", "n_samples", 0, "sim.n_samples"),
        ("spec.renewals", "lam", -0.2, "spec.renewals.lam"),
    ],
)
def test_invalid_fields_name_their_path(section, key, value, where):
    raw = cfgmod.parse_ini(SMALL)
    raw[section][key] = value
    with pytest.raises(cfgmod.ConfigError) as info:
        cfgmod.build(raw)
    assert info.value.path.startswith(where.rsplit(".", 1)[0])


def test_missing_section_and_bad_model():
    raw = cfgmod.parse_ini(SMALL)
    del raw["spec.wiener"]
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.build(raw)
    raw = cfgmod.parse_ini(SMALL)
    raw["spec.wiener"]["x0"] = 6.0  # start above the boundary
    with pytest.raises(cfgmod.ConfigError) as info:
        cfgmod.build(raw)
    assert info.value.path == "spec"
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.parse_ini("not an ini file")


def test_cli_exit_code_on_bad_config(tmp_path, capsys):
    path = write(tmp_path, SMALL.replace("sigma2 = 0.2", "sigma2 = zero"))
    assert cli.main(["bounds", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "spec.wiener.sigma2" in capsys.readouterr().err
    assert cli.main(["bounds", "--config", str(tmp_path / "missing.ini")]) == 2
    assert cli.main(["simulate", "--config", write(tmp_path, SMALL).as_posix(), "--seed", "-4"]) == 2


def test_cli_runtime_error_exit_code(tmp_path):
    # a horizon too short for the density to reach 0.99 mass
    text = SMALL.replace("horizon = auto", "horizon = 2.0").replace("t_max = 3.0", "t_max = 1.0")
    path = write(tmp_path, text)
    assert cli.main(["closeness", "--config", str(path), "--out", str(tmp_path / "c")]) == 3


def test_cli_bounds_files(tmp_path):
    path = write(tmp_path, SMALL.replace("kind = two_point", "kind = degenerate").replace("eta = 0.5", "eta = 1.0"))
    out = tmp_path / "b"
    assert cli.main(["bounds", "--config", str(path), "--out", str(out)]) == 0
    pdf = read_csv(out / "pdf_bound.csv")
    cdf = read_csv(out / "cdf_bound.csv")
    assert pdf[0] == ["t", "value"] and cdf[0] == ["t", "value", "attained_n"]
    assert len(pdf) == len(cdf) == 61
    # floats are written with full round-trip precision
    assert float(pdf[1][0]) == 0.05
    vals = np.array([float(r[1]) for r in cdf[1:]])
    assert np.all(np.diff(vals) >= 0)
    assert all(int(r[2]) >= 1 for r in cdf[1:])
    assert not list(out.glob(".*.tmp"))


def test_cli_simulate_is_reproducible(tmp_path):
    path = write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--config", str(path), "--out", str(a), "--samples", "500"]) == 0
    assert cli.main(["simulate", "--config", str(path), "--out", str(b), "--samples", "500"]) == 0
    assert (a / "samples.csv").read_text() == (b / "samples.csv").read_text()
    rows = read_csv(a / "samples.csv")
    assert rows[0] == ["time", "censored"] and len(rows) == 501
    summary = json.loads((a / "summary.json").read_text())
    assert summary["seed"] == 17 and summary["n_samples"] == 500
    assert read_csv(a / "kde.csv")[0] == ["t", "density"]
    assert read_csv(a / "km.csv")[0] == ["t", "cdf"]
    c = tmp_path / "c"
    assert cli.main(["simulate", "--config", str(path), "--out", str(c), "--samples", "500", "--seed", "18"]) == 0
    assert (a / "samples.csv").read_text() != (c / "samples.csv").read_text()


def test_cli_closeness(tmp_path):
    path = write(tmp_path, SMALL)
    out = tmp_path / "e"
    assert cli.main(["closeness", "--config", str(path), "--out", str(out), "--samples", "20000"]) == 0
    payload = json.loads((out / "closeness.json").read_text())
    assert payload["h"] == 0.01 and payload["n_samples"] == 20000
    assert 0.0 < payload["E"] < 1.0


@pytest.mark.slow
def test_cli_table1_smoke(tmp_path):
    out = tmp_path / "t1"
    assert cli.main(["table1", "--smoke", "--out", str(out)]) == 0
    rows = read_csv(out / "table1.csv")
    assert rows[0] == ["mu", "eta", "E_estimated", "E_paper", "relative_gap"]
    assert len(rows) == 21
    cells = {(float(r[0]), float(r[1])) for r in rows[1:]}
    assert cells == {(m, e) for m in cli.TABLE1_MU for e in cli.TABLE1_ETA}
    for r in rows[1:]:
        assert float(r[2]) > 0
