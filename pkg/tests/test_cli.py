import json
from fractions import Fraction

import pytest

from degmag import cli, io
from degmag.config import ConfigError, RunConfig, env_overrides, load_config


# ------------------------------------------------------------------ config


def test_defaults_validate_and_hash_is_stable():
    a, b = load_config(environ={}), load_config(environ={})
    assert a.hash == b.hash and len(a.hash) == 16


def test_hash_ignores_scheduling_keys_only():
    base = load_config(environ={})
    assert load_config(overrides={"run": {"workers": 3, "out": "elsewhere"}}, environ={}).hash == base.hash
    assert load_config(overrides={"params": {"mu": 26.0}}, environ={}).hash != base.hash


def test_precedence_file_env_override(tmp_path):
    f = tmp_path / "c.toml"
    f.write_text("[params]\nmu = 30.0\nh = 0.5\n[branch]\neta_n = 5\n")
    env = {"DEGMAG__params__mu": "40.0", "DEGMAG__branch__window": "[1, 2]", "UNRELATED": "x"}
    cfg = load_config(f, {"params": {"h": 0.25}}, environ=env)
    assert cfg.get("params", "mu") == 40.0
    assert cfg.get("params", "h") == 0.25
    assert cfg.get("branch", "eta_n") == 5 and cfg.get("branch", "window") == [1, 2]
    assert cfg.source == str(f)


def test_env_override_parsing():
    assert env_overrides({"DEGMAG__ids__psi1": "[]", "DEGMAG__sweep__mode": "bulk"}) == \
        {"ids": {"psi1": []}, "sweep": {"mode": "bulk"}}
    with pytest.raises(ConfigError):
        env_overrides({"DEGMAG__nokey": "1"})


@pytest.mark.parametrize("over", [{"run": {"workers": -1}}, {"params": {"nu": 1}}, {"params": {"ell": -1}},
                                  {"params": {"mu": "big"}}, {"params": 3}])
def test_invalid_values_rejected(over):
    with pytest.raises(ConfigError):
        load_config(overrides=over, environ={})


def test_missing_and_malformed_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.toml", environ={})
    bad = tmp_path / "bad.toml"
    bad.write_text("[params\nmu = ")
    with pytest.raises(ConfigError):
        load_config(bad, environ={})


# ---------------------------------------------------------------------- io


def test_csv_roundtrip_and_prefix(tmp_path):
    p = io.write_csv(tmp_path / "t.csv", ["a", "b", "c"], [[0.1, True, "x"], [3, float("nan"), 2.0]], "abc", "op")
    header, rows = io.read_csv(p)
    assert header == ["schema", "config_hash", "version", "op_id", "a", "b", "c"]
    assert rows[0][:4] == [str(io.CSV_SCHEMA_VERSION), "abc", io.__version__, "op"]
    assert rows[0][4:] == ["0.1", "true", "x"] and rows[1][4:] == ["3", "nan", "2.0"]
    assert float(rows[0][4]) == 0.1
    with pytest.raises(ValueError):
        io.csv_text(["a"], [[1, 2]], "h", "op")


def test_summary_is_strict_json(tmp_path):
    import numpy as np

    p = io.write_summary(tmp_path / "s.json", "x", {"k": 1}, "ok", {"v": np.float64(np.inf), "a": np.arange(2)})
    doc = json.loads(p.read_text(), parse_constant=lambda c: pytest.fail(f"non-standard constant {c}"))
    assert doc["schema_version"] == io.JSON_SCHEMA_VERSION and doc["v"] == "inf" and doc["a"] == [0, 1]


# --------------------------------------------------------------------- CLI


def _run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path), "--workers", "1"])


def test_perturb_table(tmp_path):
    assert _run(tmp_path, "perturb") == 0
    header, rows = io.read_csv(tmp_path / "perturb.csv")
    assert len(rows) == 16
    col = {c: i for i, c in enumerate(header)}
    for r in rows:
        nu, ell = int(r[col["nu"]]), int(r[col["l"]])
        assert Fraction(r[col["omega2"]]) == Fraction((nu - 1) * ell * (ell + 1), 2)
    doc = json.loads((tmp_path / "perturb.json").read_text())
    assert doc["status"] == "ok" and doc["rows"] == 16 and "total_s" in doc["timings"]


def test_set_flag_changes_hash_and_rows(tmp_path):
    assert _run(tmp_path, "perturb", "--set", "perturb.nu=[3]", "--set", "perturb.ell=[0, 2]") == 0
    header, rows = io.read_csv(tmp_path / "perturb.csv")
    assert len(rows) == 2
    assert rows[0][1] != load_config(environ={}).hash


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("not toml [")
    assert _run(tmp_path, "perturb", "--config", str(bad)) == 2
    assert _run(tmp_path, "perturb", "--set", "nodot=1") == 2
    assert _run(tmp_path, "branch", "--set", "params.h=-1.0") == 2


def test_numerical_failure_exit_code(tmp_path):
    # exponential decay is only defined for even nu with l >= 1 wells; nu = 3 has no such regime
    assert _run(tmp_path, "fit-decay", "--set", "params.nu=3") == 3
    doc = json.loads((tmp_path / "fit_decay.json").read_text())
    assert doc["status"] == "numerical_failure" and doc["detail"]


def test_branch_output_independent_of_workers(tmp_path):
    outs = []
    for w in ("1", "2"):
        d = tmp_path / w
        assert cli.main(["branch", "--out", str(d), "--workers", w, "--set", "branch.eta_n=7"]) == 0
        outs.append((d / "branch.csv").read_bytes())
    assert outs[0] == outs[1]
    header, rows = io.read_csv(tmp_path / "1" / "branch.csv")
    assert header[4:] == cli.BRANCH_COLUMNS and len(rows) == 7 * 3


def test_verify_quick(tmp_path, capsys):
    assert _run(tmp_path, "verify", "--quick") == 0
    out = capsys.readouterr().out
    for tid in ("T1", "T2", "T3", "T4", "T5"):
        assert f"{tid} PASS" in out


def test_param_grid_coupling():
    cfg = load_config(overrides={"grid": {"nu": 3, "ell": 1, "W": [1.0, -1.0], "coupling": [2.0], "h": [0.1, 0.2]}},
                      environ={})
    grid = cli.param_grid(cfg)
    assert len(grid) == 4
    assert all(p.coupling == pytest.approx(2.0) for p in grid)
    assert isinstance(cfg, RunConfig)
