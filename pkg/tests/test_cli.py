import json

import pytest

import cli
from errors import ConfigurationError, InvariantViolation
from run_config import RunConfig, parse_config, serialize_config


# ===== Formatting =====

@pytest.mark.parametrize(
    "value,text",
    [
        (2.0, "2"),
        (-0.0, "0"),
        (0.1, "0.1"),
        (1.0 / 3.0, "0.3333333333333333"),
        (True, "1"),
        (False, "0"),
        (7, "7"),
        (1e20, "1e+20"),
        (-2.5e-7, "-2.5e-07"),
    ],
)
def test_format_float(value, text):
    assert cli.format_float(value) == text


# ===== Config =====

def test_parse_valid_eigs_config():
    cfg = parse_config('{"mode":"eigs","domain":{"a":0,"b":1},"s":0.25,"n_int":128,"m":8,"k":3}')
    assert cfg == RunConfig(mode="eigs", s=0.25, n_int=128, m=8, k=3)
    assert cfg.method == "cholesky" and cfg.rhs == "one"


def test_parse_sweep_zero_defaults():
    cfg = parse_config('{"mode":"sweep-zero","deltas":[0.2,0.1],"s":0.25,"m":8}')
    assert cfg.deltas == (0.2, 0.1)
    assert cfg.k == 5
    assert cfg.n_int is None


@pytest.mark.parametrize(
    "text,fragment",
    [
        ('{"mode":"eigs","s":1.5,"n_int":16,"m":2}', "'s'"),
        ('{"mode":"eigs","s":0.5,"n_int":16,"m":2,"colour":1}', "colour"),
        ('{"mode":"eigs","s":0.5,"n_int":16}', "'m'"),
        ('{"mode":"sweep-zero","s":0.5,"m":4,"deltas":[0.1,0.2]}', "descending"),
        ('{"mode":"sweep-infty","s":0.5,"n_int":8,"ms":[8,8]}', "ascending"),
        ('{"mode":"solve","s":0.5,"n_int":8,"m":2,"rhs":"cos_1"}', "cos_1"),
        ('{"mode":"solve","s":0.5,"n_int":8,"m":2,"method":"lu"}', "method"),
        ('{"mode":"fit","s":0.5}', "mode"),
        ("{not json", "JSON"),
    ],
)
def test_parse_config_errors(text, fragment):
    with pytest.raises(ConfigurationError) as exc:
        parse_config(text)
    assert fragment in str(exc.value)


def test_missing_field_names_mode():
    with pytest.raises(ConfigurationError, match="sweep-infty.*'ms'"):
        parse_config('{"mode":"sweep-infty","s":0.5,"n_int":8}')


@pytest.mark.parametrize(
    "cfg",
    [
        RunConfig(mode="solve", a=-1.0, b=2.0, s=0.3, n_int=12, m=3, rhs="sin_2", scale=0.5, rescaled=True, method="cg"),
        RunConfig(mode="sweep-zero", s=0.25, m=8, deltas=(0.2, 0.1, 0.05), k=3, output="out/zero.csv"),
        RunConfig(mode="sweep-infty", s=0.25, n_int=64, ms=(8, 64, 4096)),
        RunConfig(mode="constants", s_values=(0.25, 0.5), N=(1, 3)),
    ],
)
def test_config_round_trip(cfg):
    text = serialize_config(cfg)
    assert parse_config(text) == cfg
    assert serialize_config(parse_config(text)) == text


# ===== Runs =====

def _read_csv(path):
    return path.read_text(encoding="utf-8").split("\n")


def test_constants_mode_row(tmp_path):
    out = tmp_path / "constants.csv"
    cfg = RunConfig(mode="constants", s_values=(0.5,), N=(1,), output=str(out))
    assert cli.run(cfg) == 0
    lines = _read_csv(out)
    assert lines[0] == "N,s,c_ns,kappa,sigma,gamma"
    assert lines[1] == "1,0.5,0.3183098861837907,3.141592653589793,2,2"
    assert lines[-1] == ""


def test_solve_with_zero_load(tmp_path):
    out = tmp_path / "solve.csv"
    cfg = RunConfig(mode="solve", s=0.4, n_int=10, m=2, rhs="zero", output=str(out))
    assert cli.run(cfg) == 0
    lines = [l for l in _read_csv(out) if l]
    assert lines[0] == "i,x,u"
    assert len(lines) == 12
    assert all(l.split(",")[2] == "0" for l in lines[1:])
    assert lines[1] == "0,0,0" and lines[-1] == "10,1,0"


def test_solve_writes_sidecar(tmp_path, monkeypatch):
    monkeypatch.setenv("NSOLVE_WRITE_METADATA", "1")
    out = tmp_path / "solve.csv"
    assert cli.run(RunConfig(mode="solve", s=0.4, n_int=10, m=2, output=str(out))) == 0
    meta = json.loads((tmp_path / "solve.csv.json").read_text(encoding="utf-8"))
    assert meta["metadata"]["mode"] == "solve"
    assert meta["diagnostics"]["minimal_energy"] < 0
    assert meta["config"]["n_int"] == 10


def test_sidecar_can_be_disabled(tmp_path, monkeypatch):
    monkeypatch.setenv("NSOLVE_WRITE_METADATA", "false")
    out = tmp_path / "solve.csv"
    assert cli.run(RunConfig(mode="solve", s=0.4, n_int=10, m=2, output=str(out))) == 0
    assert not (tmp_path / "solve.csv.json").exists()


def test_eigs_mode_is_deterministic(tmp_path):
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    base = RunConfig(mode="eigs", s=0.25, n_int=40, m=4, k=3)
    assert cli.run(RunConfig(**{**base.__dict__, "output": str(first)})) == 0
    assert cli.run(RunConfig(**{**base.__dict__, "output": str(second)})) == 0
    assert first.read_bytes() == second.read_bytes()
    lines = [l for l in _read_csv(first) if l]
    assert lines[0] == "delta,h,m,s,k,lambda,rescaled,reference,abs_err,rel_err"
    assert [l.split(",")[4] for l in lines[1:]] == ["1", "2", "3"]


def test_sweep_zero_acceptance_run(tmp_path):
    out = tmp_path / "zero.csv"
    cfg = RunConfig(mode="sweep-zero", s=0.25, m=8, deltas=(0.2, 0.1, 0.05, 0.025), k=3, output=str(out))
    assert cli.run(cfg) == 0
    rows = [l.split(",") for l in _read_csv(out)[1:] if l]
    k1 = [r for r in rows if r[4] == "1"]
    # rows ascend in δ, so the smallest horizon comes first
    assert float(k1[0][0]) == 0.025
    assert float(k1[0][9]) <= 0.02


def test_check_mode(tmp_path):
    out = tmp_path / "check.csv"
    cfg = RunConfig(mode="check", s=0.25, n_int=16, ms=(8, 16, 32, 64), output=str(out))
    assert cli.run(cfg) == 0
    lines = [l for l in _read_csv(out) if l]
    assert lines[0] == "delta,ratio,C_delta,pass"
    assert all(l.endswith(",1") for l in lines[1:])


def test_invariant_violation_exits_with_two(tmp_path, monkeypatch):
    def broken(config):
        raise InvariantViolation("test_invariant", "forced")

    monkeypatch.setitem(cli._RUNNERS, "constants", broken)
    cfg = RunConfig(mode="constants", s_values=(0.5,), output=str(tmp_path / "c.csv"))
    assert cli.run(cfg) == 2


def test_failed_checks_exit_with_two(tmp_path, monkeypatch):
    monkeypatch.setitem(cli._RUNNERS, "constants", lambda config: ([], cli.CONSTANTS_COLUMNS, {}, ["trend"]))
    cfg = RunConfig(mode="constants", s_values=(0.5,), output=str(tmp_path / "c.csv"))
    assert cli.run(cfg) == 2
    assert _read_csv(tmp_path / "c.csv")[0] == "N,s,c_ns,kappa,sigma,gamma"


def test_unexpected_runner_error_exits_with_one(tmp_path, monkeypatch):
    def broken(config):
        raise ValueError("alpha and beta must be greater than -1")

    monkeypatch.setitem(cli._RUNNERS, "constants", broken)
    cfg = RunConfig(mode="constants", s_values=(0.5,), output=str(tmp_path / "c.csv"))
    assert cli.run(cfg) == 1


def test_sweep_infty_mode_for_large_order(tmp_path):
    out = tmp_path / "infty.csv"
    cfg = RunConfig(mode="sweep-infty", s=0.6, n_int=16, ms=(16, 64, 256), k=2, output=str(out))
    assert cli.run(cfg) == 0
    lines = [l for l in _read_csv(out) if l]
    assert lines[0] == "delta,h,m,s,k,lambda,rescaled,reference,abs_err,rel_err"
    assert len(lines) == 1 + 3 * 3


def test_unwritable_output_exits_with_one(tmp_path):
    blocker = tmp_path / "file.txt"
    blocker.write_text("x", encoding="utf-8")
    cfg = RunConfig(mode="constants", s_values=(0.5,), output=str(blocker / "out.csv"))
    assert cli.run(cfg) == 1


def test_missing_output_exits_with_one():
    assert cli.run(RunConfig(mode="constants", s_values=(0.5,))) == 1


def test_main_checks_mode_and_overrides_output(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"mode": "constants", "s": [0.25, 0.75], "N": [1, 2]}), encoding="utf-8")
    out = tmp_path / "table.csv"
    assert cli.main(["constants", "--config", str(config), "--output", str(out)]) == 0
    assert len([l for l in _read_csv(out) if l]) == 5
    assert cli.main(["solve", "--config", str(config), "--output", str(out)]) == 1
    assert cli.main(["constants", "--config", str(tmp_path / "missing.json")]) == 1
