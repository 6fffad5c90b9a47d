import json

import pytest

from anosov_lab import cli


def write(tmp_path, cfg, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


LIVSIC = {"schema_version": 1, "experiment": "livsic", "params": {"n_samples": 5}}


def test_bad_n_side_names_the_field(tmp_path, capsys):
    cfg = {"schema_version": 1, "experiment": "norms", "grid": {"n_side": 100}}
    assert cli.main(["validate", "--config", write(tmp_path, cfg)]) == 2
    err = capsys.readouterr().err
    assert "grid.n_side" in err and "power of two" in err


def test_all_errors_reported(tmp_path):
    cfg = {"schema_version": 2, "experiment": "livsic", "grid": {"n_side": 7}, "bogus": 1,
           "params": {"n_samples": 0}}
    with pytest.raises(cli.ConfigError) as e:
        cli.resolve_config(cfg)
    msgs = " ".join(e.value.errors)
    for field in ("schema_version", "grid.n_side", "bogus", "params.n_samples"):
        assert field in msgs
    assert len(e.value.errors) >= 4


def test_unknown_param_rejected():
    with pytest.raises(cli.ConfigError) as e:
        cli.resolve_config({"schema_version": 1, "experiment": "mls", "params": {"PP": 3}})
    assert "PP" in e.value.errors[0]


def test_invalid_json(tmp_path, capsys):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert cli.main(["validate", "--config", str(p)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_defaults_filled():
    cfg = cli.resolve_config({"schema_version": 1, "experiment": "threshold"})
    assert cfg["params"]["P"] == 12
    assert cfg["grid"]["n_side"] == 256
    assert cfg["system"]["matrix"] == [[2, 1], [1, 1]]


def test_config_hash_ignores_output_location():
    a = cli.resolve_config(dict(LIVSIC, out="a"))
    b = cli.resolve_config(dict(LIVSIC, out="b"))
    assert cli.config_hash(a) == cli.config_hash(b)
    c = cli.resolve_config(dict(LIVSIC, seed=3))
    assert cli.config_hash(a) != cli.config_hash(c)


def test_run_writes_manifest_and_is_reproducible(tmp_path):
    path = write(tmp_path, LIVSIC)
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert cli.main(["livsic", "--config", path, "--out", str(out)]) == 0
        man = json.loads((out / "manifest.json").read_text())
        assert sorted(man["files"]) == sorted(p.name for p in out.iterdir())
        assert man["all_pass"] and man["checks"]["recovery_error"]["pass"]
        outs.append((out / "livsic.csv").read_bytes())
    assert outs[0] == outs[1]


def test_env_out_and_seed_override(tmp_path, monkeypatch):
    monkeypatch.setenv("ANOSOV_LAB_OUT", str(tmp_path / "env"))
    assert cli.main(["livsic", "--config", write(tmp_path, LIVSIC), "--seed", "7"]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()


def test_kind_mismatch(tmp_path, capsys):
    assert cli.main(["mls", "--config", write(tmp_path, LIVSIC), "--out", str(tmp_path)]) == 2
    assert "livsic" in capsys.readouterr().err


def test_failure_leaves_no_partial_output(tmp_path, monkeypatch, capsys):
    def boom(cfg):
        raise RuntimeError("solver blew up")

    monkeypatch.setitem(cli.RUNNERS, "livsic", boom)
    out = tmp_path / "o"
    assert cli.main(["livsic", "--config", write(tmp_path, LIVSIC), "--out", str(out)]) == 2
    assert list(out.iterdir()) == []
    assert "solver blew up" in capsys.readouterr().err


def test_failed_check_exit_code(tmp_path):
    cfg = {"schema_version": 1, "experiment": "livsic", "params": {"n_samples": 2, "tol": 1e-30}}
    assert cli.main(["livsic", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1


def test_threshold_run_with_plots(tmp_path):
    cfg = {"schema_version": 1, "experiment": "threshold", "grid": {"n_side": 64},
           "params": {"weight": 0.48, "P": 6, "expected_omega_plus": 0.5}}
    out = tmp_path / "o"
    assert cli.main(["threshold", "--config", write(tmp_path, cfg), "--out", str(out), "--plots"]) == 0
    assert (out / "threshold_bisection.svg").exists()
    man = json.loads((out / "manifest.json").read_text())
    assert "threshold_bisection.svg" in man["files"]


def test_plot_is_byte_stable(tmp_path):
    rep = tmp_path / "band_profile.csv"
    rep.write_text("j,b_j\n0,1.0\n1,0.5\n2,0.25\n3,0.125\n")
    a = cli.emit_plots(rep)[0].read_bytes()
    b = cli.emit_plots(rep)[0].read_bytes()
    assert a == b and b"<svg" in a


def test_plot_empty_report(tmp_path, capsys):
    rep = tmp_path / "block_decay.csv"
    rep.write_text("T,value\n")
    with pytest.raises(cli.PlotError, match="nothing to plot"):
        cli.emit_plots(rep)
    assert cli.main(["plot", "--report", str(rep)]) == 2


def test_plot_unknown_report(tmp_path):
    rep = tmp_path / "mystery.csv"
    rep.write_text("a\n1\n")
    with pytest.raises(cli.PlotError):
        cli.emit_plots(rep)
