import json

import pytest

from roughwave import cli, suites
from roughwave.errors import CausticError


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("ROUGHWAVE_OUT", str(tmp_path / "env_out"))
    return tmp_path


def _cfg(path, text):
    path.write_text("schema_version = 1\n" + text)
    return str(path)


def test_run_flat_writes_artifacts(out, capsys):
    assert cli.main(["run-flat", "--out", str(out / "o")]) == 0
    d = out / "o" / "run-flat"
    rep = json.loads((d / "report.json").read_text())
    assert rep["passed"] and rep["subcommand"] == "run-flat"
    assert {"config_hash", "checks", "artifacts", "backend"} <= set(rep)
    assert "parametrix_j0.rwcol" in rep["artifacts"] and (d / "timings.json").exists()
    assert "PASS" in capsys.readouterr().out


def test_env_var_sets_default_output(out):
    assert cli.main(["strichartz-scaling"]) == 0
    assert (out / "env_out" / "strichartz-scaling" / "strichartz.csv").exists()


def test_report_is_byte_identical(out):
    for name in ("a", "b"):
        assert cli.main(["strichartz-scaling", "--out", str(out / name), "--seed", "3"]) == 0
    a = (out / "a" / "strichartz-scaling" / "report.json").read_bytes()
    b = (out / "b" / "strichartz-scaling" / "report.json").read_bytes()
    assert a == b


def test_strict_mode_exit_code(out):
    # the single-constant check is not met, so --strict turns the run into a failure
    assert cli.main(["strichartz-scaling", "--out", str(out), "--strict"]) == 1
    assert cli.main(["strichartz-scaling", "--out", str(out)]) == 0


def test_config_error_leaves_no_output(out, capsys):
    cfg = _cfg(out / "bad.toml", "[kernel]\nbogus = 1\n")
    assert cli.main(["kernel-decay", "--config", cfg, "--out", str(out / "o")]) == 2
    assert "kernel.bogus" in capsys.readouterr().err
    assert not (out / "o").exists()


def test_strichartz_needs_flat_metric(out):
    cfg = _cfg(out / "c.toml", "[metric]\nfamily = 'bump'\nepsilon = 0.05\n")
    assert cli.main(["strichartz-scaling", "--config", cfg, "--out", str(out / "o")]) == 2
    assert not (out / "o").exists()


def test_module_error_reports_stage(out, monkeypatch, capsys):
    def boom(*a, **k):
        raise CausticError("flow map degenerate")

    monkeypatch.setattr(suites, "strichartz_scaling", boom)
    assert cli.main(["strichartz-scaling", "--out", str(out)]) == 3
    err = capsys.readouterr().err
    assert "stage strichartz" in err and "CausticError" in err


def test_empty_pairs_file(out, capsys):
    (out / "p.json").write_text("[]")
    cfg = _cfg(out / "c.toml", f"[lemma]\npairs_file = '{out / 'p.json'}'\n")
    assert cli.main(["verify-lemma", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "verify-lemma" / "lemma.csv").read_text() == ",".join(cli.LEMMA_COLUMNS) + "\n"
    assert "warning" in capsys.readouterr().err
    rep = json.loads((out / "verify-lemma" / "report.json").read_text())
    assert rep["warnings"]


def test_explicit_pairs(out):
    (out / "p.json").write_text(json.dumps([{"t": 0.1, "x": [0, 0, 0], "s": 0.6, "y": [0.5, 0.1, 0]}]))
    cfg = _cfg(out / "c.toml", f"[lemma]\npairs_file = '{out / 'p.json'}'\nn_omega = 10\n")
    assert cli.main(["verify-lemma", "--config", cfg, "--out", str(out)]) == 0
    lines = (out / "verify-lemma" / "lemma.csv").read_text().splitlines()
    assert len(lines) == 11


def test_kernel_decay_and_plot_data(out):
    cfg = _cfg(out / "c.toml", "[kernel]\nj = 4\ntau_min = 1.6\nn_tau = 3\nratio_ceiling = 12.0\n")
    assert cli.main(["kernel-decay", "--config", cfg, "--out", str(out)]) == 0
    header = (out / "kernel-decay" / "kernel_decay.csv").read_text().splitlines()[0]
    assert header == "j,dt,region,absK,majorant,ratio"
    assert cli.main(["emit-plot-data", str(out / "kernel-decay"), "--out", str(out)]) == 0
    lines = (out / "plot_data" / "plot_kernel_decay.csv").read_text().splitlines()
    assert lines[0].startswith("run,epsilon,config_hash,j,dt,region,absK,majorant")
    assert len(lines) == 1 + 3 * 9


def test_plot_data_schema_mismatch(out, capsys):
    d = out / "run"
    d.mkdir()
    (d / "kernel_decay.csv").write_text("j,dt,region,absQ,majorant,ratio\n")
    assert cli.main(["emit-plot-data", str(d), "--out", str(out)]) == 2
    assert "absK" in capsys.readouterr().err


def test_plot_data_missing_report(out):
    assert cli.main(["emit-plot-data", str(out / "nope"), "--out", str(out)]) == 2


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        cli.main(["--help"])
    text = capsys.readouterr().out
    for name in cli.SUBCOMMANDS:
        assert name in text


def test_run_perturbed(out):
    cfg = _cfg(out / "c.toml", "[metric]\nfamily = 'bump'\nepsilon = 0.05\n[parametrix]\nlevels = [0]\nn_probes = 2\n")
    assert cli.main(["run-perturbed", "--config", cfg, "--out", str(out), "--strict"]) == 0
    rep = json.loads((out / "run-perturbed" / "report.json").read_text())
    assert "optical_field.rwcol" in rep["artifacts"]
    assert rep["checks"]["parametrix.gradient_vs_fd"]["passed"]


def test_verify_eikonal_flat(out):
    cfg = _cfg(out / "c.toml", "[eikonal]\nn_geodesics = 6\n")
    assert cli.main(["verify-eikonal", "--config", cfg, "--out", str(out), "--strict"]) == 0
