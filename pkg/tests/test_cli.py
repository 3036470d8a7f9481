import csv
import json

import numpy as np
import pytest

from rdcarleman import cli
from rdcarleman.report import BoundReport


def _series_csv(path, m=8, n=16, rate=1.0):
    xs = np.arange(n) / n
    ts = np.arange(m) / m
    vals = np.exp(-rate * ts)[:, None] * np.sin(2 * np.pi * xs)[None, :]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "l", "value"])
        for k in range(m):
            for l in range(n):
                w.writerow([k, l, f"{vals[k, l]:.17g}"])
    return path


def test_no_command_is_usage_error(capsys):
    assert cli.main([]) == 2
    capsys.readouterr()


def test_run_small_preset(tmp_path, capsys):
    code = cli.main([
        "run", "fig4b_n16", "--outdir", str(tmp_path),
        "--set", "carleman.N_list=[1]",
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "R=1.49" in out
    assert (tmp_path / "run_summary.json").is_file()


def test_run_unknown_preset(capsys):
    assert cli.main(["run", "fig99"]) == 2
    assert "unknown preset" in capsys.readouterr().err


def test_run_malformed_override(capsys):
    assert cli.main(["run", "fig2", "--set", "nonsense"]) == 2
    assert "key=value" in capsys.readouterr().err


def test_audit_scope_passes(capsys):
    assert cli.main(["audit", "spectral"]) == 0
    out = capsys.readouterr().out
    assert "0 failed" in out
    assert "bound audit: spectral" in out


def test_audit_empty_scope(capsys):
    assert cli.main(["audit", ""]) == 2
    assert "empty audit scope" in capsys.readouterr().err


def test_audit_unknown_scope(capsys):
    assert cli.main(["audit", "bogus"]) == 2
    capsys.readouterr()


def test_audit_failure_exits_nonzero(monkeypatch, capsys):
    monkeypatch.setattr(
        cli, "audit_bounds",
        lambda scope: [BoundReport(name="forced", ok=False, margin=-1.0)],
    )
    assert cli.main(["audit", "all"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_resources_with_explicit_G(capsys):
    code = cli.main(["resources", "fig4b_n16", "--N", "1", "--eps", "0.1",
                     "--G", "0.2"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["query"]["prefactor_UinN"] == pytest.approx(0.147, rel=1e-12)
    assert payload["flags"]["R_D_below_1"] is True


def test_resources_without_stored_run(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)  # no runs/ directory here
    assert cli.main(["resources", "fig3", "--N", "2", "--eps", "0.1"]) == 2
    assert "run the preset first" in capsys.readouterr().err


def test_spectral_full_domain(tmp_path, capsys):
    path = _series_csv(tmp_path / "series.csv")
    assert cli.main(["spectral", str(path), "--theta", "4"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["mean_square_ratio"] == pytest.approx(1.0)
    assert payload["kinetic_energy_ratio"] == pytest.approx(1.0)
    assert payload["n"] == 16 and payload["m"] == 8


def test_spectral_time_window(tmp_path, capsys):
    path = _series_csv(tmp_path / "series.csv", rate=2.0)
    code = cli.main([
        "spectral", str(path), "--theta", "4", "--domain", "0,0.4999,0,1",
    ])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    # e^{-4t} weights on t = k/8: first four samples over all eight
    w = np.exp(-4.0 * np.arange(8) / 8.0)
    assert payload["mean_square_ratio"] == pytest.approx(
        w[:4].sum() / w.sum(), rel=1e-12
    )


def test_spectral_missing_file(capsys):
    assert cli.main(["spectral", "/no/such/file.csv", "--theta", "2"]) == 2
    capsys.readouterr()


def test_spectral_bad_header(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n0,0,1.0\n")
    assert cli.main(["spectral", str(path), "--theta", "2"]) == 2
    assert "expected header" in capsys.readouterr().err


def test_spectral_incomplete_grid(tmp_path, capsys):
    path = tmp_path / "holes.csv"
    path.write_text("k,l,value\n0,0,1.0\n1,1,2.0\n")
    assert cli.main(["spectral", str(path), "--theta", "1"]) == 2
    assert "incomplete grid" in capsys.readouterr().err


def test_spectral_domain_arity(tmp_path, capsys):
    path = _series_csv(tmp_path / "series.csv")
    assert cli.main([
        "spectral", str(path), "--theta", "4", "--domain", "0,1",
    ]) == 2
    assert "coordinate pair" in capsys.readouterr().err
