import json

import numpy as np
import pytest

from hybrident.cli import (
    ConfigError,
    RunManifest,
    emit_config,
    main,
    parse_config,
    parse_config_text,
    reproduce_rows,
)
from hybrident.protocol import ExperimentConfig


def test_empty_config_gives_defaults(tmp_path):
    f = tmp_path / "c.ini"
    f.write_text("")
    cfg = parse_config(f)
    assert cfg == ExperimentConfig()
    assert (cfg.lam, cfg.squeeze_db, cfg.tap_r) == (0.1, 3.0, 0.03)
    assert cfg.phi == pytest.approx(np.pi)
    assert (cfg.eta_a, cfg.eta_b, cfg.eta_hom) == (0.76, 0.71, 0.85)


def test_range_error_names_key():
    with pytest.raises(ConfigError, match="eta_a"):
        parse_config_text("[efficiency]\neta_a = 1.2\n")


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match=r"line 3: unknown key 'lambda'"):
        parse_config_text("[source]\nsqueeze_db = 3\nlambda = 0.1\n")


def test_parse_error_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("lam = 0.1\nthis is not a key value pair\n")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("seed = 3\nseed = 4\n")
    with pytest.raises(ConfigError, match="cutoff_a"):
        parse_config_text("cutoff_a = five\n")


def test_keys_before_any_section_and_special_values():
    cfg = parse_config_text("lam = 0.2\nrouter_t = 0.3\n[efficiency]\nescape = 9, 1\neta_includes_homodyne = false\n")
    assert cfg.lam == 0.2 and cfg.router_t == 0.3
    assert cfg.escape == (9.0, 1.0) and cfg.eta_includes_homodyne is False
    assert parse_config_text("router_t = balanced\n").router_t is None


@pytest.mark.parametrize("cfg", [
    ExperimentConfig(),
    ExperimentConfig(lam=0.05, router_t=0.123456789, escape=(3.0, 0.25), herald="on_off", seed=99),
])
def test_emit_parse_round_trip(cfg):
    assert parse_config_text(emit_config(cfg)) == cfg


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "nope.ini")


def test_simulate_is_deterministic(tmp_path, capsys):
    digests = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["simulate", "--seed", "7", "--out", str(out)]) == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["seed"] == 7
        digests.append(man["outputs"])
    assert digests[0] == digests[1]
    data = json.loads((tmp_path / "a" / "simulate.json").read_text())
    assert data["corrected"]["negativity"] == pytest.approx(0.346583, abs=1e-6)


def test_manifest_verify(tmp_path):
    m = RunManifest({}, "0", 0, "x", 0.0)
    m.add(tmp_path / "f.txt", "hello")
    assert m.verify(tmp_path)
    (tmp_path / "f.txt").write_text("changed")
    assert not m.verify(tmp_path)


def test_cutoff_flags_override(tmp_path):
    assert main(["simulate", "--cutoff-a", "4", "--cutoff-b", "16", "--out", str(tmp_path)]) == 0
    cfg = parse_config(tmp_path / "config.ini")
    assert (cfg.cutoff_a, cfg.cutoff_b) == (4, 16)


def test_operational_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("eta_hom = 2\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "eta_hom" in capsys.readouterr().err


def test_sweep_rises_then_falls(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("phi = 0\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert rows[0] == "router_t,negativity,p_herald"
    neg = np.array([float(r.split(",")[1]) for r in rows[1:]])
    assert len(neg) == 21
    k = int(np.argmax(neg))
    assert 0 < k < 20
    assert np.all(np.diff(neg[: k + 1]) >= 0) and np.all(np.diff(neg[k:]) <= 0)


def test_wigner_writes_all_blocks(tmp_path, capsys):
    assert main(["wigner", "--points", "21", "--extent", "3", "--out", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.glob("wigner_*.csv"))
    assert len(names) == 9 + 4
    assert "wigner_number_00.csv" in names and "wigner_rotated_pm.csv" in names


def test_tomo_small_run(tmp_path, capsys):
    args = ["tomo", "--samples", "20000", "--tomo-dim-a", "2", "--tomo-dim-b", "6", "--max-iter", "30",
            "--out", str(tmp_path)]
    assert main(args) == 0
    summary = json.loads((tmp_path / "tomo.json").read_text())
    assert summary["samples"] == 20000 and summary["fidelity_with_truth"] > 0.8
    assert (tmp_path / "records.csv").read_text().startswith("theta_a,theta_b,x_a,x_b\n")


def test_reproduce_exit_code_follows_rows(tmp_path, capsys):
    rows = reproduce_rows(ExperimentConfig())
    assert [r.quantity for r in rows] == ["N_corr", "N_uncorr", "F_target", "W0", "F_max", "overlap(alpha=1)"]
    code = main(["reproduce", "--out", str(tmp_path)])
    assert code == (0 if all(r.ok for r in rows) else 2)
    text = capsys.readouterr().out
    assert "lambda sensitivity" in text and text.count("PASS") + text.count("FAIL") == 6
