import csv
import json

import numpy as np
import pytest

from nsni.cli import main
from nsni.config import ConfigError, load_preset, parse_config


@pytest.mark.parametrize("name", ["config1", "config2"])
def test_presets_round_trip(name):
    cfg = load_preset(name)
    again = parse_config(cfg.dumps())
    assert again.dumps() == cfg.dumps()
    assert again.digest() == cfg.digest()


def test_preset_contents():
    c1, c2 = load_preset("config1"), load_preset("config2")
    assert (c1["link"]["n_spans"], c1["link"]["span_length_km"], c1["format"]["name"]) == (40, 120, "qpsk")
    assert (c2["link"]["n_spans"], c2["link"]["span_length_km"], c2["format"]["name"]) == (20, 100, "16qam")
    link = c2.link()
    assert link.n_spans == 20 and link.gamma * 1e3 == pytest.approx(1.317, abs=2e-3)
    assert c1.link().gamma * 1e3 == pytest.approx(1.50, abs=5e-3)


def test_empty_inputs(tmp_path):
    empty = tmp_path / "e.json"
    empty.write_text("")
    with pytest.raises(ConfigError, match="empty"):
        parse_config(empty)
    with pytest.raises(ConfigError, match="empty"):
        parse_config("   ")


def test_channel_overlap():
    with pytest.raises(ConfigError, match="channel overlap"):
        parse_config({"plan": {"symbol_rate_gbd": 49, "spacing_ghz": 40}})


@pytest.mark.parametrize("raw,match", [
    ({"link": {"spans": 3}}, "link.spans: unknown key"),
    ({"fibre": {}}, "unknown section"),
    ({"link": {"n_spans": 2.5}}, "link.n_spans: expected int"),
    ({"mc": {"ndfwm": 1}}, "mc.ndfwm: expected bool"),
    ({"link": {"n_spans": True}}, "got bool"),
    ({"link": {"mode": "auto"}}, "link.mode: must be one of"),
    ({"plan": {"powers_dbm": [0, 1]}}, "powers_dbm"),
    ({"plan": {"powers_dbm": [3, 1, 1]}}, "powers_dbm"),
])
def test_strict_validation(raw, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(raw)


def test_json_error_has_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "link": {,}\n}')
    with pytest.raises(ConfigError, match=r"bad.json:2:\d+"):
        parse_config(p)


def test_override_revalidates():
    cfg = load_preset("config2")
    assert cfg.override(plan__channels=3).plan().n_channels == 3
    with pytest.raises(ConfigError):
        cfg.override(plan__spacing_ghz=10.0, plan__channels=3)
    assert list(cfg.override(plan__powers_dbm=[-1, 1, 0.5]).powers_dbm) == [-1, -0.5, 0, 0.5, 1]


def test_explicit_points():
    cfg = parse_config({"format": {"name": "bpsk", "points": [[1, 0], [-1, 0]]}})
    con = cfg.constellation()
    assert con.size == 2 and np.allclose(abs(con.points), 1)


# CLI ---------------------------------------------------------------------


def test_cli_mi_gaussian(tmp_path, capsys):
    assert main(["mi", "--format", "gaussian", "--snr-db", "0", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "2.000"
    man = json.loads((tmp_path / "mi_manifest.json").read_text())
    assert man["mi_bits"] == pytest.approx(2.0)
    assert set(man["versions"]) >= {"nsni", "numpy", "scipy", "python"}


def test_cli_snr_deterministic_and_unimodal(tmp_path):
    args = ["snr", "--preset", "config2", "--channels", "1", "--samples", "8192", "--spans", "5",
            "--powers=-4:8:1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "snr.csv").read_bytes()
    assert a == (tmp_path / "b" / "snr.csv").read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a" / "snr.csv")))
    u = np.array([float(r["snr_u_db"]) for r in rows])
    k = int(np.argmax(u))
    assert 0 < k < len(u) - 1
    assert np.all(np.diff(u[:k + 1]) > 0) and np.all(np.diff(u[k:]) < 0)
    man = json.loads((tmp_path / "a" / "snr_manifest.json").read_text())
    assert man["config"]["plan"]["channels"] == 1 and man["config"]["link"]["n_spans"] == 5
    assert len(man["config_hash"]) == 16 and man["seeds"]["mc"] == 0


def test_cli_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("NSNI_SEED", "7")
    args = ["coeffs", "--preset", "config2", "--samples", "2048", "--spans", "2",
            "--out", str(tmp_path)]
    assert main(args) == 0
    man = json.loads((tmp_path / "coeffs_manifest.json").read_text())
    assert man["seeds"]["mc"] == 7
    assert json.loads((tmp_path / "coeffs.json").read_text())["seed"] == 7


def test_cli_ndfwm_flag(tmp_path):
    base = ["snr", "--preset", "config2", "--channels", "3", "--samples", "4096", "--spans", "3",
            "--powers=-2:6:2"]
    assert main(base + ["--out", str(tmp_path / "on")]) == 0
    assert main(base + ["--ndfwm", "off", "--out", str(tmp_path / "off")]) == 0
    on = [float(r["snr_u_db"]) for r in csv.DictReader(open(tmp_path / "on" / "snr.csv"))]
    off = [float(r["snr_u_db"]) for r in csv.DictReader(open(tmp_path / "off" / "snr.csv"))]
    assert all(b > a for a, b in zip(on, off))


def test_cli_config_error_is_machine_readable(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"plan": {"spacing_ghz": 40}}))
    assert main(["snr", "--config", str(p), "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config" and "channel overlap" in err["message"]


def test_cli_bad_flag_value():
    with pytest.raises(SystemExit):
        main(["snr", "--dbp", "maybe"])


def test_cli_validate_limits(tmp_path):
    assert main(["validate", "--suite", "limits", "--preset", "config2", "--spans", "3",
                 "--channels", "3", "--samples", "4096", "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "validate_manifest.json").read_text())
    assert man["passed"] is True


def test_cli_validate_closed_forms(tmp_path):
    assert main(["validate", "--suite", "closed-forms", "--preset", "config1", "--spans", "2",
                 "--out", str(tmp_path)]) == 0
