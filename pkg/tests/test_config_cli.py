import json
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from ris_detnet.cli import main
from ris_detnet.config import (ConfigError, config_hash, default_config,
                               dump_config, load_config, load_config_text)

SMALL = """
[topology]
n_users = 2
n_elements = 8

[arrival]
lambda_pkts = 0.08
pkt_bits = 16

[budget]
n_max = 256

[delay]
t_min = 2
t_max = 12

[agent]
episodes = 2
warmup = 20
epsilon_decay_steps = 50

[env]
episode_steps = 10

[run]
seed = 3
"""


# ------------------------------------------------------------- config

def test_empty_file_gives_reference_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = load_config(str(path))
    assert cfg.get("topology", "ap_pos") == (0.0, 20.0)
    assert cfg.get("topology", "ris_pos") == (50.0, 20.0)
    assert cfg.get("topology", "eve_pos") == (50.0, 0.0)
    assert cfg.get("topology", "user_radius") == 2.0
    assert cfg.get("fading", "pl0_db") == -30.0
    assert cfg.get("fading", "alpha_direct") == 4.0
    assert cfg.get("fading", "alpha_ris") == 2.2
    assert cfg.get("fading", "rician_k_r") == 3.0
    assert cfg.get("fading", "noise_power_dbm") == -85.0
    assert cfg.get("secrecy", "epsilon_e") == 2e-6
    assert config_hash(cfg) == config_hash(default_config())


def test_invalid_window_names_section():
    with pytest.raises(ConfigError, match="delay"):
        load_config_text("[delay]\nt_min = 5\nt_max = 3\n")


def test_unknown_key_and_section_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        load_config_text("[delay]\nt_mni = 5\n")
    with pytest.raises(ConfigError, match="unknown section"):
        load_config_text("[delays]\nt_min = 5\n")


def test_type_mismatch_diagnostic():
    with pytest.raises(ConfigError, match=r"\[budget\] n_max"):
        load_config_text("[budget]\nn_max = many\n")


def test_round_trip_hash_stable():
    cfg = load_config_text(SMALL)
    text = dump_config(cfg)
    again = load_config_text(text)
    assert config_hash(cfg) == config_hash(again)
    assert dump_config(again) == text


def test_set_by_path():
    cfg = default_config()
    cfg.set_by_path("delay.t_min", "4")
    assert cfg.get("delay", "t_min") == 4
    cfg.set_by_path("budget.p_max", 2.5)
    assert cfg.get("budget", "p_max") == 2.5
    with pytest.raises(ConfigError):
        cfg.set_by_path("delay.bogus", "1")
    with pytest.raises(ConfigError):
        cfg.set_by_path("nodots", "1")


def test_auto_values():
    cfg = default_config()
    assert cfg.get("fading", "eve_mean_snr") is None
    assert cfg.n_ceiling == cfg.get("budget", "n_max") / cfg.get("topology", "n_users")
    cfg.values["codebook"]["n_ceiling"] = 96.0
    assert cfg.n_ceiling == 96.0
    assert cfg.warmup_transitions == 500
    cfg.values["agent"]["warmup"] = 64.0
    assert cfg.warmup_transitions == 64


# ------------------------------------------------------------- cli

def write_cfg(tmp_path, text=SMALL, out="out"):
    path = tmp_path / "scenario.cfg"
    path.write_text(text + f"\nout_dir = {tmp_path / out}\n"
                    if "[run]" in text else text)
    return str(path)


def test_cli_analyze_deterministic_bytes(tmp_path):
    cfg_path = tmp_path / "s.cfg"
    cfg_path.write_text(SMALL)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["analyze", "--config", str(cfg_path), "--out", str(out_a)]) == 0
    assert main(["analyze", "--config", str(cfg_path), "--out", str(out_b)]) == 0
    assert (out_a / "analyze.csv").read_bytes() == (out_b / "analyze.csv").read_bytes()


def test_cli_analyze_matches_library(tmp_path):
    from ris_detnet.cli import analyze_rows
    cfg_path = tmp_path / "s.cfg"
    cfg_path.write_text(SMALL)
    out = tmp_path / "o"
    assert main(["analyze", "--config", str(cfg_path), "--out", str(out)]) == 0
    lines = (out / "analyze.csv").read_text().splitlines()
    header = lines[2].split(",")
    row0 = dict(zip(header, lines[3].split(",")))
    cfg = load_config(str(cfg_path))
    _, rows = analyze_rows(cfg)
    assert float(row0["varpi"]) == pytest.approx(rows[0]["varpi"], abs=1e-12)


def test_cli_analyze_degenerate_tmin(tmp_path):
    text = SMALL.replace("t_min = 2", "t_min = 0").replace("t_max = 12", "t_max = 6")
    cfg_path = tmp_path / "s.cfg"
    cfg_path.write_text(text)
    out = tmp_path / "o"
    assert main(["analyze", "--config", str(cfg_path), "--out", str(out)]) == 0
    lines = (out / "analyze.csv").read_text().splitlines()
    header = lines[2].split(",")
    for line in lines[3:]:
        row = dict(zip(header, line.split(",")))
        assert float(row["varpi"]) == pytest.approx(
            1.0 - float(row["bound_tmax"]), abs=1e-12)
        assert float(row["bound_tmin"]) == 1.0


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[delay]\nt_min = 9\nt_max = 3\n")
    assert main(["analyze", "--config", str(bad), "--out", str(tmp_path)]) == 1


def test_cli_simulate_model_sampler_dominates(tmp_path):
    cfg_path = tmp_path / "s.cfg"
    cfg_path.write_text(SMALL)
    out = tmp_path / "o"
    code = main(["simulate", "--config", str(cfg_path), "--out", str(out),
                 "--packets", "20000", "--sampler", "model", "--strict"])
    assert code == 0
    lines = (out / "simulate.csv").read_text().splitlines()
    assert lines[2].split(",")[0] == "user_id"
    assert len(lines) == 3 + 2 * 2    # two users x two horizons


def test_cli_sweep_single_value_matches_analyze(tmp_path):
    from ris_detnet.cli import analyze_rows
    cfg_path = tmp_path / "s.cfg"
    cfg_path.write_text(SMALL)
    out = tmp_path / "o"
    code = main(["sweep", "--config", str(cfg_path), "--out", str(out),
                 "--param", "delay.t_min", "--values", "2"])
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    row = dict(zip(lines[2].split(","), lines[3].split(",")))
    cfg = load_config(str(cfg_path))
    _, rows = analyze_rows(cfg)
    want = float(np.mean([r["varpi"] for r in rows]))
    assert float(row["metric"]) == pytest.approx(want, abs=1e-12)
    manifest = json.loads((out / "sweep_manifest.json").read_text())
    assert manifest["completed"] == [{"value": "2", "rep": 0}]


def test_cli_sweep_tmin_monotone(tmp_path):
    cfg_path = tmp_path / "s.cfg"
    cfg_path.write_text(SMALL)
    out = tmp_path / "o"
    code = main(["sweep", "--config", str(cfg_path), "--out", str(out),
                 "--param", "delay.t_min", "--values", "2,4,6,8"])
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    header = lines[2].split(",")
    metrics = {}
    for line in lines[3:]:
        row = dict(zip(header, line.split(",")))
        metrics[float(row["value"])] = float(row["metric"])
    ordered = [metrics[v] for v in sorted(metrics)]
    assert all(b <= a + 1e-9 for a, b in zip(ordered, ordered[1:]))
    # svg exists and is well-formed with a declared viewBox
    tree = ET.parse(out / "sweep.svg")
    assert "viewBox" in tree.getroot().attrib


def test_cli_svg_deterministic(tmp_path):
    cfg_path = tmp_path / "s.cfg"
    cfg_path.write_text(SMALL)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        assert main(["sweep", "--config", str(cfg_path), "--out", str(out),
                     "--param", "delay.t_max", "--values", "6,10"]) == 0
    assert (out_a / "sweep.svg").read_bytes() == (out_b / "sweep.svg").read_bytes()
    assert (out_a / "sweep.csv").read_bytes() == (out_b / "sweep.csv").read_bytes()


def test_cli_train_then_evaluate_round_trip(tmp_path):
    cfg_path = tmp_path / "s.cfg"
    cfg_path.write_text(SMALL)
    out = tmp_path / "o"
    assert main(["train", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "train_log.csv").exists()
    assert (out / "reward_curve.svg").exists()
    ckpt = out / "checkpoint.json"
    assert ckpt.exists()
    out2 = tmp_path / "e1"
    out3 = tmp_path / "e2"
    assert main(["evaluate", "--config", str(cfg_path), "--out", str(out2),
                 "--checkpoint", str(ckpt)]) == 0
    assert main(["evaluate", "--config", str(cfg_path), "--out", str(out3),
                 "--checkpoint", str(ckpt)]) == 0
    assert (out2 / "evaluate.csv").read_bytes() == (out3 / "evaluate.csv").read_bytes()


def test_cli_train_log_deterministic(tmp_path):
    cfg_path = tmp_path / "s.cfg"
    cfg_path.write_text(SMALL)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        assert main(["train", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out_a / "train_log.csv").read_bytes() == (out_b / "train_log.csv").read_bytes()


def test_cli_output_embeds_hash_and_seed(tmp_path):
    cfg_path = tmp_path / "s.cfg"
    cfg_path.write_text(SMALL)
    out = tmp_path / "o"
    assert main(["analyze", "--config", str(cfg_path), "--out", str(out)]) == 0
    lines = (out / "analyze.csv").read_text().splitlines()
    cfg = load_config(str(cfg_path))
    assert lines[0] == f"# config_hash={config_hash(cfg)}"
    assert lines[1] == "# seed=3"
