"""Tests for cli.py: subcommands and exit codes."""

import sys
import os
import json

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import numpy as np
import pytest

from allpass import load_params
from cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main

SMALL_TOML = """
m = 2
n_fft = 16
n_pilots = 2
lattice_order = 2
speed_kmh = [10.0]
snr_db = [10.0]
n_frames = 2
n_seeds = 1
schemes = ["perfect", "lattice", "geodesic"]
workers = 1
"""


@pytest.fixture
def small_toml(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL_TOML)
    return str(path)


def test_simulate_track_and_report(tmp_path, small_toml, capsys):
    out = tmp_path / "results"
    assert main(["simulate", "--config", small_toml, "--seed", "4", "--out", str(out)]) == EXIT_OK
    assert (out / "rates.csv").exists()
    assert (out / "summary.csv").exists()
    assert "Results written to" in capsys.readouterr().out

    transcript = out / "transcripts" / "lattice_10kmh_seed4.txt"
    assert main(["track", "--transcript", str(transcript)]) == EXIT_OK
    assert "bit-exactly" in capsys.readouterr().out

    again = tmp_path / "report"
    assert main(["report", "--in", str(out), "--out", str(again)]) == EXIT_OK
    assert (again / "summary.csv").read_bytes() == (out / "summary.csv").read_bytes()


def test_simulate_unknown_key_is_config_error(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(SMALL_TOML + "warp = 9\n")
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_simulate_bad_workers_is_config_error(tmp_path, small_toml):
    assert main(["simulate", "--config", small_toml, "--workers", "0", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_log_level_is_config_error(small_toml, tmp_path):
    assert main(["--log-level", "LOUD", "simulate", "--config", small_toml, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_design_writes_params(tmp_path):
    nodes = tmp_path / "nodes.json"
    nodes.write_text(json.dumps([{"omega": 0.5, "re": [[1.0, 0.0], [0.0, 1.0]], "im": [[0.0, 0.0], [0.0, 0.0]]}]))
    out = tmp_path / "lattice.txt"
    assert main(["design", "--nodes", str(nodes), "--order", "1", "--out", str(out)]) == EXIT_OK
    params = load_params(str(out))
    assert params.order == 1
    assert np.allclose(params.residue, np.eye(2))


def test_design_malformed_nodes_is_config_error(tmp_path):
    nodes = tmp_path / "nodes.json"
    nodes.write_text("[{\"omega\": 0.5}]")
    assert main(["design", "--nodes", str(nodes), "--order", "1", "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert main(["design", "--nodes", str(tmp_path / "none.json"), "--order", "1",
                 "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_design_non_unitary_is_numerical_failure(tmp_path):
    nodes = tmp_path / "nodes.json"
    nodes.write_text(json.dumps([{"omega": 0.0, "re": [[2.0]], "im": [[0.0]]}]))
    assert main(["design", "--nodes", str(nodes), "--order", "1", "--out", str(tmp_path / "x")]) == EXIT_NUMERICAL


def test_track_tampered_transcript_is_numerical_failure(tmp_path, small_toml):
    out = tmp_path / "results"
    assert main(["simulate", "--config", small_toml, "--seed", "2", "--out", str(out)]) == EXIT_OK
    path = out / "transcripts" / "lattice_10kmh_seed2.txt"
    lines = path.read_text().splitlines()
    tag, t, n_bits, payload, digest = lines[-1].split()
    lines[-1] = " ".join([tag, t, n_bits, payload, "0" * len(digest)])
    path.write_text("\n".join(lines) + "\n")
    assert main(["track", "--transcript", str(path)]) == EXIT_NUMERICAL


def test_track_missing_file_is_config_error(tmp_path):
    assert main(["track", "--transcript", str(tmp_path / "nope.txt")]) == EXIT_CONFIG


def test_report_empty_dir_is_numerical_failure(tmp_path):
    assert main(["report", "--in", str(tmp_path), "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL


def test_simulate_negative_seed_is_config_error(tmp_path, small_toml):
    assert main(["simulate", "--config", small_toml, "--seed=-1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_report_malformed_rates_is_numerical_failure(tmp_path, small_toml):
    out = tmp_path / "results"
    assert main(["simulate", "--config", small_toml, "--seed", "3", "--out", str(out)]) == EXIT_OK
    rates = out / "rates.csv"
    lines = rates.read_text().splitlines()
    fields = lines[1].split(",")
    fields[5] = "fast"
    lines[1] = ",".join(fields)
    rates.write_text("\n".join(lines) + "\n")
    assert main(["report", "--in", str(out), "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL
