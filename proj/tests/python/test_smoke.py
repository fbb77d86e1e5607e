import json
import os
import subprocess

import numpy as np
import pytest

import snsce

SPEC = {
    "experiment": "nmse_vs_snr",
    "sweep": {"param": "snr_db", "values": [10]},
    "trials": 2,
    "seed": 7,
    "algorithms": ["ss_somp"],
    "config": {"N": 64, "M": 2, "K": 2, "L": 2, "P": 16, "SI_min": 16},
    "pipeline": {"sensing_subcarriers": 20},
    "estimator": {"T_ite": 10},
}


def test_experiments_listed():
    ids = [e[0] for e in snsce.list_experiments()]
    assert "nmse_vs_snr" in ids and "architecture_compare" in ids


def test_codebook_unitary():
    d = snsce.dft_codebook(16)
    assert d.shape == (16, 16)
    assert np.allclose(d.conj().T @ d, np.eye(16), atol=1e-12)


def test_mef_gaa_example():
    assert snsce.mef_gaa([5, 4, 3, 2], 2) == [[0, 3], [1, 2]]


def test_pass_finds_a_step():
    rng = np.random.default_rng(1)
    p = np.concatenate([np.full(80, 1.0), np.full(48, 0.05)]) * (1 + 0.05 * rng.standard_normal(128))
    seg = snsce.pass_segment(p, W=16)
    assert seg["breakpoints"][0] == 1 and seg["breakpoints"][-1] == 129
    assert any(abs(b - 81) <= 2 for b in seg["breakpoints"][1:-1])


def test_nmse_zero_for_exact():
    h = np.ones((4, 2), dtype=complex)
    assert snsce.nmse(h, h) == 0.0


def test_run_is_deterministic():
    csv_a, rows, meta = snsce.run(SPEC)
    csv_b, _, _ = snsce.run(json.dumps(SPEC), workers=2)
    assert csv_a == csv_b
    assert csv_a.splitlines()[0] == "sweep_param,sweep_value,algorithm,metric,mean,stderr,trials,runtime_ms"
    assert meta["config_hash"] == snsce.config_hash(json.dumps(SPEC))
    assert len(rows["rows"]) > 0


def test_bad_spec_raises():
    with pytest.raises(ValueError):
        snsce.run({"experiment": "nmse_vs_snr", "bogus": 1})


@pytest.mark.skipif("SNSCE_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_matches_module(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SPEC))
    subprocess.run([os.environ["SNSCE_CLI"], "run", str(spec), "--out", str(tmp_path / "o")], check=True)
    csv_mod, _, _ = snsce.run(SPEC)
    assert (tmp_path / "o" / "results.csv").read_text() == csv_mod
