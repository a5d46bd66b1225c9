import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
import yaml

from thzsim.cli import ConfigError, DEFAULTS, load_config, main, run
from thzsim.physics import builtin_catalog_path, load_catalog


def write_cfg(path, data):
    path.write_text(yaml.safe_dump(data))
    return path


SMALL = {
    "pathloss": {"f_min": 0.5e12, "f_max": 1.0e12, "n_f": 2, "d_min": 1.0, "d_max": 2.0,
                 "n_d": 2},
    "condition": {"n_delta": 1, "n_D": 1},
    "ber": {"snr_db": [3.0], "trials": 1, "schemes": [{"type": "sm", "n_tx": 4, "M": 2}]},
    "windows": {"distances": [1.0, 10.0], "grid_step": 1e10},
}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_pathloss_smallest_grid(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", SMALL)
    assert main(["pathloss-map", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o" / "pathloss.csv")
    assert rows[0] == ["f_hz", "d_m", "loss_db"]
    assert len(rows) == 5
    assert [r[:2] for r in rows[1:]] == [["500000000000.0", "1.0"], ["500000000000.0", "2.0"],
                                        ["1000000000000.0", "1.0"], ["1000000000000.0", "2.0"]]
    pgm = (tmp_path / "o" / "pathloss.pgm").read_text().split("\n")
    assert pgm[:3] == ["P2", "2 2", "255"]
    manifest = json.loads((tmp_path / "o" / "manifest_pathloss-map.json").read_text())
    assert manifest["seed"] == DEFAULTS["seed"] and len(manifest["config_sha256"]) == 64
    assert set(manifest["outputs"]) == {"pathloss.csv", "pathloss.pgm"}


def test_condition_single_cell(tmp_path):
    run("condition-map", write_cfg(tmp_path / "c.yaml", SMALL), tmp_path)
    rows = read_csv(tmp_path / "condition.csv")
    assert rows[0] == ["delta_m", "D_m", "cond_number"] and len(rows) == 2
    side = (tmp_path / "condition.pgm.txt").read_text()
    assert "quantity=log10_cond" in side


def test_ber_single_trial(tmp_path):
    run("ber", write_cfg(tmp_path / "c.yaml", SMALL), tmp_path)
    rows = read_csv(tmp_path / "ber.csv")
    assert rows[0] == ["snr_db", "ber", "trials", "errors", "scheme"]
    assert len(rows) == 2 and rows[1][2] == "1" and rows[1][4] == "SM-4x2"


def test_ber_siso_bpsk_against_q(tmp_path):
    cfg = {"geometry": {"sa_cols": 1}, "ber": {"snr_db": [4.0], "trials": 100000,
                                               "schemes": [{"type": "sm", "n_tx": 1}]},
           "medium": {"mixing_ratios": {}}}
    # a 1x1 link of unit-gain AEs at 1 m has |h| = lambda / (4 pi), so shift SNR
    run("ber", write_cfg(tmp_path / "c.yaml", cfg), tmp_path)
    ber = float(read_csv(tmp_path / "ber.csv")[1][1])
    snr = 10 ** 0.4 * (2.99792458e8 / 1e12 / (4 * math.pi)) ** 2
    p = 0.5 * math.erfc(math.sqrt(snr))
    assert abs(ber - p) < 4 * math.sqrt(p * (1 - p) / 1e5) + 1e-5


def test_windows_outputs(tmp_path):
    run("windows", write_cfg(tmp_path / "c.yaml", SMALL), tmp_path)
    win = read_csv(tmp_path / "windows.csv")
    alloc = read_csv(tmp_path / "allocation.csv")
    assert win[0] == ["d_m", "f_lo_hz", "f_hi_hz"]
    assert alloc[0] == ["window_index", "power_w", "rate_bps"]
    powers = [float(r[1]) for r in alloc[1:]]
    assert sum(powers) == pytest.approx(DEFAULTS["windows"]["budget"], rel=1e-12)
    summary = json.loads((tmp_path / "manifest_windows.json").read_text())["summary"]
    assert summary["kkt_residual_max_w"] <= 1e-9
    bw = [summary["total_bandwidth_hz"][k] for k in ("1.0", "10.0")]
    assert bw[0] >= bw[1]


def test_windows_empty_catalog(tmp_path):
    (tmp_path / "empty.csv").write_text(
        "gas_id,iso_id,f_c0_hz,S_hz_m2,alpha_air,alpha_self,gamma,delta_shift\n")
    cfg = dict(SMALL, catalog="empty.csv")
    with pytest.raises(ConfigError, match="catalog: empty catalog"):
        run("windows", write_cfg(tmp_path / "c.yaml", cfg), tmp_path / "o")
    # a null catalog is the line-free medium: one window covering the band
    run("windows", write_cfg(tmp_path / "n.yaml", dict(SMALL, catalog=None)), tmp_path)
    win = read_csv(tmp_path / "windows.csv")
    assert [r[1:] for r in win[1:]] == [["100000000000.0", "1000000000000.0"]] * 2


def test_windows_target_rate(tmp_path):
    cfg = {"windows": {"target_rate": 100e9, "d_max": 60.0}}
    run("windows", write_cfg(tmp_path / "c.yaml", cfg), tmp_path)
    summary = json.loads((tmp_path / "manifest_windows.json").read_text())["summary"]
    assert 1.0 < summary["max_distance_m"] < 60.0
    assert summary["rate_at_max_distance_bps"] >= 100e9


@pytest.mark.parametrize("command", ["pathloss-map", "condition-map", "ber", "windows"])
def test_byte_identical_across_threads(tmp_path, command):
    cfg = write_cfg(tmp_path / "c.yaml", {
        "pathloss": {"n_f": 20, "n_d": 5}, "condition": {"n_delta": 9, "n_D": 4},
        "ber": {"trials": 40000, "snr_db": [112.0, 116.0]},
        "windows": {"distances": [1.0, 20.0]}})
    a = run(command, cfg, tmp_path / "a", seed=5, threads=1)
    b = run(command, cfg, tmp_path / "b", seed=5, threads=4)
    for name in a:
        assert a[name].read_bytes() == b[name].read_bytes()
    ma = (tmp_path / "a" / f"manifest_{command}.json").read_bytes()
    mb = (tmp_path / "b" / f"manifest_{command}.json").read_bytes()
    assert ma == mb


def test_seed_changes_ber(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", {"ber": {"trials": 20000, "snr_db": [116.0]}})
    a = run("ber", cfg, tmp_path / "a", seed=1)["ber.csv"].read_bytes()
    b = run("ber", cfg, tmp_path / "b", seed=2)["ber.csv"].read_bytes()
    assert a != b


def test_env_threads(tmp_path, monkeypatch):
    monkeypatch.setenv("THZSIM_THREADS", "3")
    assert main(["condition-map", "--config", str(write_cfg(tmp_path / "c.yaml", SMALL)),
                 "--out", str(tmp_path)]) == 0
    monkeypatch.setenv("THZSIM_THREADS", "many")
    assert main(["condition-map", "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("data,field", [
    ({"pathloss": {"n_f": 0}}, "pathloss.n_f"),
    ({"pathloss": {"bogus": 1}}, "pathloss.bogus"),
    ({"pathloss": {"f_min": "a lot"}}, "pathloss.f_min"),
    ({"pathloss": {"f_max": 20e12}}, "pathloss"),
    ({"catalog": "missing.csv"}, "catalog"),
])
def test_field_addressed_errors(tmp_path, capsys, data, field):
    cfg = write_cfg(tmp_path / "c.yaml", data)
    assert main(["pathloss-map", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err.strip().split("\n")
    assert len(err) == 1
    assert err[0].startswith(f"thzsim: error: {field}")


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["pathloss-map", "--out", str(blocker / "sub")]) == 2
    assert "--out" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="--config"):
        load_config(tmp_path / "nope.yaml")


def test_bad_seed(tmp_path):
    with pytest.raises(ConfigError, match="--seed"):
        run("ber", None, tmp_path, seed=-1)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "thzsim", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    for name in ("pathloss-map", "condition-map", "ber", "windows"):
        assert name in proc.stdout


def test_default_pathloss_spikes_at_line_centres(tmp_path):
    out = run("pathloss-map", None, tmp_path)
    data = np.loadtxt(out["pathloss.csv"], delimiter=",", skiprows=1)
    freqs = np.unique(data[:, 0])
    dists = np.unique(data[:, 1])
    loss = data[:, 2].reshape(len(freqs), len(dists))[:, -1]
    assert dists[-1] == 30.0
    step = freqs[1] - freqs[0]
    peaks = freqs[1:-1][(loss[1:-1] > loss[:-2]) & (loss[1:-1] > loss[2:])]
    for fc in load_catalog(builtin_catalog_path()).centers:
        assert np.min(np.abs(peaks - fc)) <= step


def test_default_condition_map_dips_follow_rayleigh(tmp_path):
    from thzsim.channel import local_minima, rayleigh_spacing
    cfg = write_cfg(tmp_path / "c.yaml", {"condition": {"n_delta": 120, "n_D": 6}})
    out = run("condition-map", cfg, tmp_path)
    data = np.loadtxt(out["condition.csv"], delimiter=",", skiprows=1)
    deltas, dists = np.unique(data[:, 0]), np.unique(data[:, 1])
    cond = data[:, 2].reshape(len(deltas), len(dists))
    for j, D in enumerate(dists):
        # a square 4x4 SA grid separates into two 4-element ULAs
        pos = np.searchsorted(deltas, rayleigh_spacing(1e12, D, 4)) - 0.5
        mins = local_minima(cond[:, j])
        assert np.any(np.abs(mins - pos) <= 1.5)
