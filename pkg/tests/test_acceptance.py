"""Acceptance criteria, one test per criterion.

Each test prints ``ACCEPTANCE <n> PASS|FAIL <detail>``; the lines are
repeated in the terminal summary so they survive output capture.
"""

import contextlib
import itertools
import math
import time

import numpy as np
import pytest
import scipy.linalg

from thzsim.alloc import (find_windows, max_distance_for_rate, rate_at_distance,
                          waterfill)
from thzsim.array import array_gain_db, build_geometry
from thzsim.channel import (LinkConfig, channel_metrics, condition_map, condition_number,
                            local_minima, los_channel, rayleigh_spacing, tune_to_dip)
from thzsim.cli import run as cli_run
from thzsim.modem import (SmConfig, SmxConfig, candidate_set, ml_detect, qfunc, run_ber,
                          sm_decode, sm_encode, smx_decode, smx_encode)
from thzsim.physics import (LineCatalog, Medium, PhysicalConstants, absorption_coefficient,
                            builtin_catalog_path, load_catalog, pathloss_grid)

from conftest import ACCEPTANCE_LINES, brute_force_k

C = PhysicalConstants()


@contextlib.contextmanager
def criterion(number, limit_s):
    """Time the block, enforce the runtime limit and report one line."""
    info = {}
    t0 = time.perf_counter()
    try:
        yield info
        elapsed = time.perf_counter() - t0
        assert elapsed < limit_s, f"runtime {elapsed:.2f} s over the {limit_s} s limit"
    except BaseException as exc:
        elapsed = time.perf_counter() - t0
        line = f"ACCEPTANCE {number} FAIL ({elapsed:.2f} s): {exc}".splitlines()[0]
        print(line)
        ACCEPTANCE_LINES.append(line)
        raise
    detail = "; ".join(f"{k}={v}" for k, v in info.items())
    line = f"ACCEPTANCE {number} PASS ({elapsed:.2f} s): {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


@pytest.fixture(scope="module")
def h2o():
    return load_catalog(builtin_catalog_path())


def test_1_array_gain_and_footprint():
    with criterion(1, 1.0) as info:
        gain = array_gain_db(64)
        assert abs(gain - 18.06) < 0.005 and abs(gain - 18.0) <= 0.1
        # delta = lambda_SPP = 20 um; SAs tiled edge to edge (Delta = 8 delta)
        geom = build_geometry(4, 4, 8, 8, 8 * 20e-6, 20e-6, 1e12)
        area_mm2 = geom.footprint_area * 1e6
        assert abs(area_mm2 - 0.4) <= 0.25 * 0.4, f"footprint {area_mm2} mm^2"
        assert geom.coupling_ok
        info.update(gain_db=round(gain, 4), footprint_mm2=round(area_mm2, 4),
                    lambda_spp_um=round(geom.lambda_spp * 1e6, 3))


def test_2_absorption_oracle(h2o):
    medium = Medium.humid_air(0.01)
    freqs = np.linspace(0.1e12, 10e12, 1000)
    assert len(h2o.lines) <= 100
    with criterion(2, 10.0) as info:
        k = absorption_coefficient(h2o, medium, C, freqs)
        ref = np.array([brute_force_k(h2o.lines, medium, C, f) for f in freqs])
        rel = np.max(np.abs(k - ref) / ref)
        assert rel <= 1e-12, f"max relative error {rel:.3e}"
        info.update(lines=len(h2o.lines), freqs=len(freqs), max_rel_err=f"{rel:.2e}")


def test_3_pathloss_structure(h2o):
    medium = Medium.humid_air(0.01)
    freqs = np.linspace(0.1e12, 10e12, 500)
    dists = np.linspace(0.3, 30.0, 100)
    with criterion(3, 30.0) as info:
        loss = pathloss_grid(h2o, medium, C, freqs, dists)
        # (a) strictly increasing in d at every f
        assert np.all(np.diff(loss, axis=1) > 0), "loss not strictly increasing in d"
        # (b) every line centre sits within one grid step of a local maximum at 30 m
        at30 = pathloss_grid(h2o, medium, C, freqs, [30.0])[:, 0]
        peaks = freqs[1:-1][(at30[1:-1] > at30[:-2]) & (at30[1:-1] > at30[2:])]
        step = freqs[1] - freqs[0]
        misses = [fc for fc in h2o.centers if np.min(np.abs(peaks - fc)) > step]
        assert not misses, f"{len(misses)} line centres without a nearby maximum"
        # (c) line-free medium gives closed-form Friis
        free = pathloss_grid(LineCatalog(()), medium, C, freqs, dists)
        friis = 20 * np.log10(4 * np.pi * freqs[:, None] * dists[None, :] / C.c)
        err = np.max(np.abs(free - friis))
        assert err <= 0.01
        one = pathloss_grid(LineCatalog(()), medium, C, [1e12], [1.0])[0, 0]
        assert abs(one - 92.45) <= 0.01
        info.update(grid="500x100", centres=len(h2o.centers), friis_err_db=f"{err:.1e}",
                    friis_1THz_1m=round(float(one), 3))


def _dip_check(K, deltas, dists):
    g = build_geometry(1, K, 1, 1, deltas[0], 20e-6, 1e12)
    cmap = condition_map(LinkConfig(g, g, dists[0], 1e12), deltas, dists)
    worst = 1.0
    for j, D in enumerate(dists):
        col = cmap.cond[:, j]
        dr = rayleigh_spacing(1e12, D, K)
        pos = np.searchsorted(deltas, dr) - 0.5  # fractional grid index of Delta_R
        mins = local_minima(col)
        near = mins[np.abs(mins - pos) <= 1.5]
        assert near.size, f"K={K}: no dip within one grid step of Delta_R at D={D:.3f}"
        worst = max(worst, float(col[near].min()))
    return worst


def test_4_conditioning():
    deltas = np.geomspace(4e-3, 24e-3, 200)
    dists = np.linspace(0.5, 3.0, 200)
    with criterion(4, 60.0) as info:
        worst = {K: _dip_check(K, deltas, dists) for K in (2, 4)}
        for K, w in worst.items():
            assert w <= 1.05, f"K={K}: dip condition number {w:.4f}"
        # scale and phase invariance
        g = build_geometry(1, 4, 1, 1, 6e-3, 20e-6, 1e12)
        H = los_channel(LinkConfig(g, g, 1.3, 1e12)).entries
        base = condition_number(H)
        for a in (1e-8, 0.37, 5e4):
            for ph in (0.0, 1.0, -2.5):
                assert abs(condition_number(a * np.exp(1j * ph) * H) / base - 1) <= 1e-9
        # SVD metrics vs a dense LAPACK gesvd oracle
        rng = np.random.default_rng(4)
        max_err = 0.0
        for _ in range(20):
            n_r, n_t = rng.integers(2, 9, size=2)
            M = rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))
            s_ref = scipy.linalg.svd(M, compute_uv=False, lapack_driver="gesvd")
            m = channel_metrics(M)
            err = max(np.max(np.abs(m.singular_values - s_ref) / s_ref[0]),
                      abs(m.condition_number / (s_ref[0] / s_ref[-1]) - 1))
            max_err = max(max_err, err)
        assert max_err <= 1e-9
        info.update(grid="200x200", worst_dip_K2=round(worst[2], 4),
                    worst_dip_K4=round(worst[4], 4), svd_err=f"{max_err:.1e}")


def _all_bits(n):
    return [np.array(b, dtype=np.int8) for b in itertools.product((0, 1), repeat=n)]


def test_5_modem():
    with criterion(5, 120.0) as info:
        rng = np.random.default_rng(0)
        checked = 0
        schemes = [SmConfig(n, M) for n in (1, 2, 4, 8) for M in (2, 4)] + \
                  [SmxConfig(n, M) for n in (1, 2) for M in (2, 4)]
        for cfg in schemes:
            n_tx = cfg.n_tx if isinstance(cfg, SmConfig) else 2
            H = rng.standard_normal((n_tx, n_tx)) + 1j * rng.standard_normal((n_tx, n_tx))
            for bits in _all_bits(cfg.bits_per_symbol):
                if isinstance(cfg, SmConfig):
                    idx, s = sm_encode(bits, cfg)
                    assert np.array_equal(sm_decode(idx, s, cfg), bits)
                    x = np.zeros(n_tx, complex)
                    x[idx] = s
                else:
                    x = np.zeros(n_tx, complex)
                    x[cfg.columns(n_tx)] = smx_encode(bits, cfg)
                    assert np.array_equal(smx_decode(x[cfg.columns(n_tx)], cfg), bits)
                assert np.array_equal(ml_detect(H @ x, H, cfg), bits)
                checked += 1
        # SISO BPSK against Q(sqrt(2 snr)) at 1e6 trials
        curve = run_ber(np.ones((1, 1)), SmConfig(1, 2), [0.0, 4.0, 8.0], 10 ** 6, seed=20240)
        z = []
        for snr_db, ber in zip(curve.snr_points_db, curve.ber):
            p = float(qfunc(math.sqrt(2 * 10 ** (snr_db / 10))))
            se = math.sqrt(p * (1 - p) / curve.trials)
            z.append(round((ber - p) / se, 2))
            assert abs(ber - p) <= 3 * se, f"BER {ber} vs {p} at {snr_db} dB"
        info.update(patterns=checked, bpsk_z=z)


def test_6_sm_vs_smx_sensitivity():
    f, D, K = 1e12, 1.0, 4
    dr = rayleigh_spacing(f, D, K)
    base = LinkConfig(build_geometry(1, K, 1, 1, dr, 20e-6, f),
                      build_geometry(1, K, 1, 1, dr, 20e-6, f), D, f)
    r1, r2 = base.with_delta(1.3 * dr), base.with_delta(0.2 * dr)
    sm, smx = SmConfig(K, 2), SmxConfig(2, 2)
    snr, trials = [94.0], 10 ** 5
    with criterion(6, 300.0) as info:
        tuned_delta, tuned_cond = tune_to_dip(base, 0.2 * dr)
        r2opt = base.with_delta(tuned_delta)
        factors = []
        for seed in range(5):
            b = {(name, reg): run_ber(link, cfg, snr, trials, seed).ber[0]
                 for name, cfg in (("sm", sm), ("smx", smx))
                 for reg, link in (("r1", r1), ("r2", r2), ("opt", r2opt))}
            for name in ("sm", "smx"):
                assert 1e-3 <= b[name, "r1"] <= 1e-1, f"region-1 {name} BER {b[name, 'r1']}"
            f_sm = b["sm", "r2"] / b["sm", "r1"]
            f_smx = b["smx", "r2"] / b["smx", "r1"]
            assert f_smx > f_sm, f"seed {seed}: SMX factor {f_smx:.3f} <= SM factor {f_sm:.3f}"
            assert b["sm", "opt"] <= 10 * b["sm", "r1"], f"seed {seed}: tuned SM not recovered"
            factors.append((round(f_sm, 2), round(f_smx, 2)))
        info.update(snr_db=snr[0], cond_r1=round(condition_number(los_channel(r1)), 2),
                    cond_r2=f"{condition_number(los_channel(r2)):.3g}",
                    tuned_delta_over_rayleigh=round(tuned_delta / dr, 4),
                    factors_sm_smx=factors)


def test_7_allocation(h2o):
    medium = Medium.humid_air(0.01)
    band = (0.1e12, 1.0e12)
    with criterion(7, 60.0) as info:
        rng = np.random.default_rng(77)
        worst = 0.0
        for _ in range(50):
            n = int(rng.integers(1, 64))
            g = 10 ** rng.uniform(-4, 4, n)
            budget = float(10 ** rng.uniform(-3, 1))
            pa = waterfill(g, budget)
            # bisection oracle on the water level
            lo, hi = 0.0, budget + np.sum(1 / g)
            for _ in range(300):
                mu = 0.5 * (lo + hi)
                lo, hi = (mu, hi) if np.sum(np.maximum(mu - 1 / g, 0)) < budget else (lo, mu)
            p_ref = np.maximum(0.5 * (lo + hi) - 1 / g, 0)
            assert np.allclose(pa.powers, p_ref, rtol=1e-9, atol=1e-12)
            worst = max(worst, pa.kkt_residual())
        assert worst <= 1e-9
        full = (0.1e12, 10e12)
        bw = [find_windows(h2o, medium, C, d, full).total_bandwidth
              for d in (1, 5, 10, 20, 30)]
        assert all(a >= b for a, b in zip(bw, bw[1:])), bw
        gain, budget, target = 10 ** 3.6, 0.01, 100e9
        res = max_distance_for_rate(h2o, medium, C, gain, budget, target, band)
        r_at = rate_at_distance(h2o, medium, C, res.d, gain, budget, band)[0]
        r_past = rate_at_distance(h2o, medium, C, res.d + 0.02, gain, budget, band)[0]
        assert r_at >= target > r_past, (r_at, r_past)
        info.update(kkt_max=f"{worst:.1e}", bandwidth_ghz=[round(b / 1e9) for b in bw],
                    d_max_100Gbps_m=round(res.d, 2), anchor_m=21.0)


def test_8_reproducibility(tmp_path):
    with criterion(8, 60.0) as info:
        compared = 0
        for command in ("pathloss-map", "condition-map", "ber", "windows"):
            runs = [cli_run(command, None, tmp_path / f"{command}-{i}", seed=9, threads=t)
                    for i, t in enumerate((1, 1, 4))]
            for name in runs[0]:
                ref = runs[0][name].read_bytes()
                for other in runs[1:]:
                    assert other[name].read_bytes() == ref, f"{command}: {name} differs"
                compared += 1
        info.update(files_compared=compared, thread_counts=[1, 1, 4])
