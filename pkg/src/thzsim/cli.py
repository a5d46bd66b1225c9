"""Command-line front end: ``thzsim {pathloss-map,condition-map,ber,windows}``.

Every run reads one YAML config (built-in defaults fill the gaps), writes
its outputs atomically into ``--out`` and records a manifest.  Outputs
depend only on the config, the catalog and the seed; ``--threads`` changes
scheduling, never bytes.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .alloc import (band_grid, find_windows, max_distance_for_rate, rate_at_distance)
from .array import build_geometry
from .channel import LinkConfig, condition_map, los_channel, channel_metrics, rayleigh_spacing
from .io import sha256_file, write_csv, write_manifest, write_pgm
from .modem import SmConfig, SmxConfig, run_ber, PRNG_ID
from .physics import (CatalogError, LineCatalog, Medium, PhysicalConstants,
                      builtin_catalog_path, load_catalog, pathloss_grid)

DEFAULTS = {
    "seed": 1,
    "catalog": "builtin:h2o_fixture",
    "medium": {"T": 296.0, "T_ref": 296.0, "T_stp": 273.15, "p": 1.0, "p_ref": 1.0,
               "mixing_ratios": {"1": 0.01}, "stp_correction": True},
    "geometry": {"sa_rows": 1, "sa_cols": 4, "ae_rows": 1, "ae_cols": 1,
                 "delta": 8.66e-3, "delta_small": 2e-5, "f_design": 1e12,
                 "plasmonic_factor": 15.0},
    "pathloss": {"f_min": 0.1e12, "f_max": 10e12, "n_f": 500,
                 "d_min": 0.3, "d_max": 30.0, "n_d": 100},
    "condition": {"f": 1e12, "sa_rows": 4, "sa_cols": 4, "delta_min": 4e-3, "delta_max": 24e-3, "n_delta": 200,
                  "delta_spacing": "geometric", "D_min": 0.5, "D_max": 3.0, "n_D": 200},
    "ber": {"f": 1e12, "D": 1.0, "delta": None, "snr_db": [108.0, 112.0, 116.0, 120.0],
            "trials": 20000, "noise_model": "white",
            "schemes": [{"type": "sm", "n_tx": 4, "M": 2},
                        {"type": "smx", "n_streams": 2, "M": 2}]},
    "windows": {"distances": [1.0, 5.0, 10.0, 20.0, 30.0], "f_min": 0.1e12,
                "f_max": 1e12, "grid_step": 1e9, "threshold_db": 3.0, "budget": 0.01,
                "array_gain_db": 36.0, "gap": 1.0, "target_rate": None,
                "d_max": 100.0, "alloc_distance": None},
}

COMMANDS = {
    "pathloss-map": "path loss over a frequency x distance grid (CSV + PGM)",
    "condition-map": "channel condition number over an SA pitch x range grid (CSV + PGM)",
    "ber": "Monte Carlo BER of SM / SMX schemes over the LoS channel (CSV)",
    "windows": "transmission windows, water-filling and max-distance search (CSV)",
}


class ConfigError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


def _merge(base, override, prefix=""):
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(name, "unknown key")
        if isinstance(base[key], dict) and key != "mixing_ratios":
            if not isinstance(value, dict):
                raise ConfigError(name, "expected a mapping")
            out[key] = _merge(base[key], value, prefix=name + ".")
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    """Defaults overlaid with the YAML file at ``path`` (if any)."""
    cfg = copy.deepcopy(DEFAULTS)
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError("--config", f"file not found: {path}")
        try:
            user = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError("--config", f"invalid YAML ({exc.__class__.__name__})") from None
        if not isinstance(user, dict):
            raise ConfigError("--config", "top level must be a mapping")
        cfg = _merge(cfg, user)
        base_dir = path.parent
    cat = cfg["catalog"]
    if cat is None:
        return cfg
    if not isinstance(cat, str):
        raise ConfigError("catalog", "expected a path, builtin:<name> or null")
    if not cat.startswith("builtin:"):
        p = Path(cat)
        p = p if p.is_absolute() else (base_dir / p)
        if not p.exists():
            raise ConfigError("catalog", f"file not found: {p}")
        cfg["catalog"] = str(p.resolve())
    return cfg


def _num(cfg, section, key, positive=True, integer=False):
    v = cfg[section][key]
    name = f"{section}.{key}"
    if isinstance(v, str):
        # YAML 1.1 reads exponents without a sign (1.0e11) as strings
        try:
            v = float(v)
        except ValueError:
            raise ConfigError(name, f"expected a number, got {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(name, f"expected a number, got {v!r}")
    if integer and (int(v) != v or v < 1):
        raise ConfigError(name, "expected an integer >= 1")
    if positive and not v > 0:
        raise ConfigError(name, "must be > 0")
    return int(v) if integer else float(v)


def _catalog(cfg):
    """(catalog, path); a null catalog means a line-free (vacuum) medium."""
    ref = cfg["catalog"]
    if ref is None:
        return LineCatalog(()), None
    try:
        path = (builtin_catalog_path(ref.split(":", 1)[1]) if ref.startswith("builtin:")
                else Path(ref))
        return load_catalog(path), path
    except (CatalogError, FileNotFoundError) as exc:
        raise ConfigError("catalog", str(exc)) from None


def _medium(cfg):
    m = cfg["medium"]
    try:
        return Medium(T=float(m["T"]), T_ref=float(m["T_ref"]), T_stp=float(m["T_stp"]),
                      p=float(m["p"]), p_ref=float(m["p_ref"]),
                      mixing_ratios={str(k): float(v) for k, v in m["mixing_ratios"].items()},
                      stp_correction=bool(m["stp_correction"]))
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError("medium", str(exc)) from None


def _geometry(cfg, delta=None, **override):
    g = dict(cfg["geometry"], **override)
    try:
        return build_geometry(int(g["sa_rows"]), int(g["sa_cols"]), int(g["ae_rows"]),
                              int(g["ae_cols"]), float(g["delta"] if delta is None else delta),
                              float(g["delta_small"]), float(g["f_design"]),
                              float(g["plasmonic_factor"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError("geometry", str(exc)) from None


def _manifest(command, cfg, catalog_path, outputs, extra=None):
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    payload = {
        "command": command,
        "config": cfg,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "catalog_sha256": sha256_file(catalog_path) if catalog_path else None,
        "seed": cfg["seed"],
        "prng": PRNG_ID,
        "versions": {"thzsim": __version__, "numpy": np.__version__,
                     "python": ".".join(platform.python_version_tuple()[:2])},
        "outputs": {name: sha256_file(p) for name, p in sorted(outputs.items())},
    }
    if extra:
        payload["summary"] = extra
    return payload


def cmd_pathloss_map(cfg, out: Path, threads: int = 1):
    catalog, cat_path = _catalog(cfg)
    medium, C = _medium(cfg), PhysicalConstants()
    n_f = _num(cfg, "pathloss", "n_f", integer=True)
    n_d = _num(cfg, "pathloss", "n_d", integer=True)
    f_min, f_max = _num(cfg, "pathloss", "f_min"), _num(cfg, "pathloss", "f_max")
    d_min, d_max = _num(cfg, "pathloss", "d_min"), _num(cfg, "pathloss", "d_max")
    if f_max < f_min:
        raise ConfigError("pathloss.f_max", "must be >= f_min")
    if d_max < d_min:
        raise ConfigError("pathloss.d_max", "must be >= d_min")
    freqs = np.linspace(f_min, f_max, n_f)
    dists = np.linspace(d_min, d_max, n_d)
    try:
        loss = pathloss_grid(catalog, medium, C, freqs, dists)
    except ValueError as exc:
        raise ConfigError("pathloss", str(exc)) from None
    rows = ((f, d, loss[i, j]) for i, f in enumerate(freqs) for j, d in enumerate(dists))
    outputs = {
        "pathloss.csv": write_csv(out / "pathloss.csv", ("f_hz", "d_m", "loss_db"), rows),
        "pathloss.pgm": write_pgm(out / "pathloss.pgm", loss, label="loss_db"),
    }
    write_manifest(out / "manifest_pathloss-map.json",
                   _manifest("pathloss-map", cfg, cat_path, outputs))
    return outputs


def cmd_condition_map(cfg, out: Path, threads: int = 1):
    catalog, cat_path = _catalog(cfg)
    c = cfg["condition"]
    n_delta = _num(cfg, "condition", "n_delta", integer=True)
    n_D = _num(cfg, "condition", "n_D", integer=True)
    lo, hi = _num(cfg, "condition", "delta_min"), _num(cfg, "condition", "delta_max")
    if c["delta_spacing"] == "geometric":
        deltas = np.geomspace(lo, hi, n_delta)
    elif c["delta_spacing"] == "linear":
        deltas = np.linspace(lo, hi, n_delta)
    else:
        raise ConfigError("condition.delta_spacing", "expected 'geometric' or 'linear'")
    dists = np.linspace(_num(cfg, "condition", "D_min"), _num(cfg, "condition", "D_max"), n_D)
    g = _geometry(cfg, delta=deltas[0],
                  sa_rows=_num(cfg, "condition", "sa_rows", integer=True),
                  sa_cols=_num(cfg, "condition", "sa_cols", integer=True))
    link = LinkConfig(g, g, float(dists[0]), _num(cfg, "condition", "f"),
                      medium=_medium(cfg), catalog=catalog)
    try:
        cmap = condition_map(link, deltas, dists, threads=threads)
    except ValueError as exc:
        raise ConfigError("condition", str(exc)) from None
    with np.errstate(divide="ignore"):
        log_cond = np.log10(cmap.cond)
    outputs = {
        "condition.csv": write_csv(out / "condition.csv", ("delta_m", "D_m", "cond_number"),
                                   cmap.rows()),
        "condition.pgm": write_pgm(out / "condition.pgm", log_cond, label="log10_cond"),
    }
    write_manifest(out / "manifest_condition-map.json",
                   _manifest("condition-map", cfg, cat_path, outputs))
    return outputs


def _scheme(spec, idx):
    field = f"ber.schemes[{idx}]"
    if not isinstance(spec, dict) or spec.get("type") not in ("sm", "smx"):
        raise ConfigError(field, "expected a mapping with type 'sm' or 'smx'")
    try:
        if spec["type"] == "sm":
            return SmConfig(int(spec["n_tx"]), int(spec.get("M", 2)))
        tx = spec.get("tx_indices")
        return SmxConfig(int(spec["n_streams"]), int(spec.get("M", 2)),
                         tuple(tx) if tx is not None else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(field, str(exc)) from None


def cmd_ber(cfg, out: Path, threads: int = 1):
    catalog, cat_path = _catalog(cfg)
    b = cfg["ber"]
    f, D = _num(cfg, "ber", "f"), _num(cfg, "ber", "D")
    trials = _num(cfg, "ber", "trials", integer=True)
    snrs = b["snr_db"]
    if not isinstance(snrs, list) or not snrs:
        raise ConfigError("ber.snr_db", "expected a non-empty list")
    try:
        snrs = [float(s) for s in snrs]
    except (TypeError, ValueError):
        raise ConfigError("ber.snr_db", "entries must be numbers") from None
    if b["delta"] is None:
        delta = rayleigh_spacing(f, D, int(cfg["geometry"]["sa_cols"]))
    else:
        delta = _num(cfg, "ber", "delta")
    g = _geometry(cfg, delta=float(delta))
    link = LinkConfig(g, g, D, f, medium=_medium(cfg), catalog=catalog)
    schemes = [_scheme(s, i) for i, s in enumerate(b["schemes"] or [])]
    if not schemes:
        raise ConfigError("ber.schemes", "need at least one scheme")
    rows, summary = [], {"delta_m": float(delta),
                         "condition_number": channel_metrics(los_channel(link)).condition_number}
    for sch in schemes:
        try:
            curve = run_ber(link, sch, snrs, trials, int(cfg["seed"]),
                            noise_model=b["noise_model"], threads=threads)
        except ValueError as exc:
            raise ConfigError("ber", str(exc)) from None
        rows.extend(curve.rows())
    outputs = {"ber.csv": write_csv(out / "ber.csv",
                                    ("snr_db", "ber", "trials", "errors", "scheme"), rows)}
    write_manifest(out / "manifest_ber.json",
                   _manifest("ber", cfg, cat_path, outputs, summary))
    return outputs


def cmd_windows(cfg, out: Path, threads: int = 1):
    catalog, cat_path = _catalog(cfg)
    medium, C = _medium(cfg), PhysicalConstants()
    w = cfg["windows"]
    band = (_num(cfg, "windows", "f_min"), _num(cfg, "windows", "f_max"))
    step = _num(cfg, "windows", "grid_step")
    thr = _num(cfg, "windows", "threshold_db", positive=False)
    budget = _num(cfg, "windows", "budget")
    gain = 10.0 ** (_num(cfg, "windows", "array_gain_db", positive=False) / 10.0)
    gap = _num(cfg, "windows", "gap")
    dists = w["distances"]
    if not isinstance(dists, list) or not dists:
        raise ConfigError("windows.distances", "expected a non-empty list")
    try:
        dists = [float(d) for d in dists]
        band_grid(band, step)
    except (TypeError, ValueError) as exc:
        raise ConfigError("windows", str(exc)) from None

    win_rows, summary = [], {"total_bandwidth_hz": {}}
    for d in dists:
        try:
            ws = find_windows(catalog, medium, C, d, band, thr, step)
        except ValueError as exc:
            raise ConfigError("windows.distances", str(exc)) from None
        win_rows.extend(ws.rows())
        summary["total_bandwidth_hz"][repr(d)] = ws.total_bandwidth

    if w["target_rate"] is not None:
        target = _num(cfg, "windows", "target_rate")
        d_max = _num(cfg, "windows", "d_max")
        try:
            res = max_distance_for_rate(catalog, medium, C, gain, budget, target, band,
                                        thr, step, d_bounds=(0.01, d_max),
                                        gap=gap)
        except ValueError as exc:
            raise ConfigError("windows.target_rate", str(exc)) from None
        d_alloc, rate, ws, pa = res.d, res.rate, res.windows, res.allocation
        summary["max_distance_m"] = res.d
        summary["rate_at_max_distance_bps"] = res.rate
    else:
        d_alloc = (_num(cfg, "windows", "alloc_distance") if w["alloc_distance"] is not None
                   else dists[0])
        rate, ws, pa = rate_at_distance(catalog, medium, C, d_alloc, gain, budget, band,
                                        thr, step, gap)
    summary["alloc_distance_m"] = d_alloc
    summary["alloc_rate_bps"] = rate

    alloc_rows = []
    if pa is not None:
        cell_window = ws.window_of_cell[ws.mask]
        summary["kkt_residual_max_w"] = pa.kkt_residual()
        for wi in range(len(ws.windows)):
            sel = cell_window == wi
            alloc_rows.append((wi, float(pa.powers[sel].sum()), float(pa.rates[sel].sum())))
    outputs = {
        "windows.csv": write_csv(out / "windows.csv", ("d_m", "f_lo_hz", "f_hi_hz"), win_rows),
        "allocation.csv": write_csv(out / "allocation.csv",
                                    ("window_index", "power_w", "rate_bps"), alloc_rows),
    }
    write_manifest(out / "manifest_windows.json",
                   _manifest("windows", cfg, cat_path, outputs, summary))
    return outputs


HANDLERS = {"pathloss-map": cmd_pathloss_map, "condition-map": cmd_condition_map,
            "ber": cmd_ber, "windows": cmd_windows}


def _threads(value):
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", default="thzsim-out", help="output directory")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--threads", type=_threads,
                        help="worker threads (fallback: $THZSIM_THREADS, then 1)")
    parser = argparse.ArgumentParser(
        prog="thzsim", description="Terahertz UM-MIMO AoSA link-level simulator.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def run(command: str, config=None, out=".", seed=None, threads=None):
    """Programmatic entry point; returns the dict of written output paths."""
    cfg = load_config(config)
    if seed is not None:
        if seed < 0 or seed >= 1 << 64:
            raise ConfigError("--seed", "must fit in an unsigned 64-bit integer")
        cfg["seed"] = int(seed)
    if threads is None:
        env = os.environ.get("THZSIM_THREADS")
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise ConfigError("THZSIM_THREADS", f"not an integer: {env!r}") from None
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError("--out", f"cannot create output directory ({exc.strerror})") from None
    if not os.access(out, os.W_OK):
        raise ConfigError("--out", f"output directory not writable: {out}")
    return HANDLERS[command](cfg, out, threads=max(1, threads))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run(args.command, args.config, args.out, args.seed, args.threads)
    except (ConfigError, OSError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"thzsim: error: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
