"""Molecular absorption and path loss in the 0.1-10 THz band.

The absorption coefficient is a line-by-line sum over a catalog of
resonances, each with a pressure-shifted centre and a Lorentz profile::

    k(f) = c_stp * sum_{(i,g)} n_{i,g} * S * L(f; f_c, alpha)

    n_{i,g} = q * p * N_A / (R * T)
    f_c     = f_c0 + delta_shift * p / p_ref
    alpha   = (alpha_air * (1 - q) + alpha_self * q) * (p / p_ref) * (T_ref / T) ** gamma
    L       = (1 / pi) * alpha / ((f - f_c) ** 2 + alpha ** 2)
    c_stp   = (p / p_ref) * (T_stp / T)        (optional, on by default)

Broadening and shift coefficients are taken as half-widths in Hz per
atmosphere, i.e. already converted from the cm^-1/atm convention of the
HITRAN tables.  Line intensities are in Hz*m^2/molecule so that ``S * L``
is a cross-section in m^2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

__all__ = [
    "PhysicalConstants",
    "SpectralLine",
    "LineCatalog",
    "Medium",
    "CatalogError",
    "CATALOG_COLUMNS",
    "BAND_MIN_HZ",
    "BAND_MAX_HZ",
    "load_catalog",
    "write_catalog",
    "builtin_catalog_path",
    "molecular_density",
    "line_halfwidths",
    "absorption_coefficient",
    "transmittance",
    "spreading_loss_db",
    "absorption_loss_db",
    "total_path_loss_db",
    "path_gain_amplitude",
    "absorption_noise_psd",
    "pathloss_grid",
]

CATALOG_COLUMNS = (
    "gas_id",
    "iso_id",
    "f_c0_hz",
    "S_hz_m2",
    "alpha_air",
    "alpha_self",
    "gamma",
    "delta_shift",
)

BAND_MIN_HZ = 0.1e12
BAND_MAX_HZ = 10e12

# 10 * log10(e): converts nepers of power attenuation (k * d) to dB
_DB_PER_NEPER = 10.0 * math.log10(math.e)


@dataclass(frozen=True)
class PhysicalConstants:
    h: float = 6.6262e-34
    k_B: float = 1.3806e-23
    R: float = 8.2051e-5
    N_A: float = 6.0221e23
    c: float = 2.9979e8


@dataclass(frozen=True)
class SpectralLine:
    gas_id: str
    isotopologue_id: str
    f_c0: float
    S: float
    alpha_air: float
    alpha_self: float
    gamma: float
    delta_shift: float

    def __post_init__(self):
        values = (self.f_c0, self.S, self.alpha_air, self.alpha_self,
                  self.gamma, self.delta_shift)
        if any(math.isnan(v) for v in values):
            raise ValueError("spectral line has NaN fields")
        if self.S < 0 or self.alpha_air < 0 or self.alpha_self < 0 or self.f_c0 < 0:
            raise ValueError("S, alpha_air, alpha_self and f_c0 must be >= 0")
        if not -1.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma={self.gamma} outside [-1, 1]")


@dataclass(frozen=True)
class LineCatalog:
    lines: tuple = ()
    source_tag: str = ""

    def __post_init__(self):
        ordered = tuple(sorted(self.lines, key=lambda ln: ln.f_c0))
        object.__setattr__(self, "lines", ordered)

    def __len__(self):
        return len(self.lines)

    def __iter__(self):
        return iter(self.lines)

    @property
    def centers(self) -> np.ndarray:
        return np.array([ln.f_c0 for ln in self.lines], dtype=float)

    def gas_ids(self) -> set:
        return {ln.gas_id for ln in self.lines}

    def as_arrays(self) -> dict:
        """Column arrays keyed by field name (empty arrays for an empty catalog)."""
        cols = {}
        for name in ("f_c0", "S", "alpha_air", "alpha_self", "gamma", "delta_shift"):
            cols[name] = np.array([getattr(ln, name) for ln in self.lines], dtype=float)
        cols["gas_id"] = [ln.gas_id for ln in self.lines]
        return cols


@dataclass(frozen=True)
class Medium:
    """Thermodynamic state of the propagation medium.

    Temperatures in K, pressures in atm, ``mixing_ratios`` maps a gas id
    (as used in the catalog) to its molar fraction.
    """

    T: float = 296.0
    T_ref: float = 296.0
    T_stp: float = 273.15
    p: float = 1.0
    p_ref: float = 1.0
    mixing_ratios: Mapping[str, float] = field(default_factory=dict)
    stp_correction: bool = True

    def __post_init__(self):
        if not (self.T > 0 and self.T_ref > 0 and self.T_stp > 0):
            raise ValueError("temperatures must be > 0")
        if not (self.p > 0 and self.p_ref > 0):
            raise ValueError("pressures must be > 0")
        ratios = {str(k): float(v) for k, v in dict(self.mixing_ratios).items()}
        for gas, q in ratios.items():
            if not 0.0 <= q <= 1.0:
                raise ValueError(f"mixing ratio of gas {gas!r} = {q} outside [0, 1]")
        if sum(ratios.values()) > 1.0 + 1e-12:
            raise ValueError("mixing ratios sum to more than 1")
        object.__setattr__(self, "mixing_ratios", ratios)

    @classmethod
    def table_defaults(cls, gas_id: str = "1") -> "Medium":
        """Low-pressure parameter set: 396 K, 0.1 atm, 0.05 % mixing ratio."""
        return cls(T=396.0, T_ref=296.0, T_stp=273.15, p=0.1, p_ref=1.0,
                   mixing_ratios={gas_id: 5e-4})

    @classmethod
    def humid_air(cls, h2o: float = 0.01) -> "Medium":
        """Sea-level air at 296 K carrying ``h2o`` molar fraction of water vapour."""
        return cls(T=296.0, p=1.0, mixing_ratios={"1": h2o})

    def q(self, gas_id) -> float:
        return self.mixing_ratios.get(str(gas_id), 0.0)


class CatalogError(ValueError):
    """Raised for unreadable or malformed line catalogs."""

    def __init__(self, message, line=None, column=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column}")
        prefix = f"{', '.join(loc)}: " if loc else ""
        super().__init__(prefix + message)
        self.line = line
        self.column = column


def builtin_catalog_path(name: str = "h2o_fixture") -> Path:
    """Path of a catalog shipped with the package."""
    path = Path(__file__).parent / "data" / f"{name}.csv"
    if not path.exists():
        raise FileNotFoundError(f"no builtin catalog named {name!r}")
    return path


def load_catalog(path: Union[str, Path]) -> LineCatalog:
    """Read a line catalog from CSV.

    The header row is required and must list :data:`CATALOG_COLUMNS` in
    order.  Lines starting with ``#`` and blank lines are skipped.  Errors
    carry the 1-based file line number and the offending column name.
    """
    path = Path(path)
    if not path.exists():
        raise CatalogError(f"catalog file not found: {path}")

    lines = []
    header_seen = False
    with path.open(newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            row = next(csv.reader([text]))
            row = [cell.strip() for cell in row]
            if not header_seen:
                if tuple(row) != CATALOG_COLUMNS:
                    raise CatalogError(
                        "header must be " + ",".join(CATALOG_COLUMNS), line=lineno)
                header_seen = True
                continue
            if len(row) != len(CATALOG_COLUMNS):
                raise CatalogError(
                    f"expected {len(CATALOG_COLUMNS)} fields, got {len(row)}", line=lineno)
            values = []
            for name, cell in zip(CATALOG_COLUMNS[2:], row[2:]):
                try:
                    v = float(cell)
                except ValueError:
                    raise CatalogError(f"not a number: {cell!r}", line=lineno,
                                       column=name) from None
                if math.isnan(v) or math.isinf(v):
                    raise CatalogError(f"non-finite value {cell!r}", line=lineno,
                                       column=name)
                values.append(v)
            f_c0, S, a_air, a_self, gamma, shift = values
            for name, v in (("f_c0_hz", f_c0), ("S_hz_m2", S),
                            ("alpha_air", a_air), ("alpha_self", a_self)):
                if v < 0:
                    raise CatalogError(f"must be >= 0, got {v}", line=lineno, column=name)
            if not -1.0 <= gamma <= 1.0:
                raise CatalogError(f"gamma {gamma} outside [-1, 1]", line=lineno,
                                   column="gamma")
            if not row[0] or not row[1]:
                raise CatalogError("empty identifier", line=lineno,
                                   column="gas_id" if not row[0] else "iso_id")
            lines.append(SpectralLine(row[0], row[1], f_c0, S, a_air, a_self, gamma, shift))

    if not header_seen or not lines:
        raise CatalogError(f"empty catalog: {path}")
    return LineCatalog(tuple(lines), source_tag=str(path))


def write_catalog(catalog: LineCatalog, path: Union[str, Path]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CATALOG_COLUMNS)
        for ln in catalog:
            w.writerow([ln.gas_id, ln.isotopologue_id, repr(ln.f_c0), repr(ln.S),
                        repr(ln.alpha_air), repr(ln.alpha_self), repr(ln.gamma),
                        repr(ln.delta_shift)])


def molecular_density(medium: Medium, constants: PhysicalConstants, gas_id) -> float:
    """Number density (molecule/m^3) of one gas from the ideal-gas law."""
    key = str(gas_id)
    if key not in medium.mixing_ratios:
        raise KeyError(f"gas {key!r} not present in the medium")
    q = medium.mixing_ratios[key]
    return q * medium.p / (constants.R * medium.T) * constants.N_A


def _stp_factor(medium: Medium) -> float:
    if not medium.stp_correction:
        return 1.0
    return (medium.p / medium.p_ref) * (medium.T_stp / medium.T)


def line_halfwidths(catalog: LineCatalog, medium: Medium):
    """Shifted centres and Lorentz half-widths (Hz) of every catalog line."""
    cols = catalog.as_arrays()
    q = np.array([medium.q(g) for g in cols["gas_id"]], dtype=float)
    p_rel = medium.p / medium.p_ref
    centers = cols["f_c0"] + cols["delta_shift"] * p_rel
    alpha = ((cols["alpha_air"] * (1.0 - q) + cols["alpha_self"] * q) * p_rel
             * (medium.T_ref / medium.T) ** cols["gamma"])
    return centers, alpha


def _line_weights(catalog, medium, constants):
    # n_{i,g} * S per line, including the STP factor; gases absent from the medium get 0
    cols = catalog.as_arrays()
    dens = {}
    for gas in set(cols["gas_id"]):
        dens[gas] = molecular_density(medium, constants, gas) if gas in medium.mixing_ratios else 0.0
    n = np.array([dens[g] for g in cols["gas_id"]], dtype=float)
    return _stp_factor(medium) * n * cols["S"]


def absorption_coefficient(catalog: Optional[LineCatalog], medium: Medium,
                           constants: PhysicalConstants, f,
                           prune_halfwidths: Optional[float] = None,
                           chunk: int = 4096):
    """Absorption coefficient k(f) in 1/m.

    Parameters
    ----------
    catalog : LineCatalog or None
        ``None`` or an empty catalog yields ``k = 0``.
    f : float or array_like
        Frequencies in Hz, all > 0.
    prune_halfwidths : float, optional
        Fast path: drop lines further than this many half-widths from ``f``.
        The default (``None``) sums every line.

    Returns
    -------
    float or np.ndarray
        Same shape as ``f``.
    """
    f_arr = np.asarray(f, dtype=float)
    if np.any(~(f_arr > 0)):
        raise ValueError("frequency must be > 0")
    if catalog is None or len(catalog) == 0:
        out = np.zeros_like(f_arr)
        return float(out) if out.ndim == 0 else out

    centers, alpha = line_halfwidths(catalog, medium)
    weights = _line_weights(catalog, medium, constants)

    flat = f_arr.ravel()
    out = np.empty_like(flat)
    for start in range(0, flat.size, chunk):
        fs = flat[start:start + chunk, None]
        detune = fs - centers[None, :]
        profile = (alpha / np.pi) / (detune * detune + alpha * alpha)
        contrib = weights * profile
        if prune_halfwidths is not None:
            contrib = np.where(np.abs(detune) <= prune_halfwidths * alpha, contrib, 0.0)
        out[start:start + chunk] = contrib.sum(axis=1)
    out = out.reshape(f_arr.shape)
    return float(out) if out.ndim == 0 else out


def transmittance(k, d):
    """Beer-Lambert transmittance exp(-k d)."""
    k = np.asarray(k, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(k < 0) or np.any(d < 0):
        raise ValueError("k and d must be >= 0")
    tau = np.exp(-k * d)
    return float(tau) if tau.ndim == 0 else tau


def spreading_loss_db(f, d, constants: PhysicalConstants = PhysicalConstants()):
    """Free-space (Friis) spreading loss ``20 log10(4 pi f d / c)`` in dB."""
    f = np.asarray(f, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(~(f > 0)) or np.any(~(d > 0)):
        raise ValueError("f and d must be > 0")
    loss = 20.0 * np.log10(4.0 * np.pi * f * d / constants.c)
    return float(loss) if loss.ndim == 0 else loss


def absorption_loss_db(k, d):
    """Molecular absorption loss ``10 k d log10(e)`` in dB."""
    out = _DB_PER_NEPER * np.asarray(k, dtype=float) * np.asarray(d, dtype=float)
    return float(out) if out.ndim == 0 else out


def _check_band(f):
    f = np.asarray(f, dtype=float)
    if np.any(f < BAND_MIN_HZ * (1 - 1e-12)) or np.any(f > BAND_MAX_HZ * (1 + 1e-12)):
        raise ValueError("frequency outside the 0.1-10 THz band of validity")


def total_path_loss_db(catalog, medium, constants, f, d, k=None):
    """Spreading plus absorption loss in dB.

    ``f`` and ``d`` broadcast against each other.  A precomputed ``k`` (same
    shape as ``f``) skips the line-by-line evaluation.
    """
    _check_band(f)
    if k is None:
        k = absorption_coefficient(catalog, medium, constants, f)
    d_arr = np.asarray(d, dtype=float)
    if np.any(~(d_arr > 0)):
        raise ValueError("d must be > 0")
    return spreading_loss_db(f, d, constants) + absorption_loss_db(k, d)


def path_gain_amplitude(catalog, medium, constants, f, d, k=None):
    """Linear amplitude ``10 ** (-loss_db / 20)`` of the medium."""
    loss = total_path_loss_db(catalog, medium, constants, f, d, k=k)
    out = 10.0 ** (-np.asarray(loss) / 20.0)
    return float(out) if out.ndim == 0 else out


def absorption_noise_psd(catalog, medium, constants, f, d, k=None):
    """Absorption (sky) noise PSD ``k_B T (1 - tau)`` in W/Hz."""
    f_arr = np.asarray(f, dtype=float)
    d_arr = np.asarray(d, dtype=float)
    if np.any(~(f_arr > 0)) or np.any(~(d_arr > 0)):
        raise ValueError("f and d must be > 0")
    if k is None:
        k = absorption_coefficient(catalog, medium, constants, f_arr)
    # -expm1 keeps precision when k*d is tiny
    emissivity = -np.expm1(-np.asarray(k, dtype=float) * d_arr)
    out = constants.k_B * medium.T * emissivity
    return float(out) if np.ndim(out) == 0 else out


def pathloss_grid(catalog, medium, constants, freqs: Sequence[float],
                  distances: Sequence[float]) -> np.ndarray:
    """Loss in dB on a grid, shape ``(len(freqs), len(distances))``."""
    freqs = np.asarray(freqs, dtype=float)
    distances = np.asarray(distances, dtype=float)
    k = absorption_coefficient(catalog, medium, constants, freqs)
    return total_path_loss_db(catalog, medium, constants, freqs[:, None],
                              distances[None, :], k=k[:, None])
