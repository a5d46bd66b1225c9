"""SA-level line-of-sight UM-MIMO channel with spherical-wave propagation.

The transmitter lies in the plane z = 0 and the receiver in z = D, both
centred on the z axis and facing each other broadside.  Entry ``(m, n)`` of
the SA-level channel couples tx SA ``n`` to rx SA ``m``::

    H[m, n] = G_sa * a(f, r_mn) * exp(-j 2 pi f r_mn / c)

with ``r_mn`` the exact centre-to-centre distance, ``a`` the medium's
amplitude gain and ``G_sa = sqrt(n_ae_tx * n_ae_rx)`` the intra-SA
beamforming gain.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .array import AosaGeometry
from .physics import (LineCatalog, Medium, PhysicalConstants, absorption_coefficient,
                      path_gain_amplitude)

__all__ = [
    "LinkConfig",
    "ChannelMatrix",
    "ChannelMetrics",
    "ConditionMap",
    "los_channel",
    "los_channel_ae",
    "effective_sa_channel",
    "channel_metrics",
    "condition_number",
    "condition_map",
    "rayleigh_spacing",
    "local_minima",
    "tune_to_dip",
]


@dataclass(frozen=True)
class LinkConfig:
    tx_geometry: AosaGeometry
    rx_geometry: AosaGeometry
    D: float
    f: float
    medium: Medium = field(default_factory=Medium)
    catalog: Optional[LineCatalog] = None
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    include_reflection: bool = False
    reflection_coeff: complex = 0.0
    reflected_extra_path: float = 0.0

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError("D must be > 0")
        if not self.f > 0:
            raise ValueError("f must be > 0")
        if abs(self.reflection_coeff) > 1:
            raise ValueError("|reflection_coeff| must be <= 1")
        if self.reflected_extra_path < 0:
            raise ValueError("reflected_extra_path must be >= 0")

    def with_delta(self, delta: float) -> "LinkConfig":
        """Same link with both arrays rebuilt at SA pitch ``delta``."""
        return replace(self, tx_geometry=self.tx_geometry.with_delta(delta),
                       rx_geometry=self.rx_geometry.with_delta(delta))

    def with_distance(self, D: float) -> "LinkConfig":
        return replace(self, D=D)

    def swapped(self) -> "LinkConfig":
        return replace(self, tx_geometry=self.rx_geometry, rx_geometry=self.tx_geometry)


@dataclass(frozen=True)
class ChannelMatrix:
    entries: np.ndarray
    f: float
    D: float

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True)
class ChannelMetrics:
    singular_values: np.ndarray
    condition_number: float
    capacity_bits_per_hz: float


def _pair_distances(tx_pts: np.ndarray, rx_pts: np.ndarray, D) -> np.ndarray:
    # rows: rx points, cols: tx points; D may be an array (leading batch axis)
    diff = rx_pts[:, None, :2] - tx_pts[None, :, :2]
    rho2 = np.einsum("mnk,mnk->mn", diff, diff)
    dz = np.asarray(D, dtype=float)
    if dz.ndim == 0:
        return np.sqrt(rho2 + dz * dz)
    return np.sqrt(rho2[None, :, :] + (dz * dz)[:, None, None])


def _propagate(link: LinkConfig, r: np.ndarray, k: float) -> np.ndarray:
    amp = path_gain_amplitude(link.catalog, link.medium, link.constants, link.f, r, k=k)
    wavenumber = 2.0 * np.pi * link.f / link.constants.c
    h = amp * np.exp(-1j * wavenumber * r)
    if link.include_reflection and link.reflection_coeff != 0:
        r2 = r + link.reflected_extra_path
        amp2 = path_gain_amplitude(link.catalog, link.medium, link.constants, link.f, r2, k=k)
        h = h + link.reflection_coeff * amp2 * np.exp(-1j * wavenumber * r2)
    return h


def _absorption(link: LinkConfig) -> float:
    return absorption_coefficient(link.catalog, link.medium, link.constants, link.f)


def los_channel(link: LinkConfig) -> ChannelMatrix:
    """SA-level spherical-wave channel, shape ``(rx SAs, tx SAs)``."""
    tx, rx = link.tx_geometry, link.rx_geometry
    g_sa = math.sqrt(tx.n_ae_per_sa * rx.n_ae_per_sa)
    r = _pair_distances(tx.sa_centers, rx.sa_centers, link.D)
    H = g_sa * _propagate(link, r, _absorption(link))
    return ChannelMatrix(H, link.f, link.D)


def los_channel_ae(link: LinkConfig) -> np.ndarray:
    """Full AE-to-AE channel, shape ``(rx AEs, tx AEs)``.  Meant for small arrays."""
    r = _pair_distances(link.tx_geometry.positions, link.rx_geometry.positions, link.D)
    return _propagate(link, r, _absorption(link))


def effective_sa_channel(link: LinkConfig, H_ae: np.ndarray = None) -> ChannelMatrix:
    """Collapse the AE channel to SA level with broadside weights on every SA.

    Each SA combines its AEs with equal-phase weights ``1/sqrt(N)`` (steered
    at broadside, i.e. at the facing array).  Agrees with :func:`los_channel`
    when the SA aperture is small against the Fresnel zone of the link.
    """
    if H_ae is None:
        H_ae = los_channel_ae(link)
    tx, rx = link.tx_geometry, link.rx_geometry
    H = H_ae.reshape(rx.n_sa, rx.n_ae_per_sa, tx.n_sa, tx.n_ae_per_sa)
    H_sa = H.sum(axis=(1, 3)) / math.sqrt(tx.n_ae_per_sa * rx.n_ae_per_sa)
    return ChannelMatrix(H_sa, link.f, link.D)


def channel_metrics(H, snr_linear: float = 1.0) -> ChannelMetrics:
    """Singular values, condition number and equal-power capacity.

    ``capacity = sum_i log2(1 + snr * s_i**2 / N_t)`` with ``N_t`` the number
    of columns (tx SAs).
    """
    entries = H.entries if isinstance(H, ChannelMatrix) else np.asarray(H)
    if entries.ndim != 2:
        raise ValueError("channel must be a 2-D matrix")
    if not np.all(np.isfinite(entries)):
        raise ValueError("channel has non-finite entries")
    if not np.any(entries):
        raise ValueError("all-zero channel matrix")
    s = np.linalg.svd(entries, compute_uv=False)
    cond = math.inf if s[-1] == 0 else float(s[0] / s[-1])
    n_t = entries.shape[1]
    cap = float(np.sum(np.log2(1.0 + snr_linear * s * s / n_t)))
    return ChannelMetrics(s, cond, cap)


def condition_number(H) -> float:
    return channel_metrics(H).condition_number


@dataclass(frozen=True)
class ConditionMap:
    deltas: np.ndarray
    distances: np.ndarray
    cond: np.ndarray  # shape (len(deltas), len(distances))

    def rows(self):
        """(delta_m, D_m, cond_number) in row-major order, delta outer."""
        for i, delta in enumerate(self.deltas):
            for j, D in enumerate(self.distances):
                yield float(delta), float(D), float(self.cond[i, j])


def _condition_row(link: LinkConfig, delta: float, distances: np.ndarray,
                   k: float) -> np.ndarray:
    lk = link.with_delta(delta)
    r = _pair_distances(lk.tx_geometry.sa_centers, lk.rx_geometry.sa_centers, distances)
    H = _propagate(lk, r, k)
    s = np.linalg.svd(H, compute_uv=False)
    with np.errstate(divide="ignore"):
        return s[:, 0] / s[:, -1]


def condition_map(link: LinkConfig, deltas: Sequence[float], distances: Sequence[float],
                  threads: int = 1) -> ConditionMap:
    """Condition number over a (SA pitch, range) grid.

    Both arrays are rebuilt at every pitch.  The SA-level gain is a common
    scale factor and drops out of the ratio, so it is not applied here.
    Rows are independent; ``threads`` only changes the scheduling, never the
    numbers.
    """
    deltas = np.asarray(deltas, dtype=float)
    distances = np.asarray(distances, dtype=float)
    if np.any(deltas <= 0) or np.any(distances <= 0):
        raise ValueError("delta and D ranges must be positive")
    k = _absorption(link)
    if threads <= 1:
        rows = [_condition_row(link, dl, distances, k) for dl in deltas]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda dl: _condition_row(link, dl, distances, k), deltas))
    cond = np.array(rows).reshape(len(deltas), len(distances))
    return ConditionMap(deltas, distances, cond)


def rayleigh_spacing(f: float, D: float, K: int, c: float = PhysicalConstants.c) -> float:
    """Pitch ``sqrt(lambda D / K)`` making a K-element LoS ULA link orthogonal."""
    return math.sqrt(c / f * D / K)


def local_minima(values: np.ndarray) -> np.ndarray:
    """Indices of interior strict local minima of a 1-D sequence."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return np.array([], dtype=int)
    inner = (v[1:-1] < v[:-2]) & (v[1:-1] < v[2:])
    return np.nonzero(inner)[0] + 1


def tune_to_dip(link: LinkConfig, delta: float, span: float = 2.0, n: int = 401,
                max_span: float = 64.0):
    """Move the SA pitch to the best conditioning dip around ``delta``.

    Sweeps the pitch over ``[delta / span, delta * span]`` on a geometric
    grid, widening ``span`` (doubling, up to ``max_span``) until the sweep
    contains an interior local minimum of the condition number.  Of the
    minima found, the lowest one wins (ties go to the one closest to
    ``delta`` in log-pitch); it is then refined with a bounded scalar search
    between its grid neighbours.

    Returns
    -------
    (delta_opt, cond_opt) : (float, float)

    Raises
    ------
    ValueError
        If no dip is found within ``max_span``.
    """
    from scipy.optimize import minimize_scalar

    k = _absorption(link)
    D = np.array([link.D])

    def cond_at(x):
        return _condition_row(link, x, D, k)[0]

    while True:
        grid = np.geomspace(delta / span, delta * span, n)
        cond = np.array([cond_at(g) for g in grid])
        minima = local_minima(cond)
        if minima.size:
            break
        if span >= max_span:
            raise ValueError(f"no conditioning dip within a factor {max_span} of {delta}")
        span *= 2.0
    dist = np.abs(np.log(grid[minima] / delta))
    i = int(minima[np.lexsort((dist, np.round(cond[minima], 9)))[0]])
    res = minimize_scalar(cond_at, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                          options={"xatol": 1e-9 * grid[i]})
    if res.fun <= cond[i]:
        return float(res.x), float(res.fun)
    return float(grid[i]), float(cond[i])
