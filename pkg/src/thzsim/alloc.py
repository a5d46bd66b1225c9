"""Distance-dependent transmission windows and water-filling power allocation.

A grid frequency belongs to a window when its absorption loss, i.e. total
loss minus the spreading loss at the same frequency and distance, stays
within ``threshold_db``.  The band is cut into equal cells (sub-windows)
centred on the scan grid; windows are maximal runs of in-window cells and
power is water-filled over the cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .physics import (LineCatalog, Medium, PhysicalConstants, absorption_coefficient,
                      absorption_loss_db, absorption_noise_psd, total_path_loss_db)

__all__ = [
    "WindowSet",
    "PowerAllocation",
    "DistanceSearch",
    "band_grid",
    "find_windows",
    "waterfill",
    "subwindow_gains",
    "rate_at_distance",
    "max_distance_for_rate",
]


@dataclass(frozen=True)
class WindowSet:
    d: float
    windows: Tuple[Tuple[float, float], ...]
    threshold_db: float
    band: Tuple[float, float]
    edges: np.ndarray
    mask: np.ndarray
    window_of_cell: np.ndarray  # window index per cell, -1 outside windows

    @property
    def total_bandwidth(self) -> float:
        return float(sum(hi - lo for lo, hi in self.windows))

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def rows(self):
        """(d_m, f_lo_hz, f_hi_hz) per window."""
        for lo, hi in self.windows:
            yield self.d, lo, hi


@dataclass(frozen=True)
class PowerAllocation:
    powers: np.ndarray
    water_level: float
    budget: float
    rate: float
    rates: np.ndarray
    gains: np.ndarray
    bandwidths: np.ndarray
    gap: float = 1.0

    def kkt_residual(self) -> float:
        """Largest violation of the water-filling optimality conditions (W).

        Covers the budget equality ``sum p_i = budget``, ``p_i >= 0``,
        stationarity on active channels ``B_i mu - gap / g_i - p_i = 0`` and
        ``B_i mu <= gap / g_i`` on idle ones.
        """
        p = self.powers
        resid = max(abs(float(np.sum(p)) - self.budget), float(np.max(np.maximum(-p, 0.0))))
        on = p > 0
        if on.any():
            r = self.bandwidths[on] * self.water_level - self.gap / self.gains[on] - p[on]
            resid = max(resid, float(np.max(np.abs(r))))
        off = ~on & (self.gains > 0)
        if off.any():
            excess = self.bandwidths[off] * self.water_level - self.gap / self.gains[off]
            resid = max(resid, float(np.max(np.maximum(excess, 0.0))))
        return resid


def band_grid(band: Sequence[float], grid_step: float) -> np.ndarray:
    """Cell edges covering ``band`` with cells no wider than ``grid_step``."""
    f_min, f_max = float(band[0]), float(band[1])
    if not f_min < f_max:
        raise ValueError("empty band: need f_min < f_max")
    if not grid_step > 0:
        raise ValueError("grid_step must be > 0")
    n = max(1, int(math.ceil((f_max - f_min) / grid_step - 1e-9)))
    return np.linspace(f_min, f_max, n + 1)


def _runs(mask: np.ndarray):
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    change = np.diff(padded)
    return list(zip(np.nonzero(change == 1)[0], np.nonzero(change == -1)[0] - 1))


def find_windows(catalog: Optional[LineCatalog], medium: Medium,
                 constants: PhysicalConstants, d: float, band: Sequence[float],
                 threshold_db: float = 3.0, grid_step: float = 1e9,
                 k: np.ndarray = None) -> WindowSet:
    """Transmission windows at distance ``d``.

    Parameters
    ----------
    band : (f_min, f_max)
        Scanned band in Hz.
    threshold_db : float
        Allowed absorption loss on top of the spreading baseline.
    grid_step : float
        Maximum cell width in Hz.
    k : np.ndarray, optional
        Precomputed absorption coefficient at the cell centres.
    """
    if not d > 0:
        raise ValueError("d must be > 0")
    edges = band_grid(band, grid_step)
    centers = 0.5 * (edges[:-1] + edges[1:])
    if k is None:
        k = absorption_coefficient(catalog, medium, constants, centers)
    excess = absorption_loss_db(k, d)
    mask = excess <= threshold_db
    window_of_cell = np.full(len(centers), -1, dtype=int)
    windows = []
    for w, (i0, i1) in enumerate(_runs(mask)):
        windows.append((float(edges[i0]), float(edges[i1 + 1])))
        window_of_cell[i0:i1 + 1] = w
    return WindowSet(float(d), tuple(windows), float(threshold_db),
                     (float(edges[0]), float(edges[-1])), edges, mask, window_of_cell)


def waterfill(gains: Sequence[float], budget: float, bandwidths: Sequence[float] = None,
              gap: float = 1.0) -> PowerAllocation:
    """Capacity-maximising power split over parallel channels.

    Maximises ``sum_i B_i log2(1 + g_i p_i / gap)`` subject to
    ``sum_i p_i = budget``.  The solution is ``p_i = max(0, B_i mu - gap / g_i)``;
    with ``bandwidths`` omitted every ``B_i = 1`` and this is the textbook
    ``p_i = max(0, mu - 1 / g_i)``.

    Parameters
    ----------
    gains : sequence of float
        Channel gain-to-noise ratios ``|h|**2 / N`` (1/W), >= 0.
    budget : float
        Total power in W, > 0.
    bandwidths : sequence of float, optional
        Per-channel bandwidth in Hz; also the rate weights.
    gap : float
        SNR gap, >= 1.
    """
    g = np.asarray(gains, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("gains must be a non-empty 1-D sequence")
    if np.any(g < 0) or not np.all(np.isfinite(g)):
        raise ValueError("gains must be finite and >= 0")
    if not np.any(g > 0):
        raise ValueError("all gains are zero")
    if not budget > 0:
        raise ValueError("budget must be > 0")
    if gap < 1:
        raise ValueError("gap must be >= 1")
    w = np.ones_like(g) if bandwidths is None else np.asarray(bandwidths, dtype=float)
    if w.shape != g.shape or np.any(w <= 0):
        raise ValueError("bandwidths must be positive and match gains")

    pos = g > 0
    floor = np.full_like(g, np.inf)
    floor[pos] = gap / g[pos]
    # channel i switches on once mu exceeds floor_i / w_i
    order = np.argsort(floor / w, kind="stable")
    thresholds = (floor / w)[order]
    cum_floor = np.cumsum(floor[order])
    cum_w = np.cumsum(w[order])
    n_on = 1
    mu = (budget + cum_floor[0]) / cum_w[0]
    for m in range(1, int(pos.sum())):
        cand = (budget + cum_floor[m]) / cum_w[m]
        if cand <= thresholds[m]:
            break
        n_on, mu = m + 1, cand
    p = np.zeros_like(g)
    on = order[:n_on]
    p[on] = np.maximum(w[on] * mu - floor[on], 0.0)
    rates = w * np.log2(1.0 + g * p / gap)
    return PowerAllocation(p, float(mu), float(budget), float(rates.sum()), rates, g, w,
                           float(gap))


def subwindow_gains(catalog, medium, constants, d: float, windows: WindowSet,
                    array_gain: float = 1.0, k: np.ndarray = None,
                    noise_temperature: float = None) -> Tuple[np.ndarray, np.ndarray]:
    """Gain-to-noise ratio (1/W) and bandwidth of every in-window cell.

    ``g = array_gain * 10**(-loss/10) / ((k_B T + N_abs) * B)`` with the
    absorption noise PSD ``N_abs`` of the cell at distance ``d``.
    """
    centers = windows.centers[windows.mask]
    widths = windows.widths[windows.mask]
    if k is None:
        k = absorption_coefficient(catalog, medium, constants, centers)
    T = medium.T if noise_temperature is None else noise_temperature
    loss = total_path_loss_db(catalog, medium, constants, centers, d, k=k)
    psd = constants.k_B * T + absorption_noise_psd(catalog, medium, constants, centers, d, k=k)
    return array_gain * 10.0 ** (-loss / 10.0) / (psd * widths), widths


def rate_at_distance(catalog, medium, constants, d, array_gain, budget, band,
                     threshold_db=3.0, grid_step=1e9, gap=1.0, _k_cells=None):
    """Water-filled Shannon rate (bit/s) over the windows open at distance ``d``.

    Returns ``(rate, WindowSet, PowerAllocation or None)``.
    """
    edges = band_grid(band, grid_step)
    if _k_cells is None:
        _k_cells = absorption_coefficient(catalog, medium, constants,
                                          0.5 * (edges[:-1] + edges[1:]))
    ws = find_windows(catalog, medium, constants, d, band, threshold_db, grid_step,
                      k=_k_cells)
    if not ws.mask.any():
        return 0.0, ws, None
    g, widths = subwindow_gains(catalog, medium, constants, d, ws, array_gain,
                                k=_k_cells[ws.mask])
    if not np.any(g > 0):
        return 0.0, ws, None
    pa = waterfill(g, budget, bandwidths=widths, gap=gap)
    return pa.rate, ws, pa


@dataclass(frozen=True)
class DistanceSearch:
    d: float
    rate: float
    target_rate: float
    windows: WindowSet
    allocation: Optional[PowerAllocation]
    iterations: int


def max_distance_for_rate(catalog, medium, constants, array_gain: float, budget: float,
                          target_rate: float, band, threshold_db: float = 3.0,
                          grid_step: float = 1e9, d_bounds=(0.01, 100.0), tol: float = 0.01,
                          gap: float = 1.0) -> DistanceSearch:
    """Largest distance whose water-filled rate still reaches ``target_rate``.

    Bisects on ``d`` inside ``d_bounds`` until the bracket is narrower than
    ``tol``; the rate is nonincreasing in ``d`` (windows shrink, gains drop),
    which is what makes bisection valid.  Returns the upper bound when it is
    already feasible.

    Raises
    ------
    ValueError
        If the target is not met even at the lower distance bound.
    """
    if not target_rate > 0:
        raise ValueError("target_rate must be > 0")
    d_lo, d_hi = float(d_bounds[0]), float(d_bounds[1])
    if not 0 < d_lo < d_hi:
        raise ValueError("need 0 < d_min < d_max")
    edges = band_grid(band, grid_step)
    k = absorption_coefficient(catalog, medium, constants, 0.5 * (edges[:-1] + edges[1:]))

    def evaluate(d):
        return rate_at_distance(catalog, medium, constants, d, array_gain, budget, band,
                                threshold_db, grid_step, gap, _k_cells=k)

    top = evaluate(d_hi)
    if top[0] >= target_rate:
        return DistanceSearch(d_hi, top[0], target_rate, top[1], top[2], 0)
    best = evaluate(d_lo)
    if best[0] < target_rate:
        raise ValueError(
            f"target rate {target_rate:.4g} bit/s unreachable even at d={d_lo} m "
            f"(rate {best[0]:.4g} bit/s)")
    it = 0
    while d_hi - d_lo > tol:
        mid = 0.5 * (d_lo + d_hi)
        res = evaluate(mid)
        if res[0] >= target_rate:
            d_lo, best = mid, res
        else:
            d_hi = mid
        it += 1
    return DistanceSearch(d_lo, best[0], target_rate, best[1], best[2], it)
