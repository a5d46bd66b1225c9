"""Array-of-subarrays (AoSA) geometry, frequency maps and steering vectors.

Conventions
-----------
Arrays lie in the xy-plane with the normal along +z and are centred on the
origin.  SA columns run along x, SA rows along y; the same holds for AEs
inside a SA.  Elements are numbered SA by SA (row-major over the SA grid),
and row-major over the AE grid inside each SA.

Directions use ``theta`` as the polar angle from the array normal and
``phi`` as the azimuth in the array plane measured from +x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .physics import PhysicalConstants

__all__ = [
    "AosaGeometry",
    "FrequencyMap",
    "SteeringVector",
    "InfeasibleMapError",
    "build_geometry",
    "steering_vector",
    "array_gain_db",
    "min_carriers_per_axis",
    "assign_interleaved_map",
    "geometry_rows",
]

# relative slack on spacing comparisons, absorbs rounding in positions
_SPACING_RTOL = 1e-9


@dataclass(frozen=True)
class AosaGeometry:
    sa_rows: int
    sa_cols: int
    ae_rows: int
    ae_cols: int
    delta: float
    delta_small: float
    f_design: float
    plasmonic_factor: float
    c: float
    positions: np.ndarray = field(repr=False, compare=False)
    sa_centers: np.ndarray = field(repr=False, compare=False)

    @property
    def lam(self) -> float:
        return self.c / self.f_design

    @property
    def lambda_spp(self) -> float:
        return self.lam / self.plasmonic_factor

    @property
    def n_sa(self) -> int:
        return self.sa_rows * self.sa_cols

    @property
    def n_ae_per_sa(self) -> int:
        return self.ae_rows * self.ae_cols

    @property
    def n_elements(self) -> int:
        return self.n_sa * self.n_ae_per_sa

    @property
    def sa_index(self) -> np.ndarray:
        """SA index of every AE."""
        return np.repeat(np.arange(self.n_sa), self.n_ae_per_sa)

    @property
    def footprint(self) -> Tuple[float, float]:
        """Extent (x, y) in m, from the grid parameters."""
        wx = (self.sa_cols - 1) * self.delta + (self.ae_cols - 1) * self.delta_small
        wy = (self.sa_rows - 1) * self.delta + (self.ae_rows - 1) * self.delta_small
        return wx, wy

    @property
    def footprint_area(self) -> float:
        wx, wy = self.footprint
        return wx * wy

    @property
    def coupling_ok(self) -> bool:
        """True when the AE pitch is at least the plasmonic wavelength."""
        return self.delta_small >= self.lambda_spp * (1 - _SPACING_RTOL)

    def sa_positions(self, sa_index: int) -> np.ndarray:
        n = self.n_ae_per_sa
        return self.positions[sa_index * n:(sa_index + 1) * n]

    def with_delta(self, delta: float) -> "AosaGeometry":
        return build_geometry(self.sa_rows, self.sa_cols, self.ae_rows, self.ae_cols,
                              delta, self.delta_small, self.f_design,
                              self.plasmonic_factor, c=self.c)


def _centered(n: int) -> np.ndarray:
    return np.arange(n, dtype=float) - (n - 1) / 2.0


def build_geometry(sa_rows: int, sa_cols: int, ae_rows: int, ae_cols: int,
                   delta: float, delta_small: float, f_design: float,
                   plasmonic_factor: float = 15.0,
                   c: float = PhysicalConstants.c) -> AosaGeometry:
    """Lay out a planar AoSA.

    Parameters
    ----------
    sa_rows, sa_cols : int
        SA grid.
    ae_rows, ae_cols : int
        AE grid inside each SA.
    delta : float
        SA pitch in m (centre to centre).
    delta_small : float
        AE pitch in m.
    f_design : float
        Design frequency in Hz; sets ``lam`` and ``lambda_spp``.
    plasmonic_factor : float
        ``lam / lambda_spp``; 15 for graphene.

    Raises
    ------
    ValueError
        On non-positive counts or spacings, or when neighbouring SAs would
        overlap (``delta`` smaller than an SA's own extent).
    """
    counts = (sa_rows, sa_cols, ae_rows, ae_cols)
    if any(int(n) != n or n < 1 for n in counts):
        raise ValueError("all counts must be integers >= 1")
    if not (delta > 0 and delta_small > 0 and f_design > 0 and plasmonic_factor > 0):
        raise ValueError("spacings, f_design and plasmonic_factor must be > 0")
    sa_rows, sa_cols, ae_rows, ae_cols = (int(n) for n in counts)
    for n_sa, n_ae, axis in ((sa_cols, ae_cols, "x"), (sa_rows, ae_rows, "y")):
        if n_sa > 1 and delta < (n_ae - 1) * delta_small:
            raise ValueError(
                f"SAs overlap along {axis}: delta={delta} < {(n_ae - 1) * delta_small}")

    sy, sx = np.meshgrid(_centered(sa_rows) * delta, _centered(sa_cols) * delta,
                         indexing="ij")
    ay, ax = np.meshgrid(_centered(ae_rows) * delta_small,
                         _centered(ae_cols) * delta_small, indexing="ij")
    sa_xy = np.stack([sx.ravel(), sy.ravel()], axis=1)
    ae_xy = np.stack([ax.ravel(), ay.ravel()], axis=1)

    xy = (sa_xy[:, None, :] + ae_xy[None, :, :]).reshape(-1, 2)
    positions = np.column_stack([xy, np.zeros(len(xy))])
    sa_centers = np.column_stack([sa_xy, np.zeros(len(sa_xy))])
    positions.setflags(write=False)
    sa_centers.setflags(write=False)
    return AosaGeometry(sa_rows, sa_cols, ae_rows, ae_cols, float(delta),
                        float(delta_small), float(f_design), float(plasmonic_factor),
                        float(c), positions, sa_centers)


@dataclass(frozen=True)
class SteeringVector:
    entries: np.ndarray
    direction: Tuple[float, float]
    f: float


def unit_direction(theta: float, phi: float) -> np.ndarray:
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


def steering_vector(geometry: AosaGeometry, sa_index: int, theta: float, phi: float,
                    f: float) -> SteeringVector:
    """Phase weights of one SA toward ``(theta, phi)`` at frequency ``f``.

    Entry ``n`` is ``exp(-j 2 pi f / c * (p_n - p_sa) . u)`` with ``p_sa`` the
    SA centre.
    """
    if not 0 <= sa_index < geometry.n_sa:
        raise IndexError(f"sa_index {sa_index} out of range")
    if not f > 0:
        raise ValueError("f must be > 0")
    rel = geometry.sa_positions(sa_index) - geometry.sa_centers[sa_index]
    phase = -2.0 * np.pi * f / geometry.c * (rel @ unit_direction(theta, phi))
    return SteeringVector(np.exp(1j * phase), (theta, phi), f)


def array_gain_db(n_elements: int) -> float:
    """Coherent array gain ``10 log10(N)``."""
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    return 10.0 * math.log10(n_elements)


class InfeasibleMapError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyMap:
    assignment: np.ndarray
    carriers: Tuple[float, ...]
    scheme: str
    period: Tuple[int, int]
    min_same_spacing: Tuple[float, ...]
    required_spacing: Tuple[float, ...]
    coupling_ok: bool

    @property
    def valid(self) -> bool:
        return all(s >= r * (1 - _SPACING_RTOL)
                   for s, r in zip(self.min_same_spacing, self.required_spacing))


def min_carriers_per_axis(delta_small: float, lam: float) -> int:
    """Smallest interleaving period so that same-carrier pitch reaches lam/2."""
    ratio = (lam / 2.0) / delta_small
    n = math.ceil(ratio)
    # guard against ratio landing a hair above an integer through rounding
    if n - ratio > 1 - _SPACING_RTOL:
        n -= 1
    return max(n, 1)


def _tile_shape(n_carriers: int) -> Tuple[int, int]:
    # most square factorisation rows x cols == n_carriers, cols >= rows
    best = (1, n_carriers)
    for r in range(1, int(math.isqrt(n_carriers)) + 1):
        if n_carriers % r == 0:
            best = (r, n_carriers // r)
    return best


def _grid_coords(geometry: AosaGeometry, scheme: str):
    # (row, col) of each AE on the grid being interleaved
    n_ae = geometry.n_ae_per_sa
    sa = np.arange(geometry.n_sa)
    sa_r, sa_c = np.repeat(sa // geometry.sa_cols, n_ae), np.repeat(sa % geometry.sa_cols, n_ae)
    if scheme == "per_SA":
        return sa_r, sa_c
    ae = np.tile(np.arange(n_ae), geometry.n_sa)
    ae_r, ae_c = ae // geometry.ae_cols, ae % geometry.ae_cols
    return sa_r * geometry.ae_rows + ae_r, sa_c * geometry.ae_cols + ae_c


def _min_pair_distance(points: np.ndarray) -> float:
    if len(points) < 2:
        return math.inf
    dist, _ = cKDTree(points).query(points, k=2)
    return float(dist[:, 1].min())


def assign_interleaved_map(geometry: AosaGeometry, carriers: Sequence[float],
                           scheme: str = "per_AE", strict: bool = True) -> FrequencyMap:
    """Interleave carriers over the AE grid (``per_AE``) or the SA grid (``per_SA``).

    The carriers are laid out in a ``p_r x p_c`` tile (the most square
    factorisation of the carrier count), numbered row-major, and the tile is
    repeated cyclically over the grid.  Same-carrier AEs therefore sit
    ``p_c`` columns and ``p_r`` rows apart.  Every same-carrier pair must be
    at least half its carrier wavelength apart; this is checked on the
    actual positions.

    Raises
    ------
    InfeasibleMapError
        If ``strict`` and some carrier violates the half-wavelength rule.
    """
    carriers = tuple(float(fc) for fc in carriers)
    if not carriers:
        raise ValueError("need at least one carrier")
    if any(b < a for a, b in zip(carriers, carriers[1:])):
        raise ValueError("carriers must be sorted ascending")
    if scheme not in ("per_AE", "per_SA"):
        raise ValueError(f"unknown scheme {scheme!r}")

    p_r, p_c = _tile_shape(len(carriers))
    rows, cols = _grid_coords(geometry, scheme)
    assignment = (rows % p_r) * p_c + (cols % p_c)

    spacing, required = [], []
    for idx, fc in enumerate(carriers):
        pts = geometry.positions[assignment == idx]
        spacing.append(_min_pair_distance(pts))
        required.append(geometry.c / fc / 2.0)
    fmap = FrequencyMap(assignment, carriers, scheme, (p_r, p_c), tuple(spacing),
                        tuple(required), geometry.coupling_ok)
    if strict and not fmap.valid:
        bad = [i for i, (s, r) in enumerate(zip(spacing, required))
               if s < r * (1 - _SPACING_RTOL)]
        raise InfeasibleMapError(
            f"same-carrier spacing below lambda/2 for carriers {bad} "
            f"(tile {p_r}x{p_c}, delta_small={geometry.delta_small})")
    return fmap


def geometry_rows(geometry: AosaGeometry, fmap: FrequencyMap = None):
    """Rows for the geometry dump: ae_index, sa_index, x_m, y_m, z_m, carrier_index."""
    carrier = fmap.assignment if fmap is not None else np.zeros(geometry.n_elements, int)
    sa_idx = geometry.sa_index
    for i, (x, y, z) in enumerate(geometry.positions):
        yield i, int(sa_idx[i]), float(x), float(y), float(z), int(carrier[i])
