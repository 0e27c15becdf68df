"""Hexagonal multi-site layout, wraparound and UE drops."""

from dataclasses import dataclass

import numpy as np

from ..channel import Scenario
from ..rng import stream

__all__ = ["NetworkLayout", "build_layout", "drop_ues", "UeDrop", "SECTOR_BEARINGS"]

SECTOR_BEARINGS = (0.0, 120.0, 240.0)


def _hex_sites(n_rings: int) -> np.ndarray:
    """Lattice coordinates (i, j) of every site within ``n_rings`` hops, ring by ring."""
    out = [(0, 0)]
    for ring in range(1, n_rings + 1):
        cells = [(i, j) for i in range(-ring, ring + 1) for j in range(-ring, ring + 1)
                 if max(abs(i), abs(j), abs(i + j)) == ring]
        cells.sort(key=lambda ij: np.arctan2(ij[1] * np.sqrt(3) / 2, ij[0] + ij[1] / 2) % (2 * np.pi))
        out.extend(cells)
    return np.array(out)


@dataclass(frozen=True, eq=False)
class NetworkLayout:
    """Sites, sector cells and the wraparound images.

    Cell ``c`` belongs to site ``c // 3`` and points at
    ``SECTOR_BEARINGS[c % 3]``.
    """

    isd: float
    bs_height: float
    sites: np.ndarray  # (n_sites, 2)
    wrap_shifts: np.ndarray  # (n_images, 2); first row is (0, 0)

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def n_cells(self) -> int:
        return 3 * self.n_sites

    @property
    def wraparound(self) -> bool:
        return len(self.wrap_shifts) > 1

    @property
    def cell_site(self) -> np.ndarray:
        return np.arange(self.n_cells) // 3

    @property
    def cell_bearing(self) -> np.ndarray:
        return np.array(SECTOR_BEARINGS * self.n_sites)

    def nearest_images(self, xy: np.ndarray) -> np.ndarray:
        """Position of each site's closest image, ``(n_points, n_sites, 2)``."""
        xy = np.atleast_2d(xy)
        images = self.sites[None, :, :] + self.wrap_shifts[:, None, :]  # (I, S, 2)
        d = np.linalg.norm(xy[:, None, None, :] - images[None], axis=-1)  # (n, I, S)
        best = np.argmin(d, axis=1)  # (n, S)
        return images[best, np.arange(self.n_sites)[None, :]]

    def link_geometry(self, xy: np.ndarray):
        """2D distance and azimuth (relative to sector boresight) from every cell.

        Returns ``(d2d, az)`` each of shape ``(n_points, n_cells)``.
        """
        img = self.nearest_images(xy)  # (n, S, 2)
        img = np.repeat(img, 3, axis=1)  # (n, C, 2)
        delta = np.atleast_2d(xy)[:, None, :] - img
        d2 = np.hypot(delta[..., 0], delta[..., 1])
        az = np.degrees(np.arctan2(delta[..., 1], delta[..., 0])) - self.cell_bearing[None, :]
        return d2, (az + 180.0) % 360.0 - 180.0


def build_layout(scenario: Scenario, n_sites: int = 19, wraparound: bool = True) -> NetworkLayout:
    """Hexagonal grid with site 0 at the origin and three sectors per site."""
    rings = {1: 0, 7: 1, 19: 2}
    if n_sites not in rings:
        raise ValueError("n_sites must be 1, 7 or 19")
    ij = _hex_sites(rings[n_sites])
    d = scenario.isd
    a1 = np.array([d, 0.0])
    a2 = np.array([d / 2.0, d * np.sqrt(3) / 2.0])
    sites = ij[:, :1] * a1 + ij[:, 1:] * a2
    shifts = [np.zeros(2)]
    if wraparound:
        if n_sites != 19:
            raise ValueError("wraparound is defined for the 19-site layout")
        base = 3 * a1 + 2 * a2  # |base| = sqrt(19) * ISD
        for k in range(6):
            t = np.deg2rad(60.0 * k)
            rot = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
            shifts.append(rot @ base)
    return NetworkLayout(d, scenario.bs_height, sites, np.array(shifts))


@dataclass(frozen=True, eq=False)
class UeDrop:
    xy: np.ndarray  # (U, 2)
    height: np.ndarray
    indoor: np.ndarray
    cell: np.ndarray  # serving cell per UE

    @property
    def n_ues(self) -> int:
        return len(self.cell)


def drop_ues(layout: NetworkLayout, scenario: Scenario, ues_per_cell: int, seed: int) -> UeDrop:
    """Drop exactly ``ues_per_cell`` UEs uniformly inside every sector.

    Positions are uniform over the site hexagon (rejection sampling, at least
    ``min_distance`` from the site) and assigned to the sector whose bearing
    is closest.  Indoor UEs sit on a uniformly drawn floor.  UEs are ordered
    by cell, so UE ``u`` is served by cell ``u // ues_per_cell``.
    """
    r_in = layout.isd / 2.0
    r_out = layout.isd / np.sqrt(3.0)
    xy, h, indoor, cell = [], [], [], []
    for s in range(layout.n_sites):
        rng = stream(seed, "drop", s)
        buckets = {0: [], 1: [], 2: []}
        while min(len(b) for b in buckets.values()) < ues_per_cell:
            p = rng.uniform(-r_out, r_out, size=2)
            # site hexagon: flat sides facing the six neighbours (0, 60, ... degrees)
            ang = np.arctan2(p[1], p[0])
            proj = np.abs(np.cos((ang + np.pi / 6) % (np.pi / 3) - np.pi / 6)) * np.hypot(*p)
            if proj > r_in or np.hypot(*p) < scenario.min_distance:
                continue
            rel = (np.degrees(ang) - np.array(SECTOR_BEARINGS) + 180.0) % 360.0 - 180.0
            sec = int(np.argmin(np.abs(rel)))
            is_in = rng.random() < scenario.indoor_fraction
            floor = int(rng.integers(1, scenario.n_floors + 1))
            if len(buckets[sec]) < ues_per_cell:
                height = 1.5 + (floor - 1) * scenario.floor_height if is_in else 1.5
                buckets[sec].append((p + layout.sites[s], height, is_in))
        for sec in range(3):
            for p, height, is_in in buckets[sec]:
                xy.append(p)
                h.append(height)
                indoor.append(is_in)
                cell.append(3 * s + sec)
    return UeDrop(np.array(xy), np.array(h), np.array(indoor), np.array(cell))
