"""Fine-to-coarse field transfer: linear triangular interpolation with a
nearest-node fallback for points that fall outside the mesh.

Point location uses a uniform background grid binning triangles by bounding
box; candidate triangles are tested exactly with a 1e-9 m geometric
tolerance, so coarse boundary nodes that sit on fine boundary edges count as
inside despite roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .meshing import Mesh

GEOM_TOL = 1e-9  # m


@dataclass(frozen=True)
class PointLocation:
    """Containing triangle (or None when outside) plus barycentric weights."""

    triangle: int | None
    weights: tuple[float, float, float]


class MeshLocator:
    """Background-grid index over a mesh for location and nearest-node search."""

    def __init__(self, mesh: Mesh, cell_size: float | None = None):
        self.mesh = mesh
        coords = mesh.coords
        self.lo = coords.min(axis=0)
        hi = coords.max(axis=0)
        span = np.maximum(hi - self.lo, 1e-12)
        if cell_size is None:
            # Aim for a handful of triangles per cell.
            cell_size = float(np.sqrt(span[0] * span[1] / max(1, mesh.n_triangles)) * 2.0)
        self.cell = max(cell_size, 1e-12)
        self.nx = int(span[0] / self.cell) + 1
        self.ny = int(span[1] / self.cell) + 1

        self.tri_bins: dict[tuple[int, int], list[int]] = {}
        p = coords[mesh.triangles]
        tlo = p.min(axis=1)
        thi = p.max(axis=1)
        for t in range(mesh.n_triangles):
            i0, j0 = self._cell_of(tlo[t, 0] - GEOM_TOL, tlo[t, 1] - GEOM_TOL)
            i1, j1 = self._cell_of(thi[t, 0] + GEOM_TOL, thi[t, 1] + GEOM_TOL)
            for i in range(i0, i1 + 1):
                for j in range(j0, j1 + 1):
                    self.tri_bins.setdefault((i, j), []).append(t)

        self.node_bins: dict[tuple[int, int], list[int]] = {}
        for n in range(mesh.n_nodes):
            key = self._cell_of(coords[n, 0], coords[n, 1])
            self.node_bins.setdefault(key, []).append(n)

    def _cell_of(self, x, y) -> tuple[int, int]:
        i = int((x - self.lo[0]) / self.cell)
        j = int((y - self.lo[1]) / self.cell)
        return (min(max(i, 0), self.nx - 1), min(max(j, 0), self.ny - 1))

    def locate(self, point) -> PointLocation:
        x, y = float(point[0]), float(point[1])
        if not (self.lo[0] - GEOM_TOL <= x <= self.lo[0] + self.nx * self.cell + GEOM_TOL
                and self.lo[1] - GEOM_TOL <= y <= self.lo[1] + self.ny * self.cell + GEOM_TOL):
            return PointLocation(None, (0.0, 0.0, 0.0))
        coords = self.mesh.coords
        tris = self.mesh.triangles
        best = None
        for t in self.tri_bins.get(self._cell_of(x, y), ()):
            a, b, c = tris[t]
            ax, ay = coords[a]
            bx, by = coords[b]
            cx, cy = coords[c]
            area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
            if area2 <= 0:
                continue
            wa = (bx - x) * (cy - y) - (by - y) * (cx - x)
            wb = (cx - x) * (ay - y) - (cy - y) * (ax - x)
            wc = area2 - wa - wb
            # Signed distance of the worst violation, in meters.
            la = math.hypot(cx - bx, cy - by)
            lb = math.hypot(ax - cx, ay - cy)
            lc = math.hypot(bx - ax, by - ay)
            viol = min(wa / la, wb / lb, wc / lc)
            if viol >= -GEOM_TOL:
                w = (wa / area2, wb / area2, wc / area2)
                if viol >= 0.0:
                    return PointLocation(int(t), w)
                if best is None or viol > best[0]:
                    best = (viol, int(t), w)
        if best is not None:
            return PointLocation(best[1], best[2])
        return PointLocation(None, (0.0, 0.0, 0.0))

    def nearest_node(self, point) -> int:
        x, y = float(point[0]), float(point[1])
        coords = self.mesh.coords
        ci, cj = self._cell_of(x, y)
        best = -1
        best_d2 = math.inf
        for ring in range(max(self.nx, self.ny) + 1):
            if best >= 0 and (ring - 1) * self.cell > math.sqrt(best_d2):
                break
            found_cells = False
            for i in range(ci - ring, ci + ring + 1):
                for j in range(cj - ring, cj + ring + 1):
                    if max(abs(i - ci), abs(j - cj)) != ring:
                        continue
                    if not (0 <= i < self.nx and 0 <= j < self.ny):
                        continue
                    found_cells = True
                    for n in self.node_bins.get((i, j), ()):
                        d2 = (coords[n, 0] - x) ** 2 + (coords[n, 1] - y) ** 2
                        if d2 < best_d2 or (d2 == best_d2 and n < best):
                            best = n
                            best_d2 = d2
            if not found_cells and best >= 0:
                break
        return best


_LOCATORS: dict[int, MeshLocator] = {}


def _locator(mesh: Mesh) -> MeshLocator:
    key = id(mesh)
    loc = _LOCATORS.get(key)
    if loc is None or loc.mesh is not mesh:
        loc = MeshLocator(mesh)
        _LOCATORS.clear()
        _LOCATORS[key] = loc
    return loc


def locate(point, mesh: Mesh) -> PointLocation:
    """Containing triangle and barycentric weights; triangle None if outside."""
    return _locator(mesh).locate(point)


def interpolate_node(values: np.ndarray, loc: PointLocation, mesh: Mesh, point) -> float:
    """Barycentric interpolation inside; nearest-node value outside."""
    if loc.triangle is None:
        return float(values[_locator(mesh).nearest_node(point)])
    a, b, c = mesh.triangles[loc.triangle]
    w0, w1, w2 = loc.weights
    return float(w0 * values[a] + w1 * values[b] + w2 * values[c])


@dataclass
class TransferPlan:
    """Precomputed source indices/weights mapping one mesh onto point set."""

    indices: np.ndarray  # (P, 3) int32 source node ids
    weights: np.ndarray  # (P, 3) float64
    outside: np.ndarray  # (P,) bool

    def apply(self, values: np.ndarray) -> np.ndarray:
        v = values[self.indices]
        w = self.weights
        return w[:, 0] * v[:, 0] + w[:, 1] * v[:, 1] + w[:, 2] * v[:, 2]


def build_transfer_plan(fine: Mesh, points: np.ndarray) -> TransferPlan:
    loc = MeshLocator(fine)
    n = len(points)
    indices = np.zeros((n, 3), dtype=np.int32)
    weights = np.zeros((n, 3), dtype=np.float64)
    outside = np.zeros(n, dtype=bool)
    for i in range(n):
        pl = loc.locate(points[i])
        if pl.triangle is None:
            j = loc.nearest_node(points[i])
            indices[i] = (j, j, j)
            weights[i] = (1.0, 0.0, 0.0)
            outside[i] = True
        else:
            indices[i] = fine.triangles[pl.triangle]
            weights[i] = pl.weights
    return TransferPlan(indices, weights, outside)


def downsample(record, coarse: Mesh):
    """Interpolate every field at every timestep onto the coarse mesh.

    Locations are computed once per coarse node and reused across all fields
    and timesteps. Returns a record of the same type on the coarse mesh.
    """
    plan = build_transfer_plan(record.mesh, coarse.coords)
    states = record.states  # (S, N, 4)
    out = np.empty((states.shape[0], coarse.n_nodes, states.shape[2]), dtype=states.dtype)
    for s in range(states.shape[0]):
        for f in range(states.shape[2]):
            out[s, :, f] = plan.apply(states[s, :, f])
    return record.replace_mesh(coarse, out)
