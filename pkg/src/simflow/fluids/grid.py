"""Uniform spatial hash over 3D cells.

Cells are floor(position / cell_size) componentwise, packed into one int64 key
(21 bits per axis). Particles are kept in key-sorted order so cell queries are
two binary searches; no Python dict in the hot path.
"""

from __future__ import annotations

import numpy as np

_BITS = 21
_OFF = 1 << (_BITS - 1)
_MASK = (1 << _BITS) - 1


def cell_coords(positions: np.ndarray, cell_size: float) -> np.ndarray:
    """Integer cell coordinate per position, shape (n, 3)."""
    return np.floor(positions / cell_size).astype(np.int64)


def pack_cells(cells: np.ndarray) -> np.ndarray:
    c = cells + _OFF
    if np.any((c < 0) | (c > _MASK)):
        raise ValueError("position out of spatial-hash range")
    return (c[:, 0] << (2 * _BITS)) | (c[:, 1] << _BITS) | c[:, 2]


def pack_single(cx: int, cy: int, cz: int) -> int:
    return ((cx + _OFF) << (2 * _BITS)) | ((cy + _OFF) << _BITS) | (cz + _OFF)


class SpatialHashGrid:
    """Maps integer cell coordinates to the indices of the particles inside.

    ``indices`` maps the grid's internal order back to the caller's particle
    indices, so a grid can be built over a live-particle subset.
    """

    def __init__(self, positions: np.ndarray, cell_size: float,
                 indices: np.ndarray | None = None):
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        n = len(positions)
        self.cell_size = float(cell_size)
        self.positions = positions
        self.indices = (
            np.arange(n, dtype=np.int64) if indices is None
            else np.asarray(indices, dtype=np.int64)
        )
        keys = pack_cells(cell_coords(positions, cell_size))
        order = np.argsort(keys, kind="stable")
        self.order = order.astype(np.int64)
        self.sorted_keys = keys[order]

    def __len__(self) -> int:
        return len(self.positions)

    def query_cell(self, cx: int, cy: int, cz: int) -> np.ndarray:
        """Caller-space indices of particles whose cell is exactly (cx, cy, cz)."""
        key = pack_single(cx, cy, cz)
        lo = np.searchsorted(self.sorted_keys, key, side="left")
        hi = np.searchsorted(self.sorted_keys, key, side="right")
        return self.indices[self.order[lo:hi]]

    def cells(self) -> dict[tuple[int, int, int], np.ndarray]:
        """Materialized cell -> particle-index mapping (for inspection/tests)."""
        out: dict[tuple[int, int, int], np.ndarray] = {}
        coords = cell_coords(self.positions, self.cell_size)
        keys = pack_cells(coords)
        for key in np.unique(keys):
            sel = keys == key
            c = coords[np.argmax(sel)]
            out[(int(c[0]), int(c[1]), int(c[2]))] = self.indices[np.flatnonzero(sel)]
        return out

    def neighbors_within(self, point: np.ndarray, radius: float) -> np.ndarray:
        """Caller-space indices within ``radius`` of ``point``.

        Exact (matches brute force) whenever radius <= cell_size, since the
        27-cell stencil then covers the whole ball.
        """
        if radius > self.cell_size + 1e-12:
            raise ValueError("radius must not exceed cell_size")
        point = np.asarray(point, dtype=np.float64)
        base = np.floor(point / self.cell_size).astype(np.int64)
        found = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    key = pack_single(base[0] + dx, base[1] + dy, base[2] + dz)
                    lo = np.searchsorted(self.sorted_keys, key, side="left")
                    hi = np.searchsorted(self.sorted_keys, key, side="right")
                    if hi > lo:
                        found.append(self.order[lo:hi])
        if not found:
            return np.empty(0, dtype=np.int64)
        cand = np.concatenate(found)
        d2 = np.sum((self.positions[cand] - point) ** 2, axis=1)
        hit = cand[d2 <= radius * radius]
        return self.indices[np.sort(hit)]


def build_hash_grid(positions: np.ndarray, cell_size: float) -> SpatialHashGrid:
    return SpatialHashGrid(np.asarray(positions, dtype=np.float64), cell_size)
