"""Particle clustering: connected components over occupied spatial-hash cells
(26-neighborhood), one medoid per cluster."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Cluster:
    indices: np.ndarray  # caller-space particle indices, sorted
    medoid: int  # caller-space index of the member minimizing summed distance
    centroid: np.ndarray  # (3,)


def medoid_index(points: np.ndarray, indices: np.ndarray) -> int:
    """Caller-space index of the member minimizing summed distance to the rest."""
    if len(points) == 1:
        return int(indices[0])
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    return int(indices[int(np.argmin(d.sum(axis=1)))])


@dataclass
class ClusterSet:
    clusters: list[Cluster]

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    def nearest(self, point: np.ndarray, horizontal: bool = False) -> Cluster | None:
        """Cluster whose centroid is nearest to ``point`` (ties: first)."""
        if not self.clusters:
            return None
        point = np.asarray(point, dtype=np.float64)
        best = None
        best_d = np.inf
        for c in self.clusters:
            delta = c.centroid - point
            if horizontal:
                delta = delta[:2]
            d = float(delta @ delta)
            if d < best_d:
                best_d = d
                best = c
        return best


def cluster_particles(positions: np.ndarray, cell_size: float,
                      indices: np.ndarray | None = None,
                      medoids: bool = True) -> ClusterSet:
    """Cluster points into connected components of occupied grid cells.

    ``indices`` optionally maps rows of ``positions`` to caller-space particle
    indices. Empty input yields an empty ClusterSet. ``medoids=False`` skips
    the O(k^2) medoid search (reward paths only need centroids) and marks every
    medoid as -1.
    """
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    if indices is None:
        indices = np.arange(n, dtype=np.int64)
    if n == 0:
        return ClusterSet([])
    cells = np.floor(positions / cell_size).astype(np.int64)
    cell_keys = [tuple(c) for c in cells]
    cell_to_id: dict[tuple, int] = {}
    for key in cell_keys:
        if key not in cell_to_id:
            cell_to_id[key] = len(cell_to_id)
    m = len(cell_to_id)

    parent = list(range(m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    offsets = [(dx, dy, dz)
               for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
               if (dx, dy, dz) != (0, 0, 0)]
    for key, cid in cell_to_id.items():
        for off in offsets:
            nb = (key[0] + off[0], key[1] + off[1], key[2] + off[2])
            nid = cell_to_id.get(nb)
            if nid is not None:
                union(cid, nid)

    groups: dict[int, list[int]] = {}
    for row, key in enumerate(cell_keys):
        root = find(cell_to_id[key])
        groups.setdefault(root, []).append(row)

    clusters = []
    for root in sorted(groups):
        rows = np.array(sorted(groups[root]), dtype=np.int64)
        pts = positions[rows]
        centroid = pts.mean(axis=0)
        med = medoid_index(pts, indices[rows]) if medoids else -1
        clusters.append(Cluster(indices=indices[rows], medoid=med,
                                centroid=centroid))
    return ClusterSet(clusters)
