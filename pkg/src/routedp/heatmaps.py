"""Edge-heat matrices, the cost-based heuristic heat, sparsification and I/O.

Heat values live in [0, 1) with a zero diagonal.  Symmetric heatmaps store
identical (i,j)/(j,i) entries; directed ones (TSPTW) may differ.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .instances import DEPOT

# Values of exactly 1 are clamped just inside the open upper bound.
_ONE_CLAMP = 1.0 - 1e-9


class HeatmapFormatError(ValueError):
    """Raised when a heatmap file is malformed."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Heatmap:
    values: np.ndarray
    directed: bool = False

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("heatmap must be a square matrix")
        if np.any(v < 0) or np.any(v >= 1):
            raise ValueError("heat values must lie in [0, 1)")
        if np.any(np.diag(v) != 0):
            raise ValueError("heatmap diagonal must be zero")
        if not self.directed and not np.array_equal(v, v.T):
            raise ValueError("undirected heatmap must be exactly symmetric")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class SparseGraph:
    """Per-node sorted outgoing adjacency (no self-loops)."""

    neighbors: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.neighbors)
        norm = []
        for i, nbrs in enumerate(self.neighbors):
            nbrs = tuple(int(j) for j in nbrs)
            if any(j == i for j in nbrs):
                raise ValueError(f"self-loop at node {i}")
            if any(j < 0 or j >= n for j in nbrs):
                raise ValueError(f"neighbor out of range at node {i}")
            if any(a >= b for a, b in zip(nbrs, nbrs[1:])):
                raise ValueError(f"neighbor list of node {i} not strictly increasing")
            norm.append(nbrs)
        object.__setattr__(self, "neighbors", tuple(norm))

    @property
    def n(self) -> int:
        return len(self.neighbors)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(i, j) for i, nbrs in enumerate(self.neighbors) for j in nbrs}

    def adjacency_matrix(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, nbrs in enumerate(self.neighbors):
            adj[i, list(nbrs)] = True
        return adj

    @classmethod
    def from_adjacency(cls, adj: np.ndarray) -> "SparseGraph":
        adj = np.asarray(adj, dtype=bool)
        np.fill_diagonal(adj, False)
        return cls(tuple(tuple(np.flatnonzero(row)) for row in adj))


def symmetrize(raw: Heatmap) -> Heatmap:
    """Entry-wise max of (i,j) and (j,i); output is undirected."""
    return Heatmap(np.maximum(raw.values, raw.values.T), directed=False)


def cost_heatmap(costs: np.ndarray, invert: bool = False) -> Heatmap:
    """Heuristic heat h_ij = c_ij / max_k c_ik (row-normalized distances).

    With invert=True each entry becomes 1 - h_ij instead, so short edges get
    high heat.  Entries equal to 1 are clamped below the open upper bound
    and the diagonal is forced to zero.  Directed, since row maxima differ.
    """
    costs = np.asarray(costs, dtype=float)
    row_max = costs.max(axis=1)
    if np.any(row_max <= 0):
        bad = int(np.argmax(row_max <= 0))
        raise ValueError(f"row {bad} of the cost matrix has max 0 (coincident points)")
    h = np.minimum(costs / row_max[:, None], _ONE_CLAMP)
    if invert:
        h = np.minimum(1.0 - h, _ONE_CLAMP)
    np.fill_diagonal(h, 0.0)
    return Heatmap(h, directed=True)


def _force_depot_edges(adj: np.ndarray) -> None:
    adj[:, DEPOT] = True
    adj[DEPOT, :] = True
    np.fill_diagonal(adj, False)


def sparsify_threshold(h: Heatmap, threshold: float, vrp: bool = False) -> SparseGraph:
    """Keep edge (i,j) iff h_ij >= threshold; VRP forces all depot edges."""
    if not 0 <= threshold < 1:
        raise ValueError("threshold must lie in [0, 1)")
    adj = h.values >= threshold
    np.fill_diagonal(adj, False)
    if vrp:
        _force_depot_edges(adj)
    return SparseGraph.from_adjacency(adj)


def sparsify_knn(costs: np.ndarray, k: int, vrp: bool = False) -> SparseGraph:
    """Each node's k nearest neighbors (ties to the lower index), added in
    both directions; VRP forces all depot edges."""
    costs = np.asarray(costs, dtype=float)
    n = costs.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError("k must lie in [1, n - 1]")
    adj = np.zeros((n, n), dtype=bool)
    idx = np.arange(n)
    for i in range(n):
        order = np.lexsort((idx, costs[i]))
        nearest = [j for j in order if j != i][:k]
        adj[i, nearest] = True
        adj[nearest, i] = True
    if vrp:
        _force_depot_edges(adj)
    return SparseGraph.from_adjacency(adj)


def read_heatmap(path: str | Path, n: int) -> Heatmap:
    """Load a heatmap file (dense or sparse format, see write_heatmap)."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise HeatmapFormatError(f"{path}: empty file")
    header = lines[0].split()
    if len(header) < 2 or header[0] not in ("dense", "sparse"):
        raise HeatmapFormatError(f"{path}: line 1: expected 'dense|sparse n [directed]'")
    try:
        file_n = int(header[1])
    except ValueError:
        raise HeatmapFormatError(f"{path}: line 1: bad dimension {header[1]!r}") from None
    if file_n != n:
        raise HeatmapFormatError(f"{path}: dimension {file_n} does not match expected {n}")
    directed = len(header) > 2 and header[2] == "directed"

    values = np.zeros((n, n))
    if header[0] == "dense":
        if len(lines) < n + 1:
            raise HeatmapFormatError(f"{path}: expected {n} rows, found {len(lines) - 1}")
        for r in range(n):
            parts = lines[r + 1].split()
            if len(parts) != n:
                raise HeatmapFormatError(
                    f"{path}: line {r + 2}: expected {n} values, found {len(parts)}")
            try:
                values[r] = [float(p) for p in parts]
            except ValueError:
                raise HeatmapFormatError(f"{path}: line {r + 2}: non-numeric value") from None
    else:
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise HeatmapFormatError(f"{path}: line {lineno}: expected 'i j h'")
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise HeatmapFormatError(f"{path}: line {lineno}: bad entry") from None
            if not (0 <= i < n and 0 <= j < n):
                raise HeatmapFormatError(f"{path}: line {lineno}: index out of range")
            values[i, j] = v

    bad = (values < 0) | (values > 1)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise HeatmapFormatError(
            f"{path}: entry ({i}, {j}) = {values[i, j]} outside [0, 1]")
    values = np.minimum(values, _ONE_CLAMP)
    np.fill_diagonal(values, 0.0)
    if not directed and not np.array_equal(values, values.T):
        raise HeatmapFormatError(f"{path}: file not marked directed but values are asymmetric")
    return Heatmap(values, directed=directed)


def write_heatmap(h: Heatmap, path: str | Path, sparse: bool = False) -> None:
    tag = " directed" if h.directed else ""
    lines = []
    if sparse:
        lines.append(f"sparse {h.n}{tag}")
        for i, j in np.argwhere(h.values != 0):
            lines.append(f"{i} {j} {float(h.values[i, j])!r}")
    else:
        lines.append(f"dense {h.n}{tag}")
        for row in h.values:
            lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
