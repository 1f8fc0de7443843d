"""Regular-grid lattice, neighbourhood structure and the proximity matrix W."""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger(__name__)

GRID_HEADER = ["cell_id", "lon", "lat", "row", "col"]


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    cell_id: int
    lon: float
    lat: float
    grid_row: int
    grid_col: int


class Lattice:
    """Cells in canonical (row-major) order with their neighbour sets.

    Parameters
    ----------
    cells : list of Cell
    adjacency : {"rook", "queen"}
        Rook cells share an edge; queen cells also share a corner.
    """

    def __init__(self, cells, adjacency="rook"):
        if adjacency not in ("rook", "queen"):
            raise LatticeError(f"unknown adjacency {adjacency!r}")
        cells = sorted(cells, key=lambda c: (c.grid_row, c.grid_col))
        if len(cells) < 2:
            raise LatticeError("isolated cell: a lattice needs at least 2 cells")
        ids = [c.cell_id for c in cells]
        if len(set(ids)) != len(ids):
            raise LatticeError("duplicate cell_id")
        pos = {}
        for i, c in enumerate(cells):
            key = (c.grid_row, c.grid_col)
            if key in pos:
                raise LatticeError(f"two cells occupy grid position {key}")
            pos[key] = i

        offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
        if adjacency == "queen":
            offsets += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
        neighbors = []
        for c in cells:
            nb = {pos[(c.grid_row + dr, c.grid_col + dc)]
                  for dr, dc in offsets if (c.grid_row + dr, c.grid_col + dc) in pos}
            if not nb:
                raise LatticeError(f"isolated cell {c.cell_id}: no neighbours")
            neighbors.append(frozenset(nb))

        self.cells = tuple(cells)
        self.adjacency = adjacency
        self.neighbor_sets = tuple(neighbors)
        self.neighbor_counts = np.array([len(nb) for nb in neighbors], dtype=np.int64)
        self._index = {cid: i for i, cid in enumerate(ids)}

        n_comp, labels = connected_components(self._adjacency_matrix(), directed=False)
        self.n_components = int(n_comp)
        self.component_labels = labels.astype(np.int64)
        if n_comp > 1:
            warnings.warn(f"lattice has {n_comp} connected components; "
                          "centering is applied per component", stacklevel=2)

    def _adjacency_matrix(self):
        rows, cols = self.edges.T
        d = self.size
        data = np.ones(2 * len(rows))
        return csr_matrix((data, (np.r_[rows, cols], np.r_[cols, rows])), shape=(d, d))

    @property
    def size(self) -> int:
        return len(self.cells)

    @property
    def cell_ids(self) -> NDArray[np.int64]:
        return np.array([c.cell_id for c in self.cells], dtype=np.int64)

    @property
    def is_connected(self) -> bool:
        return self.n_components == 1

    @property
    def edges(self) -> NDArray[np.int64]:
        """Adjacent pairs ``(i, j)`` with ``i < j``, shape (n_edges, 2)."""
        pairs = sorted((i, j) for i, nb in enumerate(self.neighbor_sets) for j in nb if i < j)
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    def index_of(self, cell_id: int) -> int:
        return self._index[cell_id]

    def components(self):
        """Index arrays of each connected component."""
        return [np.flatnonzero(self.component_labels == c) for c in range(self.n_components)]

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"Lattice(d={self.size}, adjacency={self.adjacency!r}, components={self.n_components})"


def build_lattice(cell_coordinates, adjacency="rook") -> Lattice:
    """Build a lattice from ``(id, lon, lat, row, col)`` tuples."""
    cells = [Cell(int(cid), float(lon), float(lat), int(r), int(c))
             for cid, lon, lat, r, c in cell_coordinates]
    return Lattice(cells, adjacency=adjacency)


def grid_lattice(n_rows, n_cols, lon0=0.0, lat0=50.0, step=0.5, adjacency="rook") -> Lattice:
    """Full rectangular grid with cell ids numbered row-major from 0."""
    coords = [(r * n_cols + c, lon0 + c * step, lat0 + r * step, r, c)
              for r in range(n_rows) for c in range(n_cols)]
    return build_lattice(coords, adjacency=adjacency)


def build_proximity_matrix(lattice: Lattice) -> NDArray[np.float64]:
    """W with ``w_ii = m_i`` and ``w_ij = -1`` for adjacent cells."""
    d = lattice.size
    W = np.zeros((d, d))
    for i, nb in enumerate(lattice.neighbor_sets):
        W[i, list(nb)] = -1.0
        W[i, i] = len(nb)
    return W


def pairwise_quadratic_form(lattice: Lattice, phi: NDArray[np.float64]) -> NDArray[np.float64]:
    """``phi.T @ W @ phi`` as a sum of outer products of neighbour differences.

    ``phi`` is (d,) or (d, p); the result is scalar or (p, p).
    """
    phi = np.asarray(phi, dtype=float)
    e = lattice.edges
    diff = phi[e[:, 0]] - phi[e[:, 1]]
    if phi.ndim == 1:
        return float(diff @ diff)
    return diff.T @ diff


def center_by_component(lattice: Lattice, phi: NDArray[np.float64]) -> NDArray[np.float64]:
    phi = np.array(phi, dtype=float)
    if lattice.is_connected:
        phi -= phi.mean(axis=0)
        return phi
    for idx in lattice.components():
        phi[idx] -= phi[idx].mean(axis=0)
    return phi


def read_grid_csv(path, adjacency="rook") -> Lattice:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    if not rows or [h.strip() for h in rows[0]] != GRID_HEADER:
        raise LatticeError(f"{path}: expected header {','.join(GRID_HEADER)}")
    coords = []
    for lineno, r in enumerate(rows[1:], start=2):
        try:
            coords.append((int(r[0]), float(r[1]), float(r[2]), int(r[3]), int(r[4])))
        except (ValueError, IndexError) as exc:
            raise LatticeError(f"{path}: bad row {lineno}: {r}") from exc
    return build_lattice(coords, adjacency=adjacency)
