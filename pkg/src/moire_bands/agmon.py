"""Agmon distance field and tunneling actions between neighboring wells.

The degenerate metric sqrt((lambda_-(x) - E)_+) dx is discretized on a
uniform square grid covering [-1.5, 1.5]^2 (a box containing the 3x3 block
of cells around the origin; every nearest-neighbor well lies at distance 1,
so geodesics between them stay well inside).  Distances are shortest paths
in a graph whose edges connect each node to 40 neighbors; edge cost is the
Euclidean offset length times the trapezoid average of the endpoint
weights.

Stencil choice: the classical 16-neighbor stencil (king + knight moves) has
a worst-case chord error of 2.75% over directions, which is far too coarse
for the 0.6% sanity bound used downstream.  Adding the (2,1), (3,1), (3,2)
and (5,1) direction families brings the provable worst case down to 0.49%
(largest angular gap 11.31 degrees).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra as _dijkstra

from .lattice import build_lattice
from .potential import ModelParams, eigs_exact, wells_audit

#: primitive direction families; closed under the 8 square-grid symmetries
_FAMILIES = ((1, 0), (1, 1), (2, 1), (3, 1), (3, 2), (5, 1))

#: worst-case relative chord error of the stencil over all directions
STENCIL_CHORD_ERROR = 0.0049


def _stencil_offsets():
    offs = set()
    for p, q in _FAMILIES:
        for a, b in ((p, q), (q, p)):
            for sa in (1, -1):
                for sb in (1, -1):
                    offs.add((sa * a, sb * b))
    return tuple(sorted(offs))


STENCIL_OFFSETS = _stencil_offsets()


@dataclass(frozen=True)
class SquareGrid:
    """Uniform grid over [-extent, extent]^2 with ``per_cell`` nodes per unit length."""

    per_cell: int
    extent: float = 1.5

    def __post_init__(self):
        if self.per_cell % 2 != 0 or self.per_cell < 32:
            raise ValueError("per_cell must be an even integer >= 32")

    @property
    def axis(self):
        n = int(round(2 * self.extent * self.per_cell))
        return np.linspace(-self.extent, self.extent, n + 1)

    @property
    def step(self):
        return 1.0 / self.per_cell

    @property
    def shape(self):
        n = self.axis.size
        return (n, n)

    def meshgrid(self):
        xs = self.axis
        return np.meshgrid(xs, xs, indexing="ij")

    def center_index(self):
        n = self.axis.size
        return (n // 2) * n + n // 2

    def nearest_index(self, point):
        xs = self.axis
        i = int(np.argmin(np.abs(xs - point[0])))
        j = int(np.argmin(np.abs(xs - point[1])))
        return i * xs.size + j


def weight_field(p: ModelParams, E: float, grid: SquareGrid):
    """w(x) = sqrt(max(lambda_-(x) - E, 0)) on the grid (exact eigenvalues)."""
    X1, X2 = grid.meshgrid()
    lam, _ = eigs_exact(np.stack([X1, X2], axis=-1), p)
    if E < lam.min() - 1e-12:
        raise ValueError(
            "E below the sampled potential floor: the weight never vanishes "
            "and there is no classical region"
        )
    return np.sqrt(np.clip(lam - E, 0.0, None))


def _graph(weights, step):
    ny, nx = weights.shape
    n = ny * nx
    idx = np.arange(n, dtype=np.int32).reshape(ny, nx)
    rows, cols, data = [], [], []
    for di, dj in STENCIL_OFFSETS:
        if (di, dj) <= (-di, -dj):
            continue  # one direction per unordered pair
        ilo, ihi = max(0, -di), min(ny, ny - di)
        jlo, jhi = max(0, -dj), min(nx, nx - dj)
        src = idx[ilo:ihi, jlo:jhi].ravel()
        dst = idx[ilo + di : ihi + di, jlo + dj : jhi + dj].ravel()
        wa = weights[ilo:ihi, jlo:jhi].ravel()
        wb = weights[ilo + di : ihi + di, jlo + dj : jhi + dj].ravel()
        length = step * float(np.hypot(di, dj))
        rows.append(src)
        cols.append(dst)
        data.append(0.5 * length * (wa + wb))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.concatenate(data)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def agmon_distance(weights, step, source_indices):
    """Shortest-path distances from the source node(s) over the stencil graph.

    Returns an array shaped like ``weights`` (or with a leading source axis
    for several sources).  Dijkstra runs on the undirected graph with
    deterministic results.
    """
    weights = np.asarray(weights, dtype=float)
    graph = _graph(weights, step)
    single = np.isscalar(source_indices)
    ind = [source_indices] if single else list(source_indices)
    rho = _dijkstra(graph, directed=False, indices=ind)
    rho = rho.reshape((len(ind),) + weights.shape)
    return rho[0] if single else rho


#: the six nearest-neighbor wells as integer combinations of (v1, v2)
NEIGHBOR_KEYS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1))


@dataclass(frozen=True)
class AgmonField:
    """Distance field rho_E(x) = d_E(x, 0) plus per-neighbor tunneling actions."""

    energy: float
    grid: SquareGrid
    weight: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    actions: dict
    S0: float


def tunneling_action(
    p: ModelParams,
    E: float | None = None,
    grid: SquareGrid | None = None,
    audit=None,
) -> AgmonField:
    """Agmon actions from the well at 0 to each of its six nearest neighbors.

    E defaults to the well bottom lambda_-(0).  Requires the single-well
    audit to pass, since "the well at 0" is otherwise ill-defined.
    """
    audit = audit or wells_audit(p)
    if not audit.assumption1_holds:
        raise ValueError("single-well assumption fails; tunneling actions undefined")
    if E is None:
        E = float(eigs_exact(np.zeros(2), p)[0])
    grid = grid or SquareGrid(per_cell=256)
    w = weight_field(p, E, grid)
    rho = agmon_distance(w, grid.step, grid.center_index())
    lat = build_lattice()
    actions = {}
    flat = rho.ravel()
    for a, b in NEIGHBOR_KEYS:
        gamma = a * lat.v1 + b * lat.v2
        actions[(a, b)] = float(flat[grid.nearest_index(gamma)])
    return AgmonField(
        energy=float(E),
        grid=grid,
        weight=w,
        rho=rho,
        actions=actions,
        S0=min(actions.values()),
    )
