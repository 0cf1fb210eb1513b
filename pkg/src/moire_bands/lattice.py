"""Moire lattice geometry: direct/dual bases, BZ grids, and high-symmetry paths.

Everything is expressed in rescaled moire units where the lattice vectors
have unit length.  The hexagonal lattice is hard-wired; there is no support
for general Bravais lattices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT3 = np.sqrt(3.0)

#: counter-clockwise rotation by 2*pi/3
ROT = 0.5 * np.array([[-1.0, -SQRT3], [SQRT3, -1.0]])

V1 = np.array([-SQRT3 / 2, -0.5])
V2 = np.array([SQRT3 / 2, -0.5])
V3 = np.array([0.0, 1.0])


@dataclass(frozen=True)
class Lattice:
    """Direct basis (v1, v2), dual basis (g1, g2) and the nearest-neighbor shell.

    The duals solve <v_i, g_j> = 2*pi*delta_ij.  ``neighbor_shell`` holds the
    six unit-length neighbors {+-v1, +-v2, +-(v1+v2)} of the origin.
    """

    v1: np.ndarray
    v2: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    neighbor_shell: np.ndarray

    @property
    def direct_matrix(self):
        """Columns are v1, v2."""
        return np.column_stack([self.v1, self.v2])

    @property
    def dual_matrix(self):
        """Columns are g1, g2."""
        return np.column_stack([self.g1, self.g2])

    def dual_vector(self, m, n):
        """Return m*g1 + n*g2."""
        return m * self.g1 + n * self.g2

    def fractional(self, k):
        """Coordinates (a, b) of k = a*g1 + b*g2."""
        k = np.asarray(k, dtype=float)
        return np.linalg.solve(self.dual_matrix, k)


def build_lattice() -> Lattice:
    """Construct the moire lattice with v1 = -(sqrt3,1)/2, v2 = (sqrt3,-1)/2.

    The dual basis is obtained by solving the biorthogonality system
    <v_i, g_j> = 2*pi*delta_ij, which gives g1 = 2*pi*(-1/sqrt3, -1) and
    g2 = 2*pi*(1/sqrt3, -1).
    """
    A = np.vstack([V1, V2])
    G = 2.0 * np.pi * np.linalg.inv(A)  # columns g1, g2
    g1, g2 = G[:, 0].copy(), G[:, 1].copy()
    shell = np.array([V1, -V1, V2, -V2, V1 + V2, -(V1 + V2)])
    return Lattice(v1=V1.copy(), v2=V2.copy(), g1=g1, g2=g2, neighbor_shell=shell)


def reduce_to_cell(k, lat: Lattice):
    """Translate k by the dual lattice so its fractional coordinates lie in [0, 1)."""
    frac = lat.fractional(k)
    frac -= np.floor(frac)
    frac[frac >= 1.0] -= 1.0  # guard against round-up at the cell edge
    return lat.dual_matrix @ frac


#: fractional coordinates (a, b) with k = a*g1 + b*g2 of the labeled points.
#: K = (g1 + 2 g2)/3 and M = (g1 + g2)/2; the paper fixes no k-path convention.
HIGH_SYMMETRY = {
    "G": (0.0, 0.0),
    "K": (1.0 / 3.0, 2.0 / 3.0),
    "M": (0.5, 0.5),
}

_ALIASES = {"GAMMA": "G", "Γ": "G", "G": "G", "K": "K", "M": "M"}


def high_symmetry_point(label: str, lat: Lattice):
    """Cartesian coordinates of a labeled point; raises on unknown labels."""
    key = _ALIASES.get(str(label).upper().strip())
    if key is None:
        raise ValueError(f"unknown high-symmetry label {label!r}; use G, K or M")
    a, b = HIGH_SYMMETRY[key]
    return a * lat.g1 + b * lat.g2


@dataclass(frozen=True)
class KGrid:
    """Uniform n1 x n2 fractional grid of the dual cell (no offset)."""

    n1: int
    n2: int
    points: np.ndarray = field(repr=False)

    def __len__(self):
        return self.points.shape[0]


def kgrid(n1: int, n2: int, lat: Lattice) -> KGrid:
    """k = (i/n1) g1 + (j/n2) g2 for 0 <= i < n1, 0 <= j < n2, i-major order."""
    if n1 < 1 or n2 < 1:
        raise ValueError("grid subdivisions must be positive")
    i, j = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    frac = np.stack([i.ravel() / n1, j.ravel() / n2], axis=1)
    return KGrid(n1=n1, n2=n2, points=frac @ lat.dual_matrix.T)


@dataclass(frozen=True)
class KPath:
    """Piecewise-linear path through labeled points.

    ``points`` contains every node including shared segment endpoints once;
    ``arclength`` is the cumulative Euclidean length and ``label_indices``
    locates each label in ``points``.
    """

    labels: tuple
    points: np.ndarray = field(repr=False)
    arclength: np.ndarray = field(repr=False)
    label_indices: tuple

    def __len__(self):
        return self.points.shape[0]


def kpath(labels, n_per_segment: int, lat: Lattice) -> KPath:
    """Equal-step path visiting ``labels``; n_per_segment intervals per segment."""
    if n_per_segment < 1:
        raise ValueError("n_per_segment must be >= 1")
    if len(labels) < 2:
        raise ValueError("need at least two labels")
    anchors = [high_symmetry_point(lab, lat) for lab in labels]
    pts = [anchors[0]]
    marks = [0]
    for a, b in zip(anchors[:-1], anchors[1:]):
        for s in range(1, n_per_segment + 1):
            t = s / n_per_segment
            pts.append((1.0 - t) * a + t * b)
        marks.append(len(pts) - 1)
    points = np.array(pts)
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(steps)])
    return KPath(
        labels=tuple(labels),
        points=points,
        arclength=arclength,
        label_indices=tuple(marks),
    )


def integer_combination(vec, basis_a, basis_b):
    """Solve vec = m*a + n*b; return ((m, n) rounded, residual of the rounding)."""
    coeff = np.linalg.solve(np.column_stack([basis_a, basis_b]), np.asarray(vec, float))
    rounded = np.round(coeff)
    residual = np.linalg.norm(coeff - rounded)
    return (int(rounded[0]), int(rounded[1])), residual
