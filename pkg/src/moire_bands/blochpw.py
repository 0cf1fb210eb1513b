"""Plane-wave discretization and diagonalization of the Bloch fibers.

H_k = h^2 (D + k)^2 Id + V on the torus, truncated to dual-lattice momenta
|g| <= gcut * |g1| with two spinor components per plane wave.  Matrices stay
dense; at the cutoffs used here the dense Hermitian solve is both simpler
and bit-reproducible.

The cutoff must grow as the twisting angle shrinks: the ground state's
momentum spread scales like sqrt(sqrt(c)/h) for well curvature c, so a
fixed gcut is eventually swamped.  :func:`suggested_gcut` encodes the
measured rule; :func:`convergence_study` checks it on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lattice import KGrid, KPath, Lattice, build_lattice
from .potential import FourierTable, ModelParams, fourier_table


@dataclass(frozen=True)
class PlaneWaveBasis:
    """Dual-lattice momenta within the cutoff ball, with two components each."""

    gcut: float
    gvecs: tuple  # ordered (m, n) integer pairs
    lat: Lattice = field(repr=False)

    @property
    def npw(self):
        return len(self.gvecs)

    @property
    def dim(self):
        return 2 * len(self.gvecs)

    def index(self):
        return {mn: i for i, mn in enumerate(self.gvecs)}

    def cartesian(self):
        arr = np.array(self.gvecs, dtype=float)
        return arr @ np.column_stack([self.lat.g1, self.lat.g2]).T


def build_basis(gcut: float, lat: Lattice | None = None) -> PlaneWaveBasis:
    """All m*g1 + n*g2 with |g| <= gcut*|g1|, in deterministic (m, n) order."""
    if gcut <= 0:
        raise ValueError("gcut must be positive")
    lat = lat or build_lattice()
    radius2 = (gcut * np.linalg.norm(lat.g1)) ** 2 + 1e-9
    bound = int(math.ceil(1.5 * gcut)) + 2
    out = []
    for m in range(-bound, bound + 1):
        for n in range(-bound, bound + 1):
            g = lat.dual_vector(m, n)
            if g @ g <= radius2:
                out.append((m, n))
    return PlaneWaveBasis(gcut=float(gcut), gvecs=tuple(sorted(out)), lat=lat)


def suggested_gcut(h: float, tail: float = 14.0, curvature: float = 8 * np.pi**2) -> float:
    """Cutoff so the oscillator tail exp(-h*(gcut*|g1|)^2/sqrt(curvature))
    is below exp(-tail); curvature defaults to the widest quadratic
    coefficient of the reference parameter point."""
    lat = build_lattice()
    xi = math.sqrt(tail * math.sqrt(curvature) / h)
    return max(6.0, math.ceil(xi / np.linalg.norm(lat.g1)))


@dataclass(frozen=True)
class BlochMatrix:
    k: np.ndarray
    dim: int
    entries: np.ndarray = field(repr=False)
    norm_bound: float  # upper bound on the spectral norm


def assemble_bloch(
    p: ModelParams,
    k,
    basis: PlaneWaveBasis,
    table: FourierTable | None = None,
) -> BlochMatrix:
    """Dense Hermitian fiber matrix: blocks delta_{gg'} h^2|g+k|^2 Id + Vhat(g-g')."""
    table = table or fourier_table(p, basis.lat)
    k = np.asarray(k, dtype=float)
    n = basis.npw
    H = np.zeros((2 * n, 2 * n), dtype=complex)
    kin = p.h**2 * np.sum((basis.cartesian() + k) ** 2, axis=1)
    H[np.arange(2 * n), np.arange(2 * n)] = np.repeat(kin, 2)
    idx = basis.index()
    for (dm, dn), block in table.entries.items():
        for j, (m, nn) in enumerate(basis.gvecs):
            i = idx.get((m + dm, nn + dn))
            if i is not None:
                H[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] += block
    bound = float(kin.max()) + sum(
        np.linalg.norm(b, 2) for b in table.entries.values()
    )
    return BlochMatrix(k=k, dim=2 * n, entries=H, norm_bound=bound)


def _fix_phases(vectors):
    """Make the largest-magnitude component of each column real and positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        z = out[i, j]
        if z != 0:
            out[:, j] *= np.conj(z) / abs(z)
    return out


def hermitian_eigs(m: BlochMatrix, nev: int, vectors: bool = True):
    """Lowest ``nev`` eigenvalues (ascending) with orthonormal, phase-fixed
    eigenvectors and per-pair residuals ||H v - E v||."""
    if nev > m.dim:
        raise ValueError("nev exceeds the matrix dimension")
    try:
        if vectors:
            vals, vecs = scipy.linalg.eigh(m.entries, subset_by_index=(0, nev - 1))
        else:
            vals = scipy.linalg.eigh(
                m.entries, eigvals_only=True, subset_by_index=(0, nev - 1)
            )
    except scipy.linalg.LinAlgError as err:  # pragma: no cover - LAPACK failure
        raise RuntimeError(
            f"dense eigensolve failed at k={m.k} (dim={m.dim}): {err}"
        ) from err
    if not vectors:
        return vals, None, None
    vecs = _fix_phases(vecs)
    residuals = np.linalg.norm(m.entries @ vecs - vecs * vals[None, :], axis=0)
    return vals, vecs, residuals


@dataclass(frozen=True)
class BandStructure:
    """Eigenvalues over a k-set, ascending per row, plus solve residuals."""

    kset: object  # KGrid or KPath
    energies: np.ndarray
    residuals: np.ndarray
    params: ModelParams
    gcut: float

    @property
    def kpoints(self):
        return self.kset.points

    def widths(self):
        return self.energies.max(axis=0) - self.energies.min(axis=0)


def _solve_one(args):
    p, k, basis, table, nev = args
    H = assemble_bloch(p, k, basis, table)
    vals, _, res = hermitian_eigs(H, nev)
    return vals, res


def bands_on(
    kset,
    p: ModelParams,
    basis: PlaneWaveBasis,
    nev: int = 8,
    table: FourierTable | None = None,
    workers: int = 1,
) -> BandStructure:
    """Diagonalize the fiber at every point of a KGrid or KPath.

    Per-k solves are independent; with ``workers > 1`` they run in a process
    pool but are reduced in k-index order, so the result is identical to the
    serial one.
    """
    if not isinstance(kset, (KGrid, KPath)):
        raise TypeError("kset must be a KGrid or KPath")
    table = table or fourier_table(p, basis.lat)
    jobs = [(p, k, basis, table, nev) for k in kset.points]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_one, jobs, chunksize=4))
    else:
        results = [_solve_one(job) for job in jobs]
    energies = np.array([r[0] for r in results])
    residuals = np.array([r[1] for r in results])
    return BandStructure(
        kset=kset, energies=energies, residuals=residuals, params=p, gcut=basis.gcut
    )


def convergence_study(p: ModelParams, k, gcuts, nev: int = 1):
    """Ground-state energy versus cutoff; rows (gcut, dim, E1, |dE1|)."""
    gcuts = list(gcuts)
    if len(gcuts) < 3:
        raise ValueError("need at least three cutoffs")
    if sorted(gcuts) != gcuts:
        raise ValueError("cutoffs must be ascending")
    lat = build_lattice()
    table = fourier_table(p, lat)
    rows = []
    prev = None
    for gcut in gcuts:
        basis = build_basis(gcut, lat)
        H = assemble_bloch(p, k, basis, table)
        vals, _, _ = hermitian_eigs(H, nev, vectors=False)
        delta = None if prev is None else abs(vals[0] - prev)
        rows.append({"gcut": gcut, "dim": basis.dim, "E1": float(vals[0]), "dE1": delta})
        prev = vals[0]
    return rows
