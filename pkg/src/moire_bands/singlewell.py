"""Reference solver for the single-well comparison operator.

H_well = -h^2 Delta Id + V(x) + (1 - chi(|x|)) Id on a square box with
Dirichlet boundary, discretized with the 5-point stencil.  The radial C^2
bump chi equals 1 inside radius delta1 and 0 outside delta2, so every well
except the one at the origin is lifted by +1.

With the wells filled, the essential-spectrum edge of the untruncated
operator sits near (filled lattice ground energy); only the lowest few
boxed eigenvalues approximate true discrete levels -- at moderate h only
E1 does, the next cluster consists of filled-well states.  The finite
difference error scales as (grid step)^2 and is measured, not assumed:
:func:`well_ground_energy` returns a Richardson-extrapolated value with an
explicit error budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .potential import ModelParams, eval_intralayer, eval_T


@dataclass(frozen=True)
class WellProblem:
    """Truncated-domain single-well eigenproblem specification.

    box [-L, L]^2 with n grid points per axis; cutoff radii
    0 < delta1 < delta2 < 1 (distance to the nearest lattice neighbor).
    """

    params: ModelParams
    L: float = 1.5
    n: int = 256
    delta1: float = 0.3
    delta2: float = 0.45

    def __post_init__(self):
        if not (0.0 < self.delta1 < self.delta2):
            raise ValueError("need 0 < delta1 < delta2")
        if self.delta2 >= 1.0:
            raise ValueError("delta2 must stay below the neighbor distance 1")
        if self.L < self.delta2 + 0.25:
            raise ValueError("box halfwidth too small: require L >= delta2 + 0.25")


def chi_profile(r, delta1=0.3, delta2=0.45):
    """Radial C^2 bump: 1 for r <= delta1, 0 for r >= delta2, quintic
    smoothstep in between (monotone, two vanishing derivatives at both ends)."""
    r = np.asarray(r, dtype=float)
    u = np.clip((r - delta1) / (delta2 - delta1), 0.0, 1.0)
    return 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def _model_blocks(wp: WellProblem, X1, X2):
    p = wp.params
    vu, vd = eval_intralayer(np.stack([X1, X2], axis=-1), p.phi)
    t = p.beta * eval_T(np.stack([X1, X2], axis=-1))
    return p.alpha * vu + 0.5 * p.U, p.alpha * vd - 0.5 * p.U, t


def assemble_well(wp: WellProblem, potential=None):
    """Sparse Hermitian operator of dimension 2 n^2 (two components per node).

    ``potential`` may override the model: a callable (X1, X2) -> (v11, v22,
    v12) evaluated on the full meshgrid; the (1 - chi) filling is always
    added.  Dirichlet rows are eliminated by construction (the stencil's
    missing neighbors are zero).
    """
    if wp.n < 64:
        raise ValueError("grid is under-resolved: need n >= 64")
    xs = np.linspace(-wp.L, wp.L, wp.n)
    dx = xs[1] - xs[0]
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    if potential is None:
        v11, v22, v12 = _model_blocks(wp, X1, X2)
    else:
        v11, v22, v12 = potential(X1, X2)
        v11 = np.broadcast_to(v11, X1.shape)
        v22 = np.broadcast_to(v22, X1.shape)
        v12 = np.broadcast_to(v12, X1.shape)
    fill = 1.0 - chi_profile(np.hypot(X1, X2), wp.delta1, wp.delta2)

    one = np.ones(wp.n)
    lap1 = sp.spdiags([one, -2.0 * one, one], [-1, 0, 1], wp.n, wp.n)
    eye = sp.identity(wp.n)
    kin = -wp.params.h**2 * (sp.kron(lap1, eye) + sp.kron(eye, lap1)) / dx**2
    off = sp.diags(np.asarray(v12, dtype=complex).ravel())
    A = sp.bmat(
        [
            [kin + sp.diags((v11 + fill).ravel()), off],
            [off.conj().T, kin + sp.diags((v22 + fill).ravel())],
        ],
        format="csc",
    )
    return A


def well_eigs(wp: WellProblem, nev: int = 6, sigma=None, tol: float = 1e-9):
    """Lowest ``nev`` eigenvalues (ascending) by shift-invert Lanczos.

    The shift defaults to just below the sampled potential floor, which is a
    rigorous lower bound for the operator.  The ARPACK start vector is
    fixed, so repeated runs are bit-identical.
    """
    if nev > 20:
        raise ValueError("nev must be <= 20")
    A = assemble_well(wp)
    return _eigs_of(A, nev, sigma, tol, wp)


def _eigs_of(A, nev, sigma, tol, wp: WellProblem):
    N = A.shape[0]
    if sigma is None:
        floor = _potential_floor(wp)
        sigma = floor - 0.3
    shifted = (A - sigma * sp.identity(N, format="csc")).tocsc()
    lu = splu(shifted, permc_spec="MMD_AT_PLUS_A")
    op = LinearOperator((N, N), matvec=lu.solve, dtype=complex)
    v0 = np.full(N, 1.0 / np.sqrt(N))
    try:
        vals = eigsh(
            A,
            k=nev,
            sigma=sigma,
            which="LM",
            OPinv=op,
            v0=v0,
            tol=tol,
            return_eigenvectors=False,
        )
    except Exception as err:
        raise RuntimeError(f"shift-invert eigensolve failed (n={wp.n}): {err}") from err
    return np.sort(vals.real)


def _potential_floor(wp: WellProblem):
    xs = np.linspace(-wp.L, wp.L, 64)
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    v11, v22, v12 = _model_blocks(wp, X1, X2)
    mean = 0.5 * (v11 + v22)
    rad = np.sqrt(0.25 * (v11 - v22) ** 2 + np.abs(v12) ** 2)
    return float((mean - rad).min())


@dataclass(frozen=True)
class GroundEnergy:
    """Richardson-extrapolated ground energy with an explicit FD budget."""

    value: float
    raw: dict = field(repr=False)  # n -> E1 at that resolution
    fd_budget: float  # |E1(2n) - E1(n)| / 3, the removed leading term


def well_ground_energy(wp: WellProblem, tol: float = 1e-9) -> GroundEnergy:
    """E1 extrapolated from resolutions (n/2, n); budget = removed Delta^2 term."""
    if wp.n % 2 != 0:
        raise ValueError("n must be even so n/2 is a valid coarse grid")
    coarse = WellProblem(wp.params, L=wp.L, n=wp.n // 2, delta1=wp.delta1, delta2=wp.delta2)
    e_coarse = well_eigs(coarse, nev=2, tol=tol)[0]
    e_fine = well_eigs(wp, nev=2, tol=tol)[0]
    corr = (e_fine - e_coarse) / 3.0
    return GroundEnergy(
        value=float(e_fine + corr),
        raw={coarse.n: float(e_coarse), wp.n: float(e_fine)},
        fd_budget=abs(float(corr)),
    )
