"""Band-width measurements across the twisting angle and the narrowing fit.

Widths are max_k - min_k of each band over a uniform BZ grid.  In the
tunneling regime they decay like exp(-C/h), so the plane-wave cutoff must
be generous enough that the k-variation of the truncation error stays below
the width floor; the cutoff is therefore chosen from the smallest h in the
sweep and re-checked there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blochpw import bands_on, build_basis, suggested_gcut
from .lattice import build_lattice, kgrid
from .potential import ModelParams

#: widths below this are solver noise (dense-eigensolver resolution) and are
#: excluded from fits
WIDTH_FLOOR = 1e-12


def band_widths(
    p: ModelParams,
    h_list,
    kgrid_n: int = 6,
    nbands: int = 3,
    gcut: float | None = None,
    workers: int = 1,
):
    """Per-(h, band) widths over a kgrid_n x kgrid_n grid; same basis for all h.

    Returns (widths array [n_h x nbands], gcut used, convergence check at the
    smallest h: widths there recomputed at gcut + 1, as a relative shift).
    """
    h_list = list(h_list)
    if kgrid_n < 6:
        raise ValueError("need at least a 6x6 k-grid")
    if any(h <= 0 for h in h_list):
        raise ValueError("h values must be positive")
    lat = build_lattice()
    grid = kgrid(kgrid_n, kgrid_n, lat)
    h_min = min(h_list)
    if gcut is None:
        gcut = suggested_gcut(h_min, tail=30.0) + 1
    basis = build_basis(gcut, lat)
    widths = np.empty((len(h_list), nbands))
    for i, h in enumerate(h_list):
        ph = ModelParams(p.alpha, p.beta, p.U, p.phi, h)
        bs = bands_on(grid, ph, basis, nev=nbands, workers=workers)
        widths[i] = bs.widths()

    # re-check convergence at the smallest h with a slightly larger basis
    basis2 = build_basis(gcut + 1, lat)
    pmin = ModelParams(p.alpha, p.beta, p.U, p.phi, h_min)
    w2 = bands_on(grid, pmin, basis2, nev=nbands, workers=workers).widths()
    wref = widths[h_list.index(h_min)]
    shift = np.max(np.abs(w2 - wref) / np.maximum(np.abs(wref), WIDTH_FLOOR))
    return widths, float(gcut), float(shift)


@dataclass(frozen=True)
class ExpFit:
    """Least-squares fit of ln w = a - b/h."""

    a: float
    b: float
    r2: float
    n_used: int


def exp_fit(h_list, w_list) -> ExpFit:
    """Fit ln w against 1/h; widths at or below the floor are excluded."""
    h = np.asarray(h_list, dtype=float)
    w = np.asarray(w_list, dtype=float)
    if h.shape != w.shape:
        raise ValueError("h_list and w_list must have equal length")
    if np.any(w <= 0):
        raise ValueError("band widths must be positive for the exponential fit")
    keep = w > WIDTH_FLOOR
    if keep.sum() < 4:
        raise ValueError("need at least 4 points above the width floor")
    hk, wk = h[keep], w[keep]
    A = np.column_stack([np.ones(hk.size), -1.0 / hk])
    coef, *_ = np.linalg.lstsq(A, np.log(wk), rcond=None)
    a, b = coef
    pred = A @ coef
    resid = np.log(wk) - pred
    total = np.log(wk) - np.log(wk).mean()
    denom = float(total @ total)
    r2 = 1.0 if denom == 0.0 else 1.0 - float(resid @ resid) / denom
    return ExpFit(a=float(a), b=float(b), r2=float(r2), n_used=int(keep.sum()))


@dataclass(frozen=True)
class ScanResult:
    h_list: tuple
    widths: np.ndarray = field(repr=False)
    fit: ExpFit  # lowest band
    gcut: float
    convergence_shift: float
    s0: float | None = None

    def b_over_s0(self):
        return None if self.s0 is None else self.fit.b / self.s0


def narrowing_scan(
    p: ModelParams,
    h_list=(0.12, 0.10, 0.08, 0.07, 0.06, 0.05),
    kgrid_n: int = 6,
    nbands: int = 3,
    gcut: float | None = None,
    s0: float | None = None,
    workers: int = 1,
) -> ScanResult:
    """Width sweep plus exponential fit of the lowest band.

    ``s0`` (the minimal Agmon action) is only used for the loose b/S0
    diagnostic; the narrowing theorem fixes no constant, so callers should
    treat values outside [0.3, 2.2] as a warning, never a failure.
    """
    h_sorted = sorted(h_list, reverse=True)
    widths, used_gcut, shift = band_widths(
        p, h_sorted, kgrid_n=kgrid_n, nbands=nbands, gcut=gcut, workers=workers
    )
    fit = exp_fit(h_sorted, widths[:, 0])
    return ScanResult(
        h_list=tuple(h_sorted),
        widths=widths,
        fit=fit,
        gcut=used_gcut,
        convergence_shift=shift,
        s0=s0,
    )


def flatband_audit(
    p: ModelParams,
    h: float,
    nbands: int = 5,
    kgrid_n: int = 6,
    gcut: float | None = None,
    workers: int = 1,
):
    """Minimum width among the lowest ``nbands`` bands at one h (evidence
    against flat bands, not a proof)."""
    ph = ModelParams(p.alpha, p.beta, p.U, p.phi, h)
    lat = build_lattice()
    if gcut is None:
        gcut = max(6.0, suggested_gcut(h, tail=25.0))
    basis = build_basis(gcut, lat)
    bs = bands_on(kgrid(kgrid_n, kgrid_n, lat), ph, basis, nev=nbands, workers=workers)
    return float(bs.widths().min())
