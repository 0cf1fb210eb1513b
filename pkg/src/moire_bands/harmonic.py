"""Closed-form harmonic-approximation spectrum of the well at the origin.

The low levels of -h^2 Delta + m0 + c1 x1^2 + c2 x2^2 are
E'_n = m0 + h * lambda_n, where lambda_n runs through the multiset
{(2 m1 + 1) sqrt(c1) + (2 m2 + 1) sqrt(c2) : m in N_0^2} in ascending
order.  Two sources for (m0, c1, c2) are supported:

* ``papermode`` -- the published constants
      m0 = 6 cos(phi) - sqrt(9 b^2 + U^2)/2,
      c1 = -8 pi^2 cos(phi) + 2 b^2 pi^2 / (3 sqrt(9 b^2 + U^2)),
      c2 = -8 pi^2 cos(phi) + 6 b^2 pi^2 / sqrt(9 b^2 + U^2),
  valid for alpha = 1.
* ``numeric`` -- finite differences on the exact matrix eigenvalue
  landscape; this is the default for comparisons because it matches the
  operator the Bloch solver diagonalizes.

The printed constants are the x_i^2 Taylor coefficients of the published
expansion (half the second derivatives); the oscillator formula above is
consistent with exactly that reading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .potential import ModelParams, QuadraticWellData, numeric_harmonic_data


@dataclass(frozen=True)
class HarmonicData:
    """Well data plus the level multiset; ``mode`` records the provenance."""

    mode: str
    m0: float
    c1: float
    c2: float

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("harmonic data requires positive quadratic coefficients")


def paper_coeffs(p: ModelParams) -> HarmonicData:
    """Published harmonic constants; rejects alpha != 1 and degenerate wells."""
    if p.alpha != 1.0:
        raise ValueError("papermode constants are only defined for alpha = 1")
    root = math.sqrt(9.0 * p.beta**2 + p.U**2)
    m0 = 6.0 * math.cos(p.phi) - 0.5 * root
    base = -8.0 * math.pi**2 * math.cos(p.phi)
    if p.beta == 0.0:
        c1 = c2 = base
    else:
        c1 = base + 2.0 * p.beta**2 * math.pi**2 / (3.0 * root)
        c2 = base + 6.0 * p.beta**2 * math.pi**2 / root
    if c1 <= 0 or c2 <= 0:
        raise ValueError("no non-degenerate well in papermode for these parameters")
    return HarmonicData(mode="papermode", m0=m0, c1=c1, c2=c2)


def numeric_coeffs(p: ModelParams, eig_mode: str = "exact", audit=None) -> HarmonicData:
    """Harmonic data from the finite-difference well pipeline."""
    data: QuadraticWellData = numeric_harmonic_data(p, eig_mode=eig_mode, audit=audit)
    mode = "numeric" if eig_mode == "exact" else f"numeric-{eig_mode}"
    return HarmonicData(mode=mode, m0=data.m0, c1=data.c1, c2=data.c2)


def levels_up_to(hd: HarmonicData, count: int):
    """First ``count`` elements of the level multiset, with multiplicity.

    The n-th smallest element has m1, m2 <= n - 1, so a (count+1)^2 search
    box is exhaustive.  Ties are ordered by (m1, m2) lexicographically so
    degenerate levels carry deterministic labels.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    w1, w2 = math.sqrt(hd.c1), math.sqrt(hd.c2)
    cand = [
        ((2 * m1 + 1) * w1 + (2 * m2 + 1) * w2, m1, m2)
        for m1 in range(count + 1)
        for m2 in range(count + 1)
    ]
    cand.sort()
    return np.array([c[0] for c in cand[:count]])


def predicted_E(hd: HarmonicData, h: float, n: int) -> float:
    """E'_n = m0 + h * lambda_n.  The O(h^{3/2}) remainder is not added; it
    sets the tolerance of comparisons instead."""
    if n < 1:
        raise ValueError("level index n starts at 1")
    return hd.m0 + h * float(levels_up_to(hd, n)[n - 1])


@dataclass(frozen=True)
class LevelComparison:
    n: int
    computed: float
    predicted: float
    error: float
    error_over_h: float
    error_over_h32: float


@dataclass(frozen=True)
class ComparisonReport:
    h: float
    mode: str
    rows: tuple

    def errors_over_h(self):
        return np.array([r.error_over_h for r in self.rows])


def compare(energies, hd: HarmonicData, h: float) -> ComparisonReport:
    """Per-level signed errors of computed energies against E'_n."""
    energies = np.asarray(energies, dtype=float)
    lam = levels_up_to(hd, len(energies))
    rows = []
    for i, e in enumerate(energies):
        pred = hd.m0 + h * lam[i]
        err = e - pred
        rows.append(
            LevelComparison(
                n=i + 1,
                computed=float(e),
                predicted=float(pred),
                error=float(err),
                error_over_h=float(err / h),
                error_over_h32=float(err / h**1.5),
            )
        )
    return ComparisonReport(h=h, mode=hd.mode, rows=tuple(rows))
