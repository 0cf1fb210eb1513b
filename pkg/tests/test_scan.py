import numpy as np
import pytest

from moire_bands import (
    ModelParams,
    band_widths,
    build_basis,
    exp_fit,
    flatband_audit,
    kgrid,
)

PHI0 = 4 * np.pi / 3


def test_exp_fit_exact():
    h = np.array([1.0, 0.8, 0.6, 0.5, 0.4])
    w = np.exp(2.0 - 5.0 / h)
    fit = exp_fit(h, w)
    assert abs(fit.a - 2.0) < 1e-12
    assert abs(fit.b - 5.0) < 1e-12
    assert abs(fit.r2 - 1.0) < 1e-12
    assert fit.n_used == 5


def test_exp_fit_noise(rng):
    h = np.linspace(1.0, 0.3, 12)
    w = np.exp(2.0 - 5.0 / h) * (1.0 + 0.01 * rng.standard_normal(12))
    fit = exp_fit(h, w)
    assert abs(fit.b - 5.0) / 5.0 < 0.03


def test_exp_fit_constant():
    h = np.array([0.2, 0.1, 0.05, 0.025])
    fit = exp_fit(h, np.full(4, 0.7))
    assert abs(fit.b) < 1e-12
    assert fit.r2 == 1.0


def test_exp_fit_validation():
    with pytest.raises(ValueError):
        exp_fit([0.1, 0.05, 0.02], [1.0, 1.0, 1.0])  # too few points
    with pytest.raises(ValueError):
        exp_fit([0.1, 0.05, 0.04, 0.02], [1.0, -1.0, 1.0, 1.0])
    # floor-filtered points reduce n_used
    h = np.array([1.0, 0.8, 0.6, 0.5, 0.4])
    w = np.array([1e-3, 1e-4, 1e-5, 1e-6, 1e-13])
    assert exp_fit(h, w).n_used == 4


def test_zero_potential_width_formula(lat):
    p = ModelParams(0.0, 0.0, 0.0, 0.0, 0.3)
    widths, gcut, _ = band_widths(p, [0.3], kgrid_n=6, nbands=1, gcut=3.0)
    grid = kgrid(6, 6, lat)
    cart = build_basis(3.0, lat).cartesian()
    mins = np.array([np.min(np.sum((cart + k) ** 2, axis=1)) for k in grid.points])
    ref = p.h**2 * (mins.max() - mins.min())
    assert ref > 0.0
    assert abs(widths[0, 0] - ref) < 1e-12


def test_band_widths_grid_refinement(p0):
    # width at h = 0.08 stable within 5% between 6x6 and 12x12 grids
    p = ModelParams(1.0, 1.0, 0.0, PHI0, 0.08)
    w6, _, _ = band_widths(p, [0.08], kgrid_n=6, nbands=1, gcut=8.0)
    w12, _, _ = band_widths(p, [0.08], kgrid_n=12, nbands=1, gcut=8.0)
    assert abs(w12[0, 0] - w6[0, 0]) / w6[0, 0] < 0.05


def test_widths_decrease_in_h(p0):
    p = ModelParams(1.0, 1.0, 0.0, PHI0, 0.1)
    widths, _, _ = band_widths(p, [0.1, 0.05], kgrid_n=6, nbands=1, gcut=12.0)
    assert widths[1, 0] < widths[0, 0]


def test_width_bounded_by_gap(p0):
    # in the harmonic regime each band is far narrower than the gap above it
    widths, _, _ = band_widths(p0, [0.05], kgrid_n=6, nbands=2, gcut=10.0)
    gap = 0.05 * 2 * np.sqrt(40 * np.pi**2 / 9)  # E2 - E1 = 2 h sqrt(c1)
    assert widths[0, 0] < gap


def test_flatband_positive_widths():
    p = ModelParams(0.0, 0.0, 0.0, 0.0, 0.5)
    assert flatband_audit(p, h=0.5, nbands=3, gcut=3.0) > 0.0


def test_band_widths_validation(p0):
    with pytest.raises(ValueError):
        band_widths(p0, [0.1], kgrid_n=4)
    with pytest.raises(ValueError):
        band_widths(p0, [-0.1], kgrid_n=6)
