import numpy as np
import pytest

from moire_bands import (
    HarmonicData,
    ModelParams,
    compare,
    levels_up_to,
    numeric_coeffs,
    paper_coeffs,
    predicted_E,
)

PHI0 = 4 * np.pi / 3


def test_paper_coeffs_reference():
    hd = paper_coeffs(ModelParams(1.0, 1.0, 0.0, PHI0, 0.05))
    assert abs(hd.m0 + 4.5) < 1e-12
    assert abs(hd.c1 - 38 * np.pi**2 / 9) < 1e-12
    assert abs(hd.c2 - 6 * np.pi**2) < 1e-12
    assert abs(hd.c1 - 41.674) < 1e-2 and abs(hd.c2 - 59.2176) < 1e-3


def test_paper_coeffs_phi_half_pi():
    hd = paper_coeffs(ModelParams(1.0, 1.0, 0.0, np.pi / 2, 0.05))
    assert abs(hd.m0 + 1.5) < 1e-12
    assert abs(hd.c1 - 2 * np.pi**2 / 9) < 1e-12
    assert abs(hd.c2 - 2 * np.pi**2) < 1e-12


def test_paper_coeffs_decoupled_isotropic():
    hd = paper_coeffs(ModelParams(1.0, 0.0, 0.5, np.pi, 0.05))
    assert hd.c1 == hd.c2 == 8 * np.pi**2


def test_paper_coeffs_rejections():
    with pytest.raises(ValueError, match="alpha"):
        paper_coeffs(ModelParams(2.0, 1.0, 0.0, PHI0, 0.05))
    with pytest.raises(ValueError, match="well"):
        paper_coeffs(ModelParams(1.0, 0.1, 0.0, 0.0, 0.05))  # cos(phi) = 1


def test_levels_isotropic():
    hd = HarmonicData(mode="synthetic", m0=0.0, c1=1.0, c2=1.0)
    assert np.allclose(levels_up_to(hd, 6), [2, 4, 4, 6, 6, 6])


def test_levels_reference_values():
    hd = paper_coeffs(ModelParams(1.0, 1.0, 0.0, PHI0, 0.05))
    lam = levels_up_to(hd, 3)
    s1, s2 = np.sqrt(hd.c1), np.sqrt(hd.c2)
    assert np.allclose(lam, [s1 + s2, 3 * s1 + s2, s1 + 3 * s2], atol=1e-12)
    assert np.allclose(lam, [14.1510, 27.0622, 29.5418], atol=2e-3)


def test_levels_stable_under_box(rng):
    hd = HarmonicData(mode="synthetic", m0=0.0, c1=2.3, c2=7.7)
    lam = levels_up_to(hd, 12)
    brute = sorted(
        (2 * a + 1) * np.sqrt(2.3) + (2 * b + 1) * np.sqrt(7.7)
        for a in range(40)
        for b in range(40)
    )
    assert np.allclose(lam, brute[:12], atol=1e-12)
    assert np.all(np.diff(lam) >= -1e-12)


def test_levels_collision_multiplicity():
    # c2 = 9 c1 produces exact collisions; every (m1, m2) counted once
    c1 = 1.7
    hd = HarmonicData(mode="synthetic", m0=0.0, c1=c1, c2=9 * c1)
    lam = levels_up_to(hd, 25)
    brute = sorted(
        (2 * a + 1) * np.sqrt(c1) + (2 * b + 1) * 3 * np.sqrt(c1)
        for a in range(21)
        for b in range(21)
    )
    assert np.allclose(lam, brute[:25], atol=1e-12)


def test_predicted_E():
    hd = HarmonicData(mode="synthetic", m0=-4.5, c1=38 * np.pi**2 / 9, c2=6 * np.pi**2)
    assert predicted_E(hd, 0.0, 3) == -4.5
    assert abs(predicted_E(hd, 0.01, 1) - (-4.358490)) < 2e-5
    lam2 = levels_up_to(hd, 2)[1]
    d = predicted_E(hd, 0.04, 2) - predicted_E(hd, 0.02, 2)
    assert abs(d - 0.02 * lam2) < 1e-14


def test_predicted_E_index():
    hd = HarmonicData(mode="synthetic", m0=0.0, c1=1.0, c2=1.0)
    with pytest.raises(ValueError):
        predicted_E(hd, 0.1, 0)


def test_compare_self_consistent():
    hd = HarmonicData(mode="synthetic", m0=-2.0, c1=3.0, c2=5.0)
    h = 0.03
    synthetic = hd.m0 + h * levels_up_to(hd, 5)
    rep = compare(synthetic, hd, h)
    assert np.abs([r.error for r in rep.rows]).max() == 0.0
    assert np.abs(rep.errors_over_h()).max() == 0.0


def test_numeric_coeffs_modes(p0):
    exact = numeric_coeffs(p0)
    assert exact.mode == "numeric"
    paper_fd = numeric_coeffs(p0, eig_mode="papermode")
    ref = paper_coeffs(p0)
    assert abs(paper_fd.m0 - ref.m0) < 1e-9
    assert abs(paper_fd.c1 - ref.c1) < 1e-6
    assert abs(paper_fd.c2 - ref.c2) < 1e-6


def test_harmonic_data_validation():
    with pytest.raises(ValueError):
        HarmonicData(mode="x", m0=0.0, c1=-1.0, c2=1.0)
