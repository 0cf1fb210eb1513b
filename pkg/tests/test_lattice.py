import numpy as np
import pytest

from moire_bands import kgrid, kpath, reduce_to_cell
from moire_bands.lattice import ROT, SQRT3, integer_combination


def test_direct_basis_exact(lat):
    assert np.array_equal(lat.v1, np.array([-SQRT3 / 2, -0.5]))
    assert np.array_equal(lat.v2, np.array([SQRT3 / 2, -0.5]))


def test_biorthogonality(lat):
    for i, v in enumerate([lat.v1, lat.v2]):
        for j, g in enumerate([lat.g1, lat.g2]):
            want = 2 * np.pi if i == j else 0.0
            assert abs(v @ g - want) < 1e-14


def test_dual_basis_values(lat):
    # solving the 2x2 biorthogonality system by hand:
    # g1 = 2*pi*(-1/sqrt3, -1), g2 = 2*pi*(1/sqrt3, -1)
    assert np.allclose(lat.g1, 2 * np.pi * np.array([-1 / SQRT3, -1.0]), atol=1e-14)
    assert np.allclose(lat.g2, 2 * np.pi * np.array([1 / SQRT3, -1.0]), atol=1e-14)


def test_neighbor_shell(lat):
    shell = lat.neighbor_shell
    assert shell.shape == (6, 2)
    norms = np.linalg.norm(shell, axis=1)
    assert np.abs(norms - 1.0).max() < 1e-14
    # closed under v -> -v
    for v in shell:
        assert any(np.linalg.norm(v + w) < 1e-14 for w in shell)
    expected = {(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1)}
    got = set()
    for v in shell:
        (m, n), res = integer_combination(v, lat.v1, lat.v2)
        assert res < 1e-12
        got.add((m, n))
    assert got == expected


def test_rotation_closure(lat):
    for v in (lat.v1, lat.v2):
        _, res = integer_combination(ROT @ v, lat.v1, lat.v2)
        assert res < 1e-12
    for g in (lat.g1, lat.g2):
        _, res = integer_combination(ROT @ g, lat.g1, lat.g2)
        assert res < 1e-12
    # the rotation cycles v1 -> v2 -> v3 = -(v1 + v2)
    assert np.allclose(ROT @ lat.v1, lat.v2, atol=1e-14)
    assert np.allclose(ROT @ lat.v2, -(lat.v1 + lat.v2), atol=1e-14)


def test_reduce_to_cell(lat):
    assert np.allclose(reduce_to_cell(np.zeros(2), lat), 0.0, atol=1e-14)
    assert np.allclose(reduce_to_cell(lat.g1, lat), 0.0, atol=1e-12)
    got = reduce_to_cell(1.25 * lat.g1 + 0.5 * lat.g2, lat)
    assert np.allclose(got, 0.25 * lat.g1 + 0.5 * lat.g2, atol=1e-12)


def test_reduce_fractional_range(lat, rng):
    for _ in range(100):
        k = rng.uniform(-40, 40, 2)
        frac = lat.fractional(reduce_to_cell(k, lat))
        assert np.all(frac >= -1e-12) and np.all(frac < 1.0 + 1e-12)


def test_kgrid(lat):
    grid = kgrid(4, 3, lat)
    assert len(grid) == 12
    fracs = np.array([lat.fractional(k) for k in grid.points])
    assert np.all(fracs >= -1e-12) and np.all(fracs < 1.0 - 1e-12)


def test_kpath_trivial_segment(lat):
    path = kpath(["G", "G"], 10, lat)
    assert np.allclose(path.points, 0.0)
    assert len(path) == 11  # shared endpoints counted once: n_per_segment + 1


def test_kpath_gm_endpoints(lat):
    path = kpath(["G", "M"], 2, lat)
    M = 0.5 * (lat.g1 + lat.g2)
    assert np.allclose(path.points[0], 0.0)
    assert np.allclose(path.points[1], 0.5 * M, atol=1e-14)
    assert np.allclose(path.points[2], M, atol=1e-14)


def test_kpath_closed(lat):
    path = kpath(["G", "K", "M", "G"], 7, lat)
    assert np.allclose(path.points[0], path.points[-1], atol=1e-14)
    assert np.all(np.diff(path.arclength) >= -1e-15)
    k_anchor = path.points[path.label_indices[1]]
    assert np.allclose(k_anchor, (lat.g1 + 2 * lat.g2) / 3.0, atol=1e-13)


def test_kpath_unknown_label(lat):
    with pytest.raises(ValueError, match="unknown"):
        kpath(["G", "X"], 4, lat)
