import numpy as np
import pytest

from moire_bands import (
    ModelParams,
    assemble_bloch,
    bands_on,
    build_basis,
    convergence_study,
    eigs_exact,
    fourier_table,
    hermitian_eigs,
    kgrid,
    kpath,
)
from moire_bands.blochpw import BlochMatrix

PHI0 = 4 * np.pi / 3


def free_params(h=0.3):
    return ModelParams(0.0, 0.0, 0.0, 0.0, h)


def test_basis_invariants(lat):
    basis = build_basis(4.0, lat)
    gset = set(basis.gvecs)
    assert (0, 0) in gset
    for m, n in basis.gvecs:
        assert (-m, -n) in gset
    radius = 4.0 * np.linalg.norm(lat.g1)
    norms = np.linalg.norm(basis.cartesian(), axis=1)
    assert norms.max() <= radius + 1e-9
    assert basis.dim == 2 * len(basis.gvecs)


def test_zero_potential_diagonal(lat):
    p = free_params()
    basis = build_basis(3.0, lat)
    k = 0.2 * lat.g1 + 0.1 * lat.g2
    H = assemble_bloch(p, k, basis)
    off = H.entries - np.diag(np.diag(H.entries))
    assert np.abs(off).max() == 0.0
    kin = p.h**2 * np.sum((basis.cartesian() + k) ** 2, axis=1)
    assert np.allclose(np.diag(H.entries), np.repeat(kin, 2), atol=1e-14)


def test_hermiticity(lat, rng):
    p = ModelParams(1.3, 0.8, 0.4, 2.7, 0.07)
    basis = build_basis(4.0, lat)
    k = rng.uniform(-3, 3, 2)
    H = assemble_bloch(p, k, basis).entries
    assert np.abs(H - H.conj().T).max() < 1e-13 * np.abs(H).max()


def test_matrix_element_quadrature_oracle(lat, p0):
    """<e_g f1 | H_k | e_g' f2> against a real-space rectangle rule."""
    basis = build_basis(2.0, lat)
    table = fourier_table(p0, lat)
    k = 0.3 * lat.g1 - 0.2 * lat.g2
    H = assemble_bloch(p0, k, basis, table).entries
    n = 64
    s = np.arange(n) / n
    S, T = np.meshgrid(s, s, indexing="ij")
    X = np.stack(
        [S * lat.v1[0] + T * lat.v2[0], S * lat.v1[1] + T * lat.v2[1]], axis=-1
    )
    from moire_bands import assemble_V

    V = assemble_V(X, p0)
    idx = basis.index()
    cart = basis.cartesian()
    for (ga, comp_a, gb, comp_b) in [
        ((0, 0), 0, (0, 0), 0),
        ((1, 0), 0, (0, 0), 1),
        ((1, 0), 1, (0, -1), 0),
        ((-1, 1), 0, (1, 0), 0),
    ]:
        ia, ib = idx[ga], idx[gb]
        phase = np.exp(1j * (X @ (cart[ib] - cart[ia])))
        integrand = phase * V[..., comp_a, comp_b]
        val = integrand.mean()
        if ga == gb and comp_a == comp_b:
            val += p0.h**2 * np.sum((cart[ia] + k) ** 2)
        assert abs(H[2 * ia + comp_a, 2 * ib + comp_b] - val) < 1e-10


def _wrap(matrix):
    m = np.asarray(matrix, dtype=complex)
    return BlochMatrix(k=np.zeros(2), dim=m.shape[0], entries=m, norm_bound=10.0)


def test_hermitian_eigs_small_cases(rng):
    vals, _, _ = hermitian_eigs(_wrap(np.diag([3.0, -1.0, 2.0, 0.5])), 4)
    assert np.allclose(vals, [-1.0, 0.5, 2.0, 3.0])
    vals, _, _ = hermitian_eigs(_wrap([[0.0, 1.0], [1.0, 0.0]]), 2)
    assert np.allclose(vals, [-1.0, 1.0])
    A = rng.standard_normal((30, 30)) + 1j * rng.standard_normal((30, 30))
    A = A + A.conj().T
    vals, vecs, res = hermitian_eigs(_wrap(A), 7)
    assert np.abs(vals - np.linalg.eigvalsh(A)[:7]).max() < 1e-11
    assert np.abs(vecs.conj().T @ vecs - np.eye(7)).max() < 1e-12
    assert res.max() < 1e-12


def test_hermitian_eigs_nev_bound():
    with pytest.raises(ValueError):
        hermitian_eigs(_wrap(np.eye(2)), 3)


def test_phase_fixing_deterministic(rng):
    A = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    A = A + A.conj().T
    _, v1, _ = hermitian_eigs(_wrap(A), 3)
    _, v2, _ = hermitian_eigs(_wrap(A * np.exp(0j)), 3)
    assert np.abs(v1 - v2).max() == 0.0
    for j in range(3):
        i = np.argmax(np.abs(v1[:, j]))
        assert abs(v1[i, j].imag) < 1e-15 * abs(v1[i, j]) and v1[i, j].real > 0.0


def test_bands_zero_potential_lowest(lat):
    p = free_params(h=0.3)
    basis = build_basis(3.0, lat)
    path = kpath(["G", "K", "M", "G"], 5, lat)
    bs = bands_on(path, p, basis, nev=3)
    cart = basis.cartesian()
    for i, k in enumerate(path.points):
        ref = p.h**2 * np.min(np.sum((cart + k) ** 2, axis=1))
        assert abs(bs.energies[i, 0] - ref) < 1e-12
        assert abs(bs.energies[i, 1] - ref) < 1e-12  # two spin components


def test_residual_contract(lat, p0):
    basis = build_basis(4.0, lat)
    grid = kgrid(2, 2, lat)
    bs = bands_on(grid, p0, basis, nev=4)
    H = assemble_bloch(p0, grid.points[0], basis)
    assert bs.residuals.max() <= 1e-10 * H.norm_bound


def test_spectrum_minus_k_at_zero_U(lat, rng):
    # sigma_1 * parity maps the fiber at k to the fiber at -k when U = 0
    p = ModelParams(1.0, 1.0, 0.0, 2.3, 0.08)
    basis = build_basis(5.0, lat)
    for _ in range(3):
        k = rng.uniform(-1, 1, 2) @ np.vstack([lat.g1, lat.g2])
        a, _, _ = hermitian_eigs(assemble_bloch(p, k, basis), 6, vectors=False)
        b, _, _ = hermitian_eigs(assemble_bloch(p, -k, basis), 6, vectors=False)
        assert np.abs(a - b).max() < 1e-10


def test_gauge_covariance(lat, p0):
    p = ModelParams(p0.alpha, p0.beta, p0.U, p0.phi, 0.1)
    basis = build_basis(9.0, lat)
    k = 0.21 * lat.g1 + 0.13 * lat.g2
    a, _, _ = hermitian_eigs(assemble_bloch(p, k, basis), 4, vectors=False)
    b, _, _ = hermitian_eigs(assemble_bloch(p, k + lat.g1, basis), 4, vectors=False)
    assert np.abs(a - b).max() < 1e-10


def test_variational_monotonicity(lat, p0):
    k = 0.37 * lat.g1 + 0.11 * lat.g2
    small = hermitian_eigs(assemble_bloch(p0, k, build_basis(3.0, lat)), 5, False)[0]
    big = hermitian_eigs(assemble_bloch(p0, k, build_basis(4.0, lat)), 5, False)[0]
    assert np.all(big <= small + 1e-12)


def test_potential_floor_bound(lat, p0, rng):
    basis = build_basis(5.0, lat)
    x = rng.uniform(-1, 1, (4000, 2))
    floor = eigs_exact(x, p0)[0].min()
    k = 0.4 * lat.g1 + 0.7 * lat.g2
    vals, _, _ = hermitian_eigs(assemble_bloch(p0, k, basis), 6, vectors=False)
    assert vals[0] >= floor - 1e-9


def test_convergence_study_zero_potential(lat):
    p = free_params()
    rows = convergence_study(p, np.zeros(2), [2, 3, 4, 5])
    assert rows[0]["dE1"] is None
    assert all(r["dE1"] == 0.0 for r in rows[1:])  # minimizing g present from start
    basis_dims = [2 * len(build_basis(g, lat).gvecs) for g in [2, 3, 4, 5]]
    assert [r["dim"] for r in rows] == basis_dims


def test_convergence_study_validation(p0):
    with pytest.raises(ValueError):
        convergence_study(p0, np.zeros(2), [3, 4])
    with pytest.raises(ValueError):
        convergence_study(p0, np.zeros(2), [5, 4, 3])


def test_workers_match_serial(lat, p0):
    basis = build_basis(3.0, lat)
    grid = kgrid(2, 3, lat)
    serial = bands_on(grid, p0, basis, nev=3, workers=1)
    par = bands_on(grid, p0, basis, nev=3, workers=2)
    assert np.array_equal(serial.energies, par.energies)
