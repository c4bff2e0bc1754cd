import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cracktrack.errors import DomainError, MeshingError, UnsupportedDimensionError
from cracktrack.mesh_fem import sphere_points
from cracktrack.sphere_spectrum import (
    HomogeneousExtension,
    SlitSphereSpectrum,
    build_slit_sphere_mesh,
    erratum_check,
    eval_eigenfunction,
    first_mode_closed_form,
    match_oracle,
    oracle_eigenvalue,
    oracle_multiplicity,
    sphere_matrices,
    solve_eigenpairs,
    surface_gradient,
)


@pytest.mark.parametrize("k, N, expected", [(1, 2, 0.75), (2, 2, 2.0), (3, 2, 3.75), (4, 3, 8.0)])
def test_oracle_eigenvalue(k, N, expected):
    assert oracle_eigenvalue(k, N) == expected


def test_oracle_domain():
    with pytest.raises(DomainError):
        oracle_eigenvalue(0)
    assert [oracle_multiplicity(k) for k in range(1, 6)] == [1, 1, 2, 2, 3]


def test_erratum_table():
    table = erratum_check(N=2, k_max=2)
    assert table[1] == (1.75, 0.75)
    assert table[2] == (4.0, 2.0)


def test_match_oracle():
    assert match_oracle(0.76) == 1
    assert match_oracle(2.1) == 2
    assert match_oracle(1.3) is None


def test_sphere_mesh_invariants(coarse_spectrum):
    mesh = coarse_spectrum.mesh
    assert_allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0, atol=1e-12)
    assert mesh.euler_characteristic == 2
    edges = np.sort(mesh.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    assert np.all(counts == 2)
    cut = mesh.vertices[mesh.cut_vertices]
    assert len(cut) > 0
    assert np.all(cut[:, 1] >= -1e-12)
    assert np.all(np.abs(cut[:, 2]) <= 1e-12)


def test_sphere_matrices(coarse_spectrum):
    stiffness, mass = sphere_matrices(coarse_spectrum.mesh)
    ones = np.ones(coarse_spectrum.mesh.n_vertices)
    assert abs(stiffness - stiffness.T).max() < 1e-12
    assert_allclose(stiffness @ ones, 0.0, atol=1e-10)
    assert ones @ (mass @ ones) == pytest.approx(4.0 * np.pi, rel=0.05)
    x1 = coarse_spectrum.mesh.vertices[:, 0]
    # int |grad_S x1|^2 over the unit sphere is 8 pi / 3
    assert x1 @ (stiffness @ x1) == pytest.approx(8.0 * np.pi / 3.0, rel=0.05)


def test_sphere_mesh_scaling():
    coarse = build_slit_sphere_mesh(2, 0.2)
    fine = build_slit_sphere_mesh(2, 0.1)
    assert 2.0 <= fine.n_vertices / coarse.n_vertices <= 8.0


def test_sphere_mesh_preconditions():
    with pytest.raises(UnsupportedDimensionError):
        build_slit_sphere_mesh(3, 0.2)
    with pytest.raises(MeshingError):
        build_slit_sphere_mesh(2, 0.001)


def test_eigenpairs_are_mass_orthonormal(coarse_spectrum):
    assert_allclose(coarse_spectrum.gram(), np.eye(len(coarse_spectrum.pairs)), atol=1e-6)
    values = [pair.mu for pair in coarse_spectrum.pairs]
    assert values == sorted(values)
    assert values[0] > 0
    for pair in coarse_spectrum.pairs:
        assert np.all(pair.psi[coarse_spectrum.mesh.cut_vertices] == 0.0)


def test_first_pair_matches_crack_mode(coarse_spectrum):
    pair = coarse_spectrum.pairs[0]
    assert pair.k_index == 1
    assert pair.ell == 0.5
    mesh = coarse_spectrum.mesh
    closed = first_mode_closed_form(mesh.vertices)
    mass = coarse_spectrum.mass
    correlation = closed @ (mass @ pair.psi) / np.sqrt(closed @ (mass @ closed))
    assert correlation > 0.97


def test_first_mode_closed_form_is_normalized():
    points, weights, unit = sphere_points(1.0)
    assert_allclose(np.sum(weights * first_mode_closed_form(unit) ** 2), 1.0, rtol=1e-6)


def test_eval_eigenfunction(coarse_spectrum):
    mesh = coarse_spectrum.mesh
    pair = coarse_spectrum.pairs[0]
    vertex = 7
    assert_allclose(eval_eigenfunction(pair, mesh, mesh.vertices[vertex]), pair.psi[vertex], atol=1e-10)
    on_cut = mesh.vertices[mesh.cut_vertices[:5]]
    assert_allclose(eval_eigenfunction(pair, mesh, on_cut), 0.0, atol=1e-12)
    opposite = eval_eigenfunction(pair, mesh, np.array([0.0, -1.0, 0.0]))
    assert opposite > 0.9 * np.abs(pair.psi).max()
    with pytest.raises(DomainError):
        eval_eigenfunction(pair, mesh, np.array([0.0, -2.0, 0.0]))


def test_surface_gradient_is_tangent(coarse_spectrum, rng):
    theta = rng.normal(size=(20, 3))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    grads = surface_gradient(coarse_spectrum.pairs[0], coarse_spectrum.mesh, theta)
    assert_allclose(np.sum(grads * theta, axis=1), 0.0, atol=1e-12)


def test_homogeneous_extension(coarse_spectrum, rng):
    pair = coarse_spectrum.pairs[0]
    extension = HomogeneousExtension(coarse_spectrum.mesh, [pair], [1.0], 0.5)
    theta = rng.normal(size=(10, 3))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)
    assert_allclose(extension.evaluate(0.6 * theta), np.sqrt(2.0) * extension.evaluate(0.3 * theta), atol=1e-12)
    assert_allclose(extension.evaluate(theta), eval_eigenfunction(pair, coarse_spectrum.mesh, theta), atol=1e-12)
    assert extension.evaluate(np.zeros((1, 3)))[0] == 0.0


def test_export_and_load(coarse_spectrum, tmp_path):
    path = tmp_path / "spectrum.json"
    coarse_spectrum.export(path)
    loaded = SlitSphereSpectrum.load(path)
    assert loaded.mesh.checksum == coarse_spectrum.mesh.checksum
    assert [pair.mu for pair in loaded.pairs] == [pair.mu for pair in coarse_spectrum.pairs]
    assert_allclose(loaded.pairs[0].psi, coarse_spectrum.pairs[0].psi, rtol=0, atol=0)


def test_seed_reproducibility(coarse_spectrum):
    again = solve_eigenpairs(coarse_spectrum.mesh, 6, seed=0)
    assert [pair.mu for pair in again] == [pair.mu for pair in coarse_spectrum.pairs]


def test_unmatched_pairs_are_flagged(coarse_spectrum):
    pair = dataclasses.replace(coarse_spectrum.pairs[0], k_index=None)
    assert not pair.matched
    assert pair.ell is None


@pytest.mark.slow
def test_spectrum_converges_to_oracle():
    spectrum = SlitSphereSpectrum.compute(h=0.05, count=3, seed=0)
    first = spectrum.pairs[0].mu
    assert 0.75 * 0.97 <= first <= 0.75 * 1.05
    for pair in spectrum.pairs:
        assert pair.matched
        target = oracle_eigenvalue(pair.k_index)
        assert abs(pair.mu - target) / target <= 0.1
    coarse = SlitSphereSpectrum.compute(h=0.1, count=1, seed=0).pairs[0].mu
    assert abs(first - 0.75) < abs(coarse - 0.75)
