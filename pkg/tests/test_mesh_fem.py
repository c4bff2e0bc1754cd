import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cracktrack.errors import ConstructionError, DomainError, MeshingError, PreconditionError, ResolutionError
from cracktrack.mesh_fem import (
    BoundaryData,
    ScalarField,
    approx_level,
    approx_profile,
    assemble_solve,
    ball_quadrature,
    bilinear_form,
    closed_form_field,
    cutoff_boundary_data,
    galerkin_residual,
    graded_local_size,
    h1_distance,
    interpolate,
    mesh_approx_domain,
    mesh_slit_ball,
    transition,
)

COARSE_RADIUS = 0.5


@pytest.fixture(scope="module")
def x3_solution(coarse_mesh, flat_bundle, zero_potential):
    return assemble_solve(coarse_mesh, flat_bundle, zero_potential, closed_form_field("x3"))


def test_mesh_size_bounds():
    with pytest.raises(MeshingError):
        mesh_slit_ball(0.5, 0.2)
    with pytest.raises(MeshingError):
        mesh_slit_ball(0.5, 0.0)


def test_graded_local_size():
    assert graded_local_size(0.5, 0.5, 0.125, levels=2) == 0.125
    assert graded_local_size(0.25, 0.5, 0.125, levels=2) == 0.0625
    assert graded_local_size(0.01, 0.5, 0.125, levels=2) == 0.03125


def test_slit_ball_mesh(coarse_mesh):
    assert np.all(coarse_mesh.volumes > 0)
    ball = 4.0 * math.pi * COARSE_RADIUS**3 / 3.0
    assert abs(coarse_mesh.volume - ball) / ball < 0.05

    crack = coarse_mesh.vertices[coarse_mesh.crack_faces.reshape(-1)]
    assert len(coarse_mesh.crack_faces) > 0
    assert np.all(np.abs(crack[:, 2]) <= 1e-12)
    assert np.all(crack[:, 1] >= -1e-12)

    sphere = coarse_mesh.vertices[coarse_mesh.sphere_vertices]
    assert_allclose(np.linalg.norm(sphere, axis=1), COARSE_RADIUS, rtol=1e-12)


def test_require_resolved(coarse_mesh):
    for radius in (0.5, 0.25, 0.125):
        coarse_mesh.require_resolved(radius)
    with pytest.raises(ResolutionError):
        coarse_mesh.require_resolved(0.1)
    with pytest.raises(ResolutionError):
        coarse_mesh.require_resolved(0.6)


def test_scaled_mesh_and_field(coarse_mesh, rng):
    field = closed_form_field("x1_crack_mode", coarse_mesh)
    scaled = field.scaled(2.0)
    assert scaled.mesh.radius == 1.0
    assert coarse_mesh.scaled(2.0) is scaled.mesh
    points = rng.uniform(-0.2, 0.2, size=(10, 3))
    assert_allclose(scaled.evaluate(2.0 * points), field.evaluate(points), atol=1e-12)


def test_closed_form_fields(rng):
    points = rng.uniform(-1.0, 1.0, size=(60, 3))
    rho = np.hypot(points[:, 1], points[:, 2])
    away = (rho > 0.3) & ((np.abs(points[:, 2]) > 0.05) | (points[:, 1] < 0))
    points, rho = points[away], rho[away]
    mode = closed_form_field("crack_mode")
    assert_allclose(mode.evaluate(points) ** 2, 0.5 * (rho - points[:, 1]), atol=1e-12)
    # harmonic: the divergence of the gradient vanishes away from the edge
    step = 1e-4
    laplacian = sum(
        (mode.gradient(points + step * e)[:, i] - mode.gradient(points - step * e)[:, i]) / (2 * step)
        for i, e in enumerate(np.eye(3))
    )
    assert_allclose(laplacian, 0.0, atol=1e-5)
    slit = np.array([[0.3, 0.4, 0.0]])
    assert_allclose(mode.evaluate(slit), 0.0, atol=1e-12)
    with pytest.raises(ConstructionError):
        closed_form_field("crack_mode_0")
    with pytest.raises(ConstructionError):
        closed_form_field("sin")


def test_interpolate_marks_vanishing_fields(coarse_mesh):
    mode = interpolate(coarse_mesh, closed_form_field("crack_mode"))
    assert np.array_equal(mode.dirichlet_mask, coarse_mesh.crack_vertices)
    one = interpolate(coarse_mesh, closed_form_field("one"))
    assert not one.dirichlet_mask.any()
    assert not one.is_trivial


def test_linear_solution_is_exact(coarse_mesh, x3_solution, flat_bundle, zero_potential):
    assert_allclose(x3_solution.nodal, coarse_mesh.vertices[:, 2], atol=1e-5)
    assert np.all(x3_solution.nodal[coarse_mesh.crack_vertices] == 0.0)
    assert x3_solution.info["unknowns"] == int((~coarse_mesh.fixed_vertices).sum())
    assert galerkin_residual(x3_solution, flat_bundle, zero_potential) < 1e-8
    distance = h1_distance(x3_solution, closed_form_field("x3"), 0.25)
    assert distance["h1"] < 1e-4


def test_assembly_is_thread_independent(coarse_mesh, parabola_bundle, cubic_potential):
    single = bilinear_form(coarse_mesh, parabola_bundle, cubic_potential, threads=1)
    pooled = bilinear_form(coarse_mesh, parabola_bundle, cubic_potential, threads=3)
    assert abs(single - pooled).max() == 0.0
    assert abs(single - single.T).max() < 1e-12


def test_straightened_solve(coarse_mesh, parabola_bundle, cubic_potential, parabola_crack):
    data = BoundaryData.from_dict({"terms": [{"field": "crack_mode"}], "straightened": True}, parabola_bundle)
    solution = assemble_solve(coarse_mesh, parabola_bundle, cubic_potential, data)
    outer = coarse_mesh.sphere_vertices & ~coarse_mesh.crack_vertices
    assert_allclose(solution.nodal[outer], data.evaluate(coarse_mesh.vertices[outer]))
    assert np.all(solution.nodal[coarse_mesh.crack_vertices] == 0.0)
    assert galerkin_residual(solution, parabola_bundle, cubic_potential) < 1e-8


def test_boundary_data_errors(flat_bundle):
    with pytest.raises(ConstructionError):
        BoundaryData.from_dict({"terms": [{"field": "bogus"}]})
    with pytest.raises(ConstructionError):
        BoundaryData.from_dict({"terms": [{"field": "x3"}], "straightened": True})
    data = BoundaryData.from_dict({"terms": [{"field": "x3", "weight": 2.0}], "straightened": True}, flat_bundle)
    assert_allclose(data.evaluate(np.array([[0.1, 0.2, 0.3]])), [0.6])


def test_ball_quadrature_volume(coarse_mesh):
    for radius in (0.25, 0.4):
        quad = ball_quadrature(coarse_mesh, radius)
        ball = 4.0 * math.pi * radius**3 / 3.0
        assert abs(quad.integrate(np.ones(len(quad.weights))) - ball) / ball < 0.03
    assert ball_quadrature(coarse_mesh, 0.25) is ball_quadrature(coarse_mesh, 0.25)


def test_transition():
    eta, deta = transition(np.array([0.0, 0.5, 0.75, 1.0, 2.0]))
    assert_allclose(eta[[0, 1]], 1.0)
    assert_allclose(eta[[3, 4]], 0.0)
    assert 0.0 < eta[2] < 1.0
    assert deta[2] < 0.0


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_approx_profile(alpha):
    n = 64
    t = np.linspace(0.0, 0.5, 401)
    profile = approx_profile(n, alpha, t)
    assert np.all(profile.property_residual >= -1e-14)
    assert approx_profile(n, alpha, 0.0).value == pytest.approx(n ** (-1.0 / (2.0 * alpha)))
    far = t >= 1.0 / n
    assert_allclose(profile.value[far], (n * t[far]) ** (1.0 / alpha) * n ** (-1.0 / (2.0 * alpha)))
    with pytest.raises(DomainError):
        approx_profile(n, alpha, -0.1)


def test_approx_domain(coarse_mesh):
    with pytest.raises(PreconditionError):
        mesh_approx_domain(0.5, 16, 2.0, 0.125, levels=2)

    mesh = mesh_approx_domain(0.5, 64, 2.0, 0.125, levels=2)
    assert mesh.kind == "approx_domain"
    assert np.all(mesh.volumes > 0)
    assert mesh.volume < coarse_mesh.volume
    gamma = mesh.vertices[mesh.crack_faces.reshape(-1)]
    assert_allclose(approx_level(gamma, 64, 2.0), 0.0, atol=1e-10)
    assert np.all(approx_level(mesh.vertices, 64, 2.0) <= 1e-10)
    assert len(mesh.crack_face_cells) == len(mesh.crack_faces)


def test_cutoff_boundary_data():
    target = closed_form_field("one")
    data = cutoff_boundary_data(target, 64, 2.0)
    on_gamma = np.array([[0.0, approx_profile(64, 2.0, 0.2).value, 0.2]])
    assert_allclose(data.evaluate(on_gamma), 0.0, atol=1e-12)
    far = np.array([[0.0, -2.0, 0.0]])
    assert_allclose(data.evaluate(far), 1.0)


def test_mesh_export(coarse_mesh, tmp_path):
    path = tmp_path / "mesh.txt"
    coarse_mesh.export(path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"# cracktrack-mesh fnv1a={coarse_mesh.checksum} kind=slit_ball"
    assert lines[1] == f"vertices {coarse_mesh.n_vertices}"
    assert f"crack_faces {len(coarse_mesh.crack_faces)}" in lines


def test_h1_distance_errors(coarse_mesh):
    with pytest.raises(DomainError):
        h1_distance(closed_form_field("x3"), closed_form_field("one"), 0.25)
    with pytest.raises(DomainError):
        h1_distance(closed_form_field("x3", coarse_mesh), closed_form_field("one"), 0.75)


def test_discrete_coercivity(coarse_mesh, parabola_bundle, cubic_potential, rng):
    form = bilinear_form(coarse_mesh, parabola_bundle, cubic_potential)
    dirichlet = bilinear_form(coarse_mesh)
    for _ in range(20):
        v = rng.standard_normal(coarse_mesh.n_vertices)
        v[coarse_mesh.fixed_vertices] = 0.0
        assert v @ (form @ v) >= 0.25 * (v @ (dirichlet @ v))


def test_crack_decoupling(coarse_mesh, flat_bundle, zero_potential, rng):
    # The mesh never couples the two open half balls directly: every tet lies on one side
    # of x3 = 0.
    matrix = bilinear_form(coarse_mesh, flat_bundle, zero_potential).tocoo()
    x3 = coarse_mesh.vertices[:, 2]
    across = (x3[matrix.row] > 1e-12) & (x3[matrix.col] < -1e-12)
    assert not np.any(matrix.data[across])

    # Data on the upper side only; its mirror image gives the mirrored solution.
    upper = assemble_solve(coarse_mesh, flat_bundle, zero_potential, lambda p: np.maximum(p[:, 2], 0.0) ** 2)
    lower = assemble_solve(coarse_mesh, flat_bundle, zero_potential, lambda p: np.minimum(p[:, 2], 0.0) ** 2)
    points = rng.uniform(-0.25, 0.25, size=(200, 3))
    points[:, 2] = -np.abs(points[:, 2])
    mirrored = points * np.array([1.0, 1.0, -1.0])
    assert_allclose(lower.evaluate(points), upper.evaluate(mirrored), atol=0.0125)
    assert np.all(upper.nodal[coarse_mesh.crack_vertices] == 0.0)


def test_h1_distance_closed_form(coarse_mesh):
    x3 = interpolate(coarse_mesh, closed_form_field("x3"))
    zero = ScalarField(coarse_mesh, np.zeros(coarse_mesh.n_vertices))
    r = COARSE_RADIUS
    distance = h1_distance(x3, zero, r)
    l2_sq, h1_sq = distance["l2"] ** 2, distance["h1"] ** 2
    assert h1_sq - l2_sq == pytest.approx(coarse_mesh.volume, rel=1e-10)
    assert l2_sq == pytest.approx(4.0 * math.pi * r**5 / 15.0, rel=0.08)
    assert h1_sq == pytest.approx(l2_sq + 4.0 * math.pi * r**3 / 3.0, rel=0.05)

    inner = h1_distance(x3, zero, 0.25)
    assert inner["l2"] ** 2 == pytest.approx(4.0 * math.pi * 0.25**5 / 15.0, rel=0.05)
    assert inner["h1"] ** 2 == pytest.approx(4.0 * math.pi * 0.25**5 / 15.0 + 4.0 * math.pi * 0.25**3 / 3.0, rel=0.05)


@pytest.mark.slow
def test_crack_mode_error_decreases_with_h(flat_bundle, zero_potential):
    mode = closed_form_field("crack_mode")
    errors = []
    for h in (0.1, 0.05):
        mesh = mesh_slit_ball(COARSE_RADIUS, h)
        solution = assemble_solve(mesh, flat_bundle, zero_potential, mode)
        errors.append(h1_distance(solution, mode, COARSE_RADIUS)["h1"])
    assert errors[1] < errors[0]
