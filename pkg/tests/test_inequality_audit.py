import json
import math

import numpy as np
import pytest
import sympy as smp

from cracktrack.errors import DomainError, PreconditionError, RadiusTooLargeError
from cracktrack.inequality_audit import (
    all_passed,
    boundary_identity_residual,
    coercivity_audit,
    default_coercivity_constant,
    export_reports,
    fit_coercivity_constant,
    format_table,
    gamma_term,
    hardy_residual,
    pohozaev_residual,
    probe_coercivity_radius,
    random_cubic,
    rellich_necas_residual,
    rellich_necas_sweep,
    star_shaped_report,
    star_shaped_upstairs,
    xi_f,
)
from cracktrack.mesh_fem import closed_form_field
from cracktrack.straightening import PotentialSpec


@pytest.fixture(scope="module")
def quadratic_potential():
    return PotentialSpec(mode="a2", expression="x1**2 + 1")


def test_hardy_constant_field(coarse_mesh):
    report = hardy_residual(closed_form_field("one"), 0.5, mesh=coarse_mesh)
    assert report.passed
    assert report.kind == "inequality"
    assert report.lhs == pytest.approx(math.pi * 0.5, rel=0.05)
    assert report.rhs == pytest.approx(2.0 * math.pi * 0.5, rel=0.05)


def test_hardy_needs_quadrature_mesh():
    with pytest.raises(DomainError):
        hardy_residual(closed_form_field("one"), 0.5)


def test_boundary_identity_linear_field(coarse_mesh, flat_bundle, zero_potential):
    report = boundary_identity_residual(closed_form_field("x3"), flat_bundle, zero_potential, 0.25, mesh=coarse_mesh)
    assert report.kind == "identity"
    assert report.passed
    assert report.rhs == pytest.approx(4.0 * math.pi * 0.25**3 / 3.0, rel=1e-8)


def test_coercivity_without_potential(coarse_mesh, flat_bundle, zero_potential):
    report = coercivity_audit(closed_form_field("crack_mode"), flat_bundle, zero_potential, 0.5, mesh=coarse_mesh)
    assert report.passed
    assert report.context["C"] == 0.0
    assert report.lhs == pytest.approx(4.0 * report.rhs)


def test_coercivity_radius(coarse_mesh, parabola_bundle, cubic_potential):
    x3 = closed_form_field("x3")
    with pytest.raises(RadiusTooLargeError):
        coercivity_audit(x3, parabola_bundle, cubic_potential, 0.5, mesh=coarse_mesh)
    probe = probe_coercivity_radius(
        [x3, closed_form_field("crack_mode")], parabola_bundle, cubic_potential, [0.5, 0.125, 0.25], mesh=coarse_mesh
    )
    assert probe["r0"] == 0.25
    assert len(probe["reports"]) == 4
    assert all_passed(probe["reports"])


def test_coercivity_constants(coarse_mesh, flat_bundle, cubic_potential, quadratic_potential):
    assert default_coercivity_constant(cubic_potential) == 4.0
    assert default_coercivity_constant(quadratic_potential) is None
    x3 = closed_form_field("x3")
    with pytest.raises(PreconditionError):
        coercivity_audit(x3, flat_bundle, quadratic_potential, 0.25, mesh=coarse_mesh)
    constant = fit_coercivity_constant([x3], flat_bundle, quadratic_potential, [0.25, 0.5], mesh=coarse_mesh)
    assert constant == 0.0
    assert coercivity_audit(x3, flat_bundle, quadratic_potential, 0.25, mesh=coarse_mesh, constant=constant).passed


def test_xi_f(cubic_potential, zero_potential):
    assert xi_f(cubic_potential, 0.5) == pytest.approx(0.125)
    assert xi_f(zero_potential, 0.5) == 0.0
    singular = PotentialSpec(mode="a1", delta=1.0, amplitude=2.0)
    assert xi_f(singular, 0.25) == pytest.approx(2.0 * 0.25)


def test_rellich_necas_flat(flat_bundle):
    points = np.array([[0.1, 0.2, 0.3], [-0.2, 0.05, 0.1], [0.0, -0.3, -0.1]])
    report = rellich_necas_residual("x3**2", flat_bundle, points)
    assert report.passed
    assert report.lhs == pytest.approx(report.rhs)
    with pytest.raises(DomainError):
        rellich_necas_residual("x3**2", flat_bundle, np.zeros((1, 3)))
    with pytest.raises(PreconditionError):
        rellich_necas_residual("x1**4", flat_bundle, points)


def test_rellich_necas_curved(parabola_bundle, flat_bundle):
    reports = rellich_necas_sweep([flat_bundle, parabola_bundle], count=3, points=20, seed=1)
    assert len(reports) == 6
    assert all_passed(reports)


def test_random_cubic_degree():
    rng = np.random.default_rng(3)
    for _ in range(5):
        poly = random_cubic(rng)
        assert poly != 0
        assert smp.Poly(poly, *smp.symbols("x1:4")).total_degree() <= 3


def test_pohozaev_flat_linear(coarse_mesh, flat_bundle, zero_potential):
    report = pohozaev_residual(
        closed_form_field("x3"), flat_bundle, zero_potential, 0.25, mesh=coarse_mesh, expect_equality=True
    )
    assert report.kind == "identity"
    assert report.passed
    assert report.lhs == pytest.approx(4.0 * math.pi * 0.25**3 / 3.0, rel=1e-8)


def test_pohozaev_inequality_modes(coarse_mesh, flat_bundle, cubic_potential, quadratic_potential):
    mode = closed_form_field("crack_mode")
    assert pohozaev_residual(mode, flat_bundle, cubic_potential, 0.25, mesh=coarse_mesh).kind == "inequality"
    report = pohozaev_residual(mode, flat_bundle, quadratic_potential, 0.25, mode="a2_inequality", mesh=coarse_mesh)
    assert report.context["mode"] == "a2_inequality"
    with pytest.raises(PreconditionError):
        pohozaev_residual(mode, flat_bundle, cubic_potential, 0.25, mode="b1", mesh=coarse_mesh)
    with pytest.raises(PreconditionError):
        pohozaev_residual(mode, flat_bundle, cubic_potential, 0.25, mode="approx_identity", mesh=coarse_mesh)


def test_gamma_term_needs_approx_mesh(coarse_mesh, flat_bundle):
    with pytest.raises(PreconditionError):
        gamma_term(closed_form_field("x3", coarse_mesh), flat_bundle, 0.25)


def test_star_shaped(flat_bundle, parabola_bundle):
    result = star_shaped_upstairs(flat_bundle, 0.5, 64, 2.0)
    assert result["min_value"] >= 0.0
    assert result["count"] > 0
    assert star_shaped_report(parabola_bundle, 0.4, 256, 2.0).name == "star_shaped"
    with pytest.raises(DomainError):
        star_shaped_upstairs(flat_bundle, 0.5, 16, 2.0)


def test_report_output(coarse_mesh, flat_bundle, zero_potential, tmp_path):
    reports = [
        hardy_residual(closed_form_field("one"), 0.25, mesh=coarse_mesh),
        boundary_identity_residual(closed_form_field("x3"), flat_bundle, zero_potential, 0.25, mesh=coarse_mesh),
    ]
    table = format_table(reports)
    assert "hardy" in table and "boundary_identity" in table
    assert "pass" in table
    assert format_table([]) == "(no audits)"
    export_reports(reports, tmp_path / "audits.json")
    with open(tmp_path / "audits.json") as f:
        data = json.load(f)
    assert [row["name"] for row in data] == ["hardy", "boundary_identity"]
    assert data[0]["kind"] == "inequality"
