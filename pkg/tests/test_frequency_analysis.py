import dataclasses
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cracktrack.errors import (
    DomainError,
    IllConditionedFitError,
    PreconditionError,
    ResolutionError,
    TrivialFieldError,
)
from cracktrack.frequency_analysis import (
    PullbackField,
    RadialProfile,
    asymptotic_profile_error,
    beta_spread,
    blowup_convergence,
    blowup_field,
    doubling_bounds,
    doubling_check,
    downstairs_convergence,
    emit_profile,
    estimate_limit,
    fourier_coefficient,
    frequency_profile,
    height,
    height_energy,
    height_limit,
    parseval_check,
    renormalization,
    upsilon,
    upsilon_beta,
    vanishing_order,
)
from cracktrack.mesh_fem import ScalarField, closed_form_field
from cracktrack.utils.data_utils import read_table


@pytest.fixture(scope="module")
def first_cluster(coarse_spectrum):
    return [dataclasses.replace(coarse_spectrum.pairs[0], k_index=1)]


def synthetic_profile(n_values, radii=None, eps_bar=0.0):
    radii = np.geomspace(0.05, 0.4, 6) if radii is None else np.asarray(radii)
    n_values = np.asarray(n_values(radii), dtype=float)
    heights = radii.copy()
    return RadialProfile(radii, heights, n_values * heights, n_values, eps_bar)


@pytest.mark.parametrize("r", [0.1, 0.25, 0.5])
def test_height_closed_forms(flat_bundle, r):
    assert_allclose(height(closed_form_field("x3"), flat_bundle, r), 4.0 * math.pi * r**2 / 3.0, rtol=1e-10)
    assert_allclose(height(closed_form_field("crack_mode"), flat_bundle, r), math.pi**2 * r / 2.0, rtol=1e-10)


def test_frequency_of_linear_field(coarse_mesh, flat_bundle, zero_potential):
    x3 = closed_form_field("x3")
    for r in (0.25, 0.5):
        values = height_energy(x3, flat_bundle, zero_potential, r, mesh=coarse_mesh)
        assert_allclose(values["D"] / values["H"], 1.0, rtol=0.05)
    with pytest.raises(ResolutionError):
        height_energy(x3, flat_bundle, zero_potential, 0.1, mesh=coarse_mesh)
    with pytest.raises(DomainError):
        height_energy(x3, flat_bundle, zero_potential, 0.25)


def test_frequency_profile_on_mesh(coarse_mesh, flat_bundle, zero_potential):
    field = closed_form_field("x3", coarse_mesh)
    profile = frequency_profile(field, flat_bundle, zero_potential, [0.5, 0.125, 0.25])
    assert list(profile.radii) == [0.125, 0.25, 0.5]
    assert_allclose(profile.N, 1.0, rtol=0.05)
    assert profile.lower_bound == -0.25
    assert profile.lower_bound_holds
    assert profile.ell_estimate is None


def test_trivial_field(coarse_mesh, flat_bundle, zero_potential):
    zero = ScalarField(coarse_mesh, np.zeros(coarse_mesh.n_vertices))
    with pytest.raises(TrivialFieldError):
        frequency_profile(zero, flat_bundle, zero_potential, [0.25, 0.5])
    with pytest.raises(TrivialFieldError):
        vanishing_order(zero, flat_bundle, [0.125, 0.25, 0.5])


def test_estimate_limit_recovers_half_integer():
    limit = estimate_limit(synthetic_profile(lambda r: 0.5 + 0.3 * r))
    assert limit["ell"] == pytest.approx(0.5, abs=1e-10)
    assert limit["k0"] == 1
    assert limit["monotone_defect"] == 0.0


def test_estimate_limit_unmatched():
    limit = estimate_limit(synthetic_profile(lambda r: 0.7 + 0 * r))
    assert limit["ell"] == pytest.approx(0.7)
    assert limit["k0"] is None


def test_estimate_limit_preconditions():
    with pytest.raises(PreconditionError):
        estimate_limit(synthetic_profile(lambda r: 0.5 + 0 * r, radii=[0.1, 0.15, 0.2, 0.3]))
    with pytest.raises(PreconditionError):
        estimate_limit(synthetic_profile(lambda r: 0.5 + 0 * r, radii=np.linspace(0.2, 0.3, 6)))
    with pytest.raises(IllConditionedFitError):
        estimate_limit(synthetic_profile(lambda r: 0.5 + 0 * r, eps_bar=-1.0))


def test_height_limit():
    profile = synthetic_profile(lambda r: 0.5 + 0 * r)
    profile.H = 2.0 * profile.radii
    profile.k0 = 1
    result = height_limit(profile)
    assert result["ell"] == 0.5
    assert result["limit"] == pytest.approx(2.0)
    assert result["stability"] == pytest.approx(0.0, abs=1e-12)
    assert result["positive"]
    with pytest.raises(PreconditionError):
        height_limit(synthetic_profile(lambda r: 0.5 + 0 * r))


def test_doubling(coarse_mesh, flat_bundle):
    ratios = doubling_check(closed_form_field("x3"), flat_bundle, 0.125, [2.0, 4.0], mesh=coarse_mesh)
    assert_allclose(ratios, [4.0, 16.0], rtol=1e-10)
    bounds = doubling_bounds(synthetic_profile(lambda r: 1.0 + 0 * r), [2.0])
    assert_allclose(bounds, [(2.0**1.9, 2.0**2.1)])


def test_blowup_renormalization(coarse_mesh, flat_bundle):
    closed = blowup_field(closed_form_field("crack_mode"), flat_bundle, 0.25)
    assert renormalization(closed, flat_bundle, 0.25) == pytest.approx(1.0, rel=1e-10)
    nodal = blowup_field(closed_form_field("x3", coarse_mesh), flat_bundle, 0.5)
    assert nodal.mesh.radius == pytest.approx(1.0)
    assert renormalization(nodal, flat_bundle, 0.5) == pytest.approx(1.0, rel=1e-8)


def test_fourier_coefficient_homogeneity(coarse_spectrum):
    pair = coarse_spectrum.pairs[0]
    mode = closed_form_field("crack_mode")
    small = fourier_coefficient(mode, pair, coarse_spectrum.mesh, 0.1)
    large = fourier_coefficient(mode, pair, coarse_spectrum.mesh, 0.4)
    assert large / small == pytest.approx(2.0, rel=1e-12)
    assert large > 0


def test_parseval_bounds(coarse_spectrum, flat_bundle):
    mode = closed_form_field("crack_mode")
    check = parseval_check(mode, coarse_spectrum.pairs, coarse_spectrum.mesh, 0.3, flat_bundle)
    assert check["partial_sum"] <= check["norm_sq"] * (1.0 + 1e-6)
    assert check["norm_sq"] == pytest.approx(check["height_bound"], rel=0.05)


def test_upsilon_vanishes_without_perturbation(coarse_spectrum, flat_bundle, zero_potential, first_cluster):
    values = upsilon(closed_form_field("crack_mode"), flat_bundle, zero_potential, first_cluster, coarse_spectrum.mesh, 0.2)
    assert np.array_equal(values, np.zeros(1))


def test_upsilon_beta_flat(coarse_spectrum, flat_bundle, zero_potential, first_cluster):
    mode = closed_form_field("crack_mode")
    tables = [
        upsilon_beta(mode, flat_bundle, zero_potential, first_cluster, coarse_spectrum.mesh, [0.1, R / 2], R)
        for R in (0.2, 0.4)
    ]
    assert beta_spread(tables) < 1e-10
    assert tables[0].ell == 0.5
    assert tables[0].beta[0] == pytest.approx(math.pi / math.sqrt(2.0), rel=0.05)
    assert list(tables[0].to_frame().columns) == ["lambda", "k", "m", "phi", "upsilon"]
    with pytest.raises(PreconditionError):
        upsilon_beta(mode, flat_bundle, zero_potential, first_cluster, coarse_spectrum.mesh, [0.5], 0.4)
    with pytest.raises(PreconditionError):
        upsilon_beta(mode, flat_bundle, zero_potential, coarse_spectrum.pairs[:3], coarse_spectrum.mesh, [0.1], 0.4)


def test_blowup_convergence(coarse_mesh, coarse_spectrum, flat_bundle, first_cluster):
    mode = closed_form_field("crack_mode")
    rows = blowup_convergence(mode, flat_bundle, [0.5], first_cluster, coarse_spectrum.mesh, 1, mesh=coarse_mesh)
    assert rows[0]["lambda"] == 0.5
    assert rows[0]["h1"] < 0.5
    assert len(rows[0]["coefficients"]) == 1
    with pytest.raises(PreconditionError):
        blowup_convergence(mode, flat_bundle, [0.5], first_cluster, coarse_spectrum.mesh, None, mesh=coarse_mesh)


def test_pullback_field(parabola_bundle):
    base = closed_form_field("x1_crack_mode")
    pulled = PullbackField(base, parabola_bundle)
    x = np.array([[0.1, -0.2, 0.15], [-0.05, 0.1, -0.12]])
    y = parabola_bundle.forward(x)
    assert_allclose(pulled.evaluate(y), base.evaluate(x), rtol=1e-12)
    _, grads = pulled.sample(y)
    step = 1e-6
    for d in range(3):
        shift = np.zeros(3)
        shift[d] = step
        fd = (pulled.evaluate(y + shift) - pulled.evaluate(y - shift)) / (2.0 * step)
        assert_allclose(grads[:, d], fd, atol=1e-6)


def test_asymptotic_profile_flat(coarse_mesh, coarse_spectrum, flat_bundle, zero_potential, first_cluster):
    mode = closed_form_field("crack_mode")
    table = upsilon_beta(mode, flat_bundle, zero_potential, first_cluster, coarse_spectrum.mesh, [0.1, 0.2], 0.4)
    upstairs = asymptotic_profile_error(mode, table, first_cluster, coarse_spectrum.mesh, [0.5, 0.25], mesh=coarse_mesh)
    downstairs = downstairs_convergence(
        mode, flat_bundle, table, first_cluster, coarse_spectrum.mesh, [0.5, 0.25], mesh=coarse_mesh
    )
    assert len(upstairs) == 2
    assert_allclose(downstairs, upstairs, rtol=1e-12)
    assert max(upstairs) < 0.5


@pytest.mark.parametrize("name, order", [("x3", 1.0), ("crack_mode", 0.5), ("x1_crack_mode", 1.5)])
def test_vanishing_order(coarse_mesh, flat_bundle, name, order):
    slope = vanishing_order(closed_form_field(name), flat_bundle, [0.5, 0.25, 0.125], mesh=coarse_mesh)
    assert slope == pytest.approx(order, abs=1e-8)


def test_emit_profile(tmp_path):
    profile = synthetic_profile(lambda r: 0.5 + 0.3 * r)
    emit_profile(profile, tmp_path / "profile.csv", tmp_path / "profile.json")
    table = read_table(tmp_path / "profile.csv")
    assert list(table.columns) == ["r", "H", "D", "N"]
    assert_allclose(table["N"], profile.N)
    empty = RadialProfile(np.array([]), np.array([]), np.array([]), np.array([]), 0.0)
    with pytest.raises(DomainError):
        emit_profile(empty, tmp_path / "empty.csv")
