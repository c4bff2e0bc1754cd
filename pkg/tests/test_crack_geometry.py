import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cracktrack.crack_geometry import (
    CrackSpec,
    as_point,
    contains_crack,
    crack_local_data,
    load_crack,
)
from cracktrack.errors import ConstructionError, DomainError


def test_flat_local_data(flat_crack):
    data = crack_local_data(flat_crack, [0.3])
    assert_allclose(data.g, 0.0)
    assert_allclose(data.grad_g, [[0.0]])
    assert_allclose(data.star_defect, 0.0)
    assert_allclose(data.normal, [[0.0, 1.0]])


def test_parabola_local_data():
    crack = CrackSpec("radial_quadratic", (0.1,), domain_radius=2.0)
    data = crack_local_data(crack, [1.0])
    assert_allclose(data.g, 0.1)
    assert_allclose(data.grad_g, [[0.2]])
    assert_allclose(data.star_defect, -0.1)
    assert_allclose(data.normal, [[-0.2 / math.sqrt(1.04), 1.0 / math.sqrt(1.04)]], atol=1e-12)
    assert_allclose(crack_local_data(crack, [0.0]).star_defect, 0.0)


def test_star_defect_sign(parabola_crack, rng):
    xp = rng.uniform(-0.5, 0.5, size=(200, 1))
    data = crack_local_data(parabola_crack, xp)
    assert_allclose(data.star_defect, -0.1 * xp[:, 0] ** 2, atol=1e-15)
    assert np.all(data.star_defect <= 0.0)


def test_normal_orthogonal_to_graph_tangents(rng):
    crack = CrackSpec("polynomial", (((2, 0), 0.3), ((1, 1), -0.2), ((0, 3), 0.5)), dim_n=3)
    xp = rng.uniform(-0.3, 0.3, size=(50, 2))
    data = crack_local_data(crack, xp)
    assert_allclose(np.linalg.norm(data.normal, axis=1), 1.0, atol=1e-12)
    for i in range(2):
        tangent = np.zeros((50, 3))
        tangent[:, i] = 1.0
        tangent[:, 2] = data.grad_g[:, i]
        assert_allclose(np.sum(tangent * data.normal, axis=1), 0.0, atol=1e-10)


def test_local_data_outside_domain(parabola_crack):
    with pytest.raises(DomainError):
        crack_local_data(parabola_crack, [0.6])


@pytest.mark.parametrize(
    "coeffs",
    [(0.0, 0.1, 0.2), (1.0, 0.0, 0.3), (0.0, 0.0, 0.0, 0.0, 0.0, 0.1)],
)
def test_invalid_profiles(coeffs):
    with pytest.raises(ConstructionError):
        CrackSpec("polynomial", coeffs)


def test_unknown_family():
    with pytest.raises(ConstructionError):
        CrackSpec("spline", (0.1,))


def test_contains_crack(flat_crack, parabola_crack):
    assert contains_crack(flat_crack, [0.0, 1.0, 0.0])
    assert not contains_crack(flat_crack, [0.0, -1.0, 0.0])
    assert not contains_crack(flat_crack, [0.0, 1.0, 1e-6])
    assert not contains_crack(parabola_crack, [1.0, 0.05, 0.0])
    assert contains_crack(parabola_crack, [1.0, 0.05, 0.0], straightened=True)


def test_contains_crack_monotone_in_height(parabola_crack, rng):
    x1 = rng.uniform(-0.5, 0.5, size=100)
    a = rng.uniform(-0.1, 0.1, size=100)
    b = a + rng.uniform(0.0, 0.1, size=100)
    lower = contains_crack(parabola_crack, np.stack([x1, a, np.zeros(100)], axis=1))
    upper = contains_crack(parabola_crack, np.stack([x1, b, np.zeros(100)], axis=1))
    assert np.all(upper[lower])


def test_json_round_trip(tmp_path):
    crack = CrackSpec("polynomial", (0.0, 0.0, 0.2, -0.1, 0.05), domain_radius=0.4)
    path = tmp_path / "crack.json"
    path.write_text(json.dumps(crack.to_dict()))
    loaded = load_crack(path)
    assert loaded == crack
    assert_allclose(loaded.g(np.array([[0.3]])), crack.g(np.array([[0.3]])))


def test_as_point():
    assert_allclose(as_point([1, 2, 3]), [1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        as_point([1.0, 2.0])
    with pytest.raises(DomainError):
        as_point([1.0, np.nan, 0.0])
