#!/usr/bin/env python
# coding: utf-8

"""
Quadrature rules used across CrackTrack.

Tetrahedral rules are stored in barycentric form (rows sum to one) with weights that sum
to one, so a rule is applied to a tet by scaling with its volume. The sphere rule is a
product rule in spherical angles with the polar axis along x1 and the azimuth measured
from the cut half plane {x2 >= 0, x3 = 0}.
"""

import numpy as np
from numpy.polynomial.legendre import leggauss

# Keast 4-point rule, degree 2
_A4 = 0.5854101966249685
_B4 = 0.1381966011250105
TET4_POINTS = np.array(
    [
        [_A4, _B4, _B4, _B4],
        [_B4, _A4, _B4, _B4],
        [_B4, _B4, _A4, _B4],
        [_B4, _B4, _B4, _A4],
    ]
)
TET4_WEIGHTS = np.full(4, 0.25)

# Keast 11-point rule, degree 4 (one negative weight)
_C11 = 1.0 / 14.0
_D11 = 11.0 / 14.0
_E11 = 0.399403576166799
_F11 = 0.100596423833201
TET11_POINTS = np.array(
    [
        [0.25, 0.25, 0.25, 0.25],
        [_D11, _C11, _C11, _C11],
        [_C11, _D11, _C11, _C11],
        [_C11, _C11, _D11, _C11],
        [_C11, _C11, _C11, _D11],
        [_E11, _E11, _F11, _F11],
        [_E11, _F11, _E11, _F11],
        [_E11, _F11, _F11, _E11],
        [_F11, _E11, _E11, _F11],
        [_F11, _E11, _F11, _E11],
        [_F11, _F11, _E11, _E11],
    ]
)
TET11_WEIGHTS = np.array(
    [-0.0789333333333333] + [0.0457333333333333] * 4 + [0.1493333333333333] * 6
)

TET_RULES = {
    "tet4": (TET4_POINTS, TET4_WEIGHTS),
    "tet11": (TET11_POINTS, TET11_WEIGHTS),
    "centroid": (np.full((1, 4), 0.25), np.ones(1)),
}

# Bey's red refinement: corners then the octahedron cut along the 02-13 diagonal.
# Indices 0-3 are the corners, 4-9 the midpoints of edges 01, 02, 03, 12, 13, 23.
_RED_CHILDREN = np.array(
    [
        [0, 4, 5, 6],
        [4, 1, 7, 8],
        [5, 7, 2, 9],
        [6, 8, 9, 3],
        [4, 5, 6, 8],
        [4, 5, 7, 8],
        [5, 6, 8, 9],
        [5, 7, 8, 9],
    ]
)
_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])


def signed_volumes(coords):
    """Signed volumes of tets given as an array of shape (T, 4, 3)."""
    edges = coords[:, 1:, :] - coords[:, :1, :]
    return np.linalg.det(edges) / 6.0


def red_refine(coords, levels=1):
    """
    Subdivide tets into 8**levels children of equal volume.

    Args:
        coords (np.ndarray): Tet vertex coordinates, shape (T, 4, 3)
        levels (int): Number of refinement levels

    Returns:
        np.ndarray: Children coordinates, shape (T * 8**levels, 4, 3), children of one
        parent stored contiguously
    """
    for _ in range(levels):
        midpoints = 0.5 * (coords[:, _EDGES[:, 0], :] + coords[:, _EDGES[:, 1], :])
        nodes = np.concatenate([coords, midpoints], axis=1)
        coords = nodes[:, _RED_CHILDREN, :].reshape(-1, 4, coords.shape[-1])
    return coords


def tet_quadrature(coords, rule="tet4"):
    """
    Map a barycentric rule onto a batch of tets.

    Args:
        coords (np.ndarray): Tet vertex coordinates, shape (T, 4, 3)
        rule (str): One of the keys of `TET_RULES`

    Returns:
        tuple: points of shape (T, Q, 3), weights of shape (T, Q) and the barycentric
        coordinates of shape (Q, 4)
    """
    bary, weights = TET_RULES[rule]
    points = np.einsum("qa,tad->tqd", bary, coords)
    volumes = np.abs(signed_volumes(coords))
    return points, volumes[:, None] * weights[None, :], bary


def sphere_rule(n_psi=64, n_phi=128):
    """
    Product rule on the unit sphere S^2.

    Gauss-Legendre in the polar angle psi (weights times sin psi) and the midpoint rule
    in the azimuth phi, offset by half a cell so that no node lies on the cut phi = 0.

    Returns:
        tuple: unit points of shape (n_psi * n_phi, 3), weights summing to 4 pi, and the
        (psi, phi) angle arrays
    """
    nodes, gauss_weights = leggauss(n_psi)
    psi = 0.5 * np.pi * (nodes + 1.0)
    w_psi = 0.5 * np.pi * gauss_weights * np.sin(psi)
    phi = (np.arange(n_phi) + 0.5) * (2.0 * np.pi / n_phi)
    w_phi = np.full(n_phi, 2.0 * np.pi / n_phi)

    psi_grid, phi_grid = np.meshgrid(psi, phi, indexing="ij")
    points = np.stack(
        [
            np.cos(psi_grid),
            np.sin(psi_grid) * np.cos(phi_grid),
            np.sin(psi_grid) * np.sin(phi_grid),
        ],
        axis=-1,
    ).reshape(-1, 3)
    weights = np.outer(w_psi, w_phi).reshape(-1)
    return points, weights, psi_grid.reshape(-1), phi_grid.reshape(-1)


def crack_angles(points):
    """Cylindrical (rho, phi) about the x1 axis, phi = atan2(x3, x2) in [0, 2 pi)."""
    rho = np.hypot(points[..., 1], points[..., 2])
    phi = np.mod(np.arctan2(points[..., 2], points[..., 1]), 2.0 * np.pi)
    return rho, phi


def geometric_grid(t_min, t_max, count):
    """Geometric grid of `count` points from t_min to t_max inclusive."""
    return np.geomspace(t_min, t_max, count)


def child_barycentrics(levels):
    """Barycentric coordinates (in the parent) of the vertices of red-refined children."""
    return red_refine(np.eye(4)[None], levels)


# Dunavant 6-point rule on triangles, degree 4
_A6 = 0.445948490915965
_B6 = 0.091576213509771
TRI6_POINTS = np.array(
    [
        [1.0 - 2.0 * _A6, _A6, _A6],
        [_A6, 1.0 - 2.0 * _A6, _A6],
        [_A6, _A6, 1.0 - 2.0 * _A6],
        [1.0 - 2.0 * _B6, _B6, _B6],
        [_B6, 1.0 - 2.0 * _B6, _B6],
        [_B6, _B6, 1.0 - 2.0 * _B6],
    ]
)
TRI6_WEIGHTS = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


def triangle_quadrature(coords):
    """
    Map the 6-point rule onto flat triangles.

    Args:
        coords (np.ndarray): Triangle vertex coordinates, shape (T, 3, 3)

    Returns:
        tuple: points (T, 6, 3), weights (T, 6) and the barycentric coordinates (6, 3)
    """
    points = np.einsum("qa,tad->tqd", TRI6_POINTS, coords)
    normals = np.cross(coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0])
    areas = 0.5 * np.linalg.norm(normals, axis=1)
    return points, areas[:, None] * TRI6_WEIGHTS[None, :], TRI6_POINTS
