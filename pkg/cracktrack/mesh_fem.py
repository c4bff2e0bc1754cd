#!/usr/bin/env python
# coding: utf-8

"""
Tetrahedral meshes, P1 fields and the Galerkin solver for -div(A grad U) = f~ U.

Two domains are meshed:

* the slit ball B_r with the flat slit {x2 >= 0, x3 = 0} resolved by mesh faces, built
  from a tensor grid graded toward the origin on every axis, split into Kuhn tets and
  mapped radially onto the ball;
* the approximating domain B_{r,n} = B_r cap {x2 < f~_n(x3)}, cut from the slit ball
  mesh by marching tets along the level set x2 - f~_n(|x3|) = 0.

Vertices on the slit (or on the cut surface gamma) carry homogeneous Dirichlet data;
vertices on the outer sphere carry the configured boundary data.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from itertools import permutations

import numpy as np
from more_itertools import chunked
from scipy import sparse

from cracktrack.errors import (
    ConstructionError,
    DomainError,
    MeshingError,
    PreconditionError,
    ResolutionError,
)
from cracktrack.straightening import transform_potential
from cracktrack.utils.data_utils import FLOAT_FORMAT, array_checksum
from cracktrack.utils.locate_utils import TetLocator
from cracktrack.utils.quadrature_utils import (
    child_barycentrics,
    crack_angles,
    red_refine,
    signed_volumes,
    sphere_rule,
    tet_quadrature,
)
from cracktrack.utils.solver_utils import pcg

DEFAULT_GRADING = 0.5
DEFAULT_LEVELS = 3
# hex edge per unit h; the radial map stretches by at most 2/sqrt(3), so edges stay <= 1.5 h
CELL_FACTOR = 0.75
PLANE_TOLERANCE = 1e-12
SURFACE_TOLERANCE = 1e-10
VOLUME_FLOOR = 1e-12
BISECTION_STEPS = 60
ORIGIN_LEVELS = 3
CLIP_LEVELS = 2
ASSEMBLY_CHUNK = 20000

# faces opposite vertex 0..3, outward for positively oriented tets
_FACE_INDEX = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])

_TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

# rotations bringing each prism vertex to position 0
_PRISM_ROTATIONS = np.array(
    [
        [0, 1, 2, 3, 4, 5],
        [1, 2, 0, 4, 5, 3],
        [2, 0, 1, 5, 3, 4],
        [3, 5, 4, 0, 2, 1],
        [4, 3, 5, 1, 0, 2],
        [5, 4, 3, 2, 1, 0],
    ]
)


def graded_local_size(radius, r, h, grading=DEFAULT_GRADING, levels=DEFAULT_LEVELS):
    """
    Nominal mesh size at distance `radius` from the origin.

    The shell r/2^(k+1) <= |x| <= r/2^k is meshed with size h * grading^k and everything
    inside r/2^levels with h * grading^levels.
    """
    if radius <= 0:
        return h * grading**levels
    shell = math.floor(math.log2(r / radius) + 1e-9)
    return h * grading ** min(levels, max(0, shell))


def _graded_axis(r, h, grading, levels):
    """Symmetric node coordinates on [-r, r], graded toward 0."""
    size = CELL_FACTOR * h
    breaks = [r / 2.0**k for k in range(levels + 1)] + [0.0]
    pieces = []
    for k in range(levels + 1):
        hi, lo = breaks[k], breaks[k + 1]
        count = max(1, math.ceil((hi - lo) / (size * grading**k) - 1e-9))
        pieces.append(np.linspace(lo, hi, count + 1))
    positive = np.unique(np.concatenate(pieces))
    return np.concatenate([-positive[:0:-1], positive])


def _kuhn_tets(ids):
    """Six tets per hex of a structured grid of vertex ids, conforming across hexes."""
    n = ids.shape[0] - 1

    def corner(step):
        dx, dy, dz = step
        return ids[dx : dx + n, dy : dy + n, dz : dz + n].reshape(-1)

    tets = []
    for perm in permutations(range(3)):
        step = [0, 0, 0]
        path = [corner(step)]
        for axis in perm:
            step[axis] = 1
            path.append(corner(step))
        tets.append(np.stack(path, axis=1))
    return np.concatenate(tets)


def _cube_to_ball(points):
    inf = np.max(np.abs(points), axis=1)
    two = np.linalg.norm(points, axis=1)
    scale = np.divide(inf, two, out=np.zeros_like(inf), where=two > 0)
    return points * scale[:, None]


def _orient(vertices, tets):
    tets = tets.copy()
    negative = signed_volumes(vertices[tets]) < 0
    tets[negative, 2], tets[negative, 3] = tets[negative, 3], tets[negative, 2].copy()
    return tets


def _face_table(tets, n_vertices):
    """
    All tet faces with a key shared by the two tets of an interior face.

    Returns:
        tuple: oriented faces (4T, 3), owning tet (4T,), boundary mask (4T,), keys (4T,)
    """
    faces = tets[:, _FACE_INDEX].reshape(-1, 3)
    ordered = np.sort(faces, axis=1).astype(np.int64)
    keys = (ordered[:, 0] * n_vertices + ordered[:, 1]) * n_vertices + ordered[:, 2]
    _, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    owner = np.repeat(np.arange(len(tets)), 4)
    return faces, owner, counts[inverse] == 1, keys


class TetMesh:
    """
    A conforming tetrahedral mesh with marked crack (or gamma) and sphere faces.

    Attributes:
        vertices (np.ndarray): (V, 3) coordinates
        tets (np.ndarray): (T, 4) positively oriented vertex indices
        crack_faces (np.ndarray): (F, 3) faces carrying U = 0 (the slit, or gamma)
        crack_face_cells (np.ndarray): owning tet of each crack face (approximating domains)
        sphere_faces (np.ndarray): (S, 3) faces on the outer sphere
        mesh_size (float): nominal size h
        radius (float): outer radius r
        kind (str): "slit_ball" or "approx_domain"
        params (dict): grading, levels and, for approximating domains, n and alpha
    """

    def __init__(
        self,
        vertices,
        tets,
        crack_faces,
        sphere_faces,
        mesh_size,
        radius,
        kind="slit_ball",
        params=None,
        crack_face_cells=None,
    ):
        self.vertices = vertices
        self.tets = tets
        self.crack_faces = crack_faces
        self.crack_face_cells = crack_face_cells
        self.sphere_faces = sphere_faces
        self.mesh_size = mesh_size
        self.radius = radius
        self.kind = kind
        self.params = {"grading": DEFAULT_GRADING, "levels": DEFAULT_LEVELS, **(params or {})}
        self._scaled = {}

    def __repr__(self):
        return (
            f"TetMesh(kind={self.kind}, r={self.radius:.4g}, h={self.mesh_size:.4g}, "
            f"vertices={len(self.vertices)}, tets={len(self.tets)})"
        )

    @property
    def n_vertices(self):
        return len(self.vertices)

    @cached_property
    def volumes(self):
        return signed_volumes(self.vertices[self.tets])

    @property
    def volume(self):
        return float(self.volumes.sum())

    @cached_property
    def crack_vertices(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.crack_faces.reshape(-1)] = True
        return mask

    @cached_property
    def sphere_vertices(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.sphere_faces.reshape(-1)] = True
        return mask

    @property
    def fixed_vertices(self):
        return self.crack_vertices | self.sphere_vertices

    @cached_property
    def basis_gradients(self):
        """Gradients of the four P1 basis functions on each tet, shape (T, 4, 3)."""
        coords = self.vertices[self.tets]
        edges = coords[:, 1:, :] - coords[:, :1, :]
        inv = np.linalg.inv(edges)
        rest = np.transpose(inv, (0, 2, 1))
        first = -rest.sum(axis=1, keepdims=True)
        return np.concatenate([first, rest], axis=1)

    @cached_property
    def locator(self):
        return TetLocator(self.vertices, self.tets)

    @cached_property
    def checksum(self):
        return array_checksum(self.vertices)

    @property
    def max_edge(self):
        coords = self.vertices[self.tets]
        return float(max(np.linalg.norm(coords[:, i] - coords[:, j], axis=1).max() for i, j in _TET_EDGES))

    def local_size(self, radius):
        return graded_local_size(
            radius, self.radius, self.mesh_size, self.params["grading"], self.params["levels"]
        )

    def require_resolved(self, radius):
        """
        Raises:
            ResolutionError: If radius < 4 h_local(radius) or radius exceeds the mesh
        """
        if radius > self.radius * (1.0 + 1e-10):
            raise ResolutionError(f"Radius {radius:.4g} exceeds the mesh radius {self.radius:.4g}")
        if radius < 4.0 * self.local_size(radius):
            raise ResolutionError(
                f"Radius {radius:.4g} below 4 h_local = {4.0 * self.local_size(radius):.4g}"
            )

    def scaled(self, factor):
        """The same mesh with coordinates multiplied by `factor` (cached per factor)."""
        if factor not in self._scaled:
            self._scaled[factor] = TetMesh(
                self.vertices * factor,
                self.tets,
                self.crack_faces,
                self.sphere_faces,
                self.mesh_size * factor,
                self.radius * factor,
                kind=self.kind,
                params=self.params,
                crack_face_cells=self.crack_face_cells,
            )
        return self._scaled[factor]

    def export(self, path):
        """ASCII export: header with checksum, then vertices, tets and each face list."""
        with open(path, "w") as f:
            f.write(f"# cracktrack-mesh fnv1a={self.checksum} kind={self.kind}\n")
            f.write(f"vertices {self.n_vertices}\n")
            np.savetxt(f, self.vertices, fmt=FLOAT_FORMAT)
            for name, rows in (
                ("tets", self.tets),
                ("gamma_faces" if self.kind == "approx_domain" else "crack_faces", self.crack_faces),
                ("sphere_faces", self.sphere_faces),
            ):
                f.write(f"{name} {len(rows)}\n")
                np.savetxt(f, rows, fmt="%d")
        logging.info(f"Mesh exported to {path}")


def mesh_slit_ball(r, h, grading=DEFAULT_GRADING, levels=DEFAULT_LEVELS):
    """
    Mesh the slit ball B_r.

    Args:
        r (float): Ball radius
        h (float): Nominal mesh size away from the origin
        grading (float): Size ratio between consecutive shells
        levels (int): Number of graded shells

    Returns:
        TetMesh: Mesh whose crack faces tile the slit and whose sphere faces tile dB_r

    Raises:
        MeshingError: Unless 0 < h <= r/4
    """
    if not 0.0 < h <= r / 4.0:
        raise MeshingError(f"Mesh size must satisfy 0 < h <= r/4, got h={h}, r={r}")

    axis = _graded_axis(r, h, grading, levels) / r
    n = len(axis)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    tets = _kuhn_tets(np.arange(n**3).reshape(n, n, n))
    vertices = r * _cube_to_ball(grid)
    tets = _orient(vertices, tets)

    volumes = np.abs(signed_volumes(vertices[tets]))
    if volumes.min() < VOLUME_FLOOR * h**3:
        raise MeshingError(f"Degenerate tet of volume {volumes.min():.3g}")

    faces, _, boundary, keys = _face_table(tets, len(vertices))
    sphere_faces = faces[boundary]

    on_slit = (np.abs(vertices[:, 2]) <= PLANE_TOLERANCE * r) & (vertices[:, 1] >= -PLANE_TOLERANCE * r)
    candidate = on_slit[faces].all(axis=1)
    _, first = np.unique(keys[candidate], return_index=True)
    crack_faces = faces[candidate][np.sort(first)]

    mesh = TetMesh(
        vertices,
        tets,
        crack_faces,
        sphere_faces,
        h,
        r,
        kind="slit_ball",
        params={"grading": grading, "levels": levels},
    )
    logging.info(f"Meshed slit ball: {mesh}")
    return mesh


# -- approximating domains ---------------------------------------------------------


def _psi(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    positive = s > 0
    out[positive] = np.exp(-1.0 / s[positive])
    return out


def _dpsi(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    positive = s > 0
    out[positive] = np.exp(-1.0 / s[positive]) / s[positive] ** 2
    return out


def transition(t):
    """Smooth step eta = 1 on t <= 1/2, 0 on t >= 1, and its derivative."""
    t = np.asarray(t, dtype=float)
    a, b = _psi(1.0 - t), _psi(t - 0.5)
    da, db = -_dpsi(1.0 - t), _dpsi(t - 0.5)
    total = a + b
    return a / total, (da * b - a * db) / total**2


@dataclass(frozen=True)
class ProfileValue:
    """f_n(t), f_n'(t) and f_n(t) - alpha t f_n'(t)."""

    value: object
    derivative: object
    property_residual: object


def approx_profile(n, alpha, t):
    """
    The profile f_n(t) = f(nt) n^{-1/(2 alpha)} with f = eta + (1 - eta) t^{1/alpha}.

    Args:
        n (int): Approximation index
        alpha (float): Profile exponent, alpha > 1
        t (float | np.ndarray): Nonnegative abscissae

    Returns:
        ProfileValue: Floats for scalar t, arrays otherwise

    Raises:
        DomainError: For negative t
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise DomainError("The approximation profile is defined for t >= 0")

    scale = n ** (-1.0 / (2.0 * alpha))
    s = n * t
    eta, deta = transition(s)
    power = s ** (1.0 / alpha)
    safe = np.where(s > 0, s, 1.0)
    slope = np.where(eta < 1.0, (1.0 - eta) * safe ** (1.0 / alpha - 1.0) / alpha, 0.0)

    value = (eta + (1.0 - eta) * power) * scale
    derivative = (deta * (1.0 - power) + slope) * n * scale
    # f - alpha s f' reduces to eta - alpha s eta' (1 - s^{1/alpha}) >= 0
    residual = (eta - alpha * s * deta * (1.0 - power)) * scale
    if scalar:
        return ProfileValue(float(value[0]), float(derivative[0]), float(residual[0]))
    return ProfileValue(value, derivative, residual)


def approx_level(points, n, alpha):
    """Signed level x2 - f~_n(x3), negative inside B_{r,n}."""
    points = np.atleast_2d(points)
    return points[:, 1] - approx_profile(n, alpha, np.abs(points[:, 2])).value


def _split_prisms(prisms):
    """Split prisms (bottom 0-1-2, top 3-4-5) into 3 tets, diagonals through the minimum id."""
    start = np.argmin(prisms, axis=1)
    v = np.take_along_axis(prisms, _PRISM_ROTATIONS[start], axis=1)
    first = np.minimum(v[:, 1], v[:, 5]) < np.minimum(v[:, 2], v[:, 4])
    a = np.stack([v[:, [0, 1, 2, 5]], v[:, [0, 1, 5, 4]], v[:, [0, 4, 5, 3]]], axis=1)
    b = np.stack([v[:, [0, 1, 2, 4]], v[:, [0, 4, 2, 5]], v[:, [0, 4, 5, 3]]], axis=1)
    return np.where(first[:, None, None], a, b).reshape(-1, 4)


def _cut_mesh(vertices, tets, level):
    """
    Keep the part {level <= 0} of a tet mesh.

    Cut points lie on the inside end of a bisection bracket, so |level| there is at
    machine precision times the edge length.
    """
    phi = level(vertices)
    inside = phi <= 0.0
    count = inside[tets].sum(axis=1)
    kept = tets[count == 4]
    crossing = (count > 0) & (count < 4)
    cut, k = tets[crossing], count[crossing]
    order = np.argsort(~inside[cut], axis=1, kind="stable")
    cut = np.take_along_axis(cut, order, axis=1)

    n_vertices = len(vertices)
    pairs = []
    for i in range(3):
        for j in range(1, 4):
            mask = (i < k) & (j >= k)
            pairs.append(cut[mask][:, [i, j]])
    pairs = np.concatenate(pairs)
    keys = np.unique(pairs[:, 0].astype(np.int64) * n_vertices + pairs[:, 1])
    start, end = keys // n_vertices, keys % n_vertices

    a, b = vertices[start], vertices[end]
    lo, hi = np.zeros(len(keys)), np.ones(len(keys))
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        in_mid = level(a + mid[:, None] * (b - a)) <= 0.0
        lo = np.where(in_mid, mid, lo)
        hi = np.where(in_mid, hi, mid)
    points = a + lo[:, None] * (b - a)
    reuse = phi[start] == 0.0
    ids = np.where(reuse, start, n_vertices + np.cumsum(~reuse) - 1)
    vertices = np.concatenate([vertices, points[~reuse]])

    def cut_id(p, q):
        return ids[np.searchsorted(keys, p.astype(np.int64) * n_vertices + q)]

    pieces = [kept]
    one = cut[k == 1]
    if len(one):
        a0, b0, c0, d0 = one.T
        pieces.append(np.stack([a0, cut_id(a0, b0), cut_id(a0, c0), cut_id(a0, d0)], axis=1))
    two = cut[k == 2]
    if len(two):
        a0, b0, c0, d0 = two.T
        prisms = np.stack(
            [a0, cut_id(a0, c0), cut_id(a0, d0), b0, cut_id(b0, c0), cut_id(b0, d0)], axis=1
        )
        pieces.append(_split_prisms(prisms))
    three = cut[k == 3]
    if len(three):
        a0, b0, c0, d0 = three.T
        prisms = np.stack([a0, b0, c0, cut_id(a0, d0), cut_id(b0, d0), cut_id(c0, d0)], axis=1)
        pieces.append(_split_prisms(prisms))
    return vertices, np.concatenate(pieces)


def mesh_approx_domain(r, n, alpha, h, grading=DEFAULT_GRADING, levels=DEFAULT_LEVELS):
    """
    Mesh B_{r,n}: the slit ball mesh cut along x2 = f~_n(x3).

    Returns:
        TetMesh: kind "approx_domain"; its crack faces are the faces on gamma_{r,n}

    Raises:
        PreconditionError: Unless n^{1/(2 alpha)} > 1/r
    """
    if not n ** (1.0 / (2.0 * alpha)) > 1.0 / r:
        raise PreconditionError(
            f"Approximating domains need n^(1/(2 alpha)) > 1/r, got n={n}, alpha={alpha}, r={r}"
        )
    if h > 1.0 / (4.0 * n):
        logging.warning(
            f"h = {h:.3g} exceeds 1/(4n) = {1.0 / (4.0 * n):.3g}: the smoothing zone of f_{n} "
            "is under-resolved"
        )

    base = mesh_slit_ball(r, h, grading, levels)

    def level(points):
        return approx_level(points, n, alpha)

    vertices, tets = _cut_mesh(base.vertices, base.tets, level)
    tets = _orient(vertices, tets)
    volumes = np.abs(signed_volumes(vertices[tets]))
    degenerate = volumes < VOLUME_FLOOR * h**3
    if degenerate.any():
        logging.debug(f"Dropped {int(degenerate.sum())} degenerate tets after cutting")
        tets = tets[~degenerate]
    used = np.unique(tets)
    remap = np.full(len(vertices), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    vertices, tets = vertices[used], remap[tets]

    faces, owner, boundary, _ = _face_table(tets, len(vertices))
    on_surface = np.abs(level(vertices)) <= SURFACE_TOLERANCE
    gamma = boundary & on_surface[faces].all(axis=1)
    sphere = boundary & ~gamma

    mesh = TetMesh(
        vertices,
        tets,
        faces[gamma],
        faces[sphere],
        h,
        r,
        kind="approx_domain",
        params={"grading": grading, "levels": levels, "n": int(n), "alpha": float(alpha)},
        crack_face_cells=owner[gamma],
    )
    logging.info(f"Meshed approximating domain n={n}: {mesh}, gamma faces={len(mesh.crack_faces)}")
    return mesh


# -- fields -------------------------------------------------------------------------


class ScalarField:
    """
    A P1 function on a TetMesh.

    Attributes:
        mesh (TetMesh): The mesh
        nodal (np.ndarray): (V,) nodal values
        dirichlet_mask (np.ndarray): (V,) vertices where the value is pinned to zero
        info (dict): Solver diagnostics, when the field comes from `assemble_solve`
    """

    def __init__(self, mesh, nodal, dirichlet_mask=None, info=None):
        self.mesh = mesh
        self.nodal = np.asarray(nodal, dtype=float)
        if dirichlet_mask is None:
            dirichlet_mask = np.zeros(mesh.n_vertices, dtype=bool)
        self.dirichlet_mask = dirichlet_mask
        self.info = info or {}

    @cached_property
    def element_gradients(self):
        return np.einsum("ta,tad->td", self.nodal[self.mesh.tets], self.mesh.basis_gradients)

    @property
    def is_trivial(self):
        return self.nodal.size == 0 or float(np.max(np.abs(self.nodal))) <= 1e-14

    def local(self, cells, bary):
        """Values and gradients at points given by tet index and barycentrics."""
        values = np.einsum("pa,pa->p", bary, self.nodal[self.mesh.tets[cells]])
        return values, self.element_gradients[cells]

    def sample(self, points, outside="extrapolate"):
        """Values and gradients at arbitrary points; see `TetLocator.locate` for `outside`."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        cells, bary, inside = self.mesh.locator.locate(points, outside=outside)
        values, gradients = self.local(cells, bary)
        if outside == "zero":
            values = np.where(inside, values, 0.0)
            gradients = np.where(inside[:, None], gradients, 0.0)
        return values, gradients

    def evaluate(self, points, outside="extrapolate"):
        return self.sample(points, outside)[0]

    def gradient(self, points, outside="extrapolate"):
        return self.sample(points, outside)[1]

    def scaled(self, factor, value_scale=1.0):
        """x -> value_scale * U(x / factor), on the mesh scaled by `factor`."""
        return ScalarField(
            self.mesh.scaled(factor),
            self.nodal * value_scale,
            self.dirichlet_mask,
            info=dict(self.info),
        )

    def export(self, path):
        with open(path, "w") as f:
            f.write(f"# cracktrack-field mesh={self.mesh.checksum}\n")
            np.savetxt(f, self.nodal, fmt=FLOAT_FORMAT)


@dataclass(frozen=True)
class ClosedFormField:
    """An analytic field with its gradient, sampled pointwise."""

    name: str
    value: object
    grad: object

    def sample(self, points, outside=None):
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return self.value(points), self.grad(points)

    def evaluate(self, points, outside=None):
        return self.value(np.asarray(points, dtype=float).reshape(-1, 3))

    def gradient(self, points, outside=None):
        return self.grad(np.asarray(points, dtype=float).reshape(-1, 3))


def _crack_power(j):
    """rho^{j/2} sin(j phi / 2), which vanishes on the slit and is harmonic."""
    a = 0.5 * j

    def value(p):
        rho, phi = crack_angles(p)
        return rho**a * np.sin(a * phi)

    def grad(p):
        rho, phi = crack_angles(p)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = a * rho ** (a - 1.0)
        out = np.zeros_like(p)
        out[:, 1] = scale * np.sin((a - 1.0) * phi)
        out[:, 2] = scale * np.cos((a - 1.0) * phi)
        return out

    return value, grad


def closed_form_field(name, mesh=None):
    """
    Analytic fields: "one", "x3", "crack_mode", "crack_mode_<j>" and "x1_crack_mode".

    Args:
        name (str): Field name
        mesh (TetMesh, optional): If given, return the P1 interpolant on this mesh

    Returns:
        ClosedFormField | ScalarField

    Raises:
        ConstructionError: For unknown names
    """
    if name == "one":
        field = ClosedFormField(name, lambda p: np.ones(len(p)), lambda p: np.zeros_like(p))
    elif name == "x3":
        field = ClosedFormField(name, lambda p: p[:, 2].copy(), lambda p: np.tile([0.0, 0.0, 1.0], (len(p), 1)))
    elif name == "crack_mode" or name.startswith("crack_mode_"):
        suffix = name[len("crack_mode_") :] if name != "crack_mode" else "1"
        if not suffix.isdigit() or int(suffix) < 1:
            raise ConstructionError(f"Unknown closed-form field '{name}'")
        field = ClosedFormField(name, *_crack_power(int(suffix)))
    elif name == "x1_crack_mode":
        value, grad = _crack_power(1)

        def product_grad(p):
            out = p[:, :1] * grad(p)
            out[:, 0] = value(p)
            return out

        field = ClosedFormField(name, lambda p: p[:, 0] * value(p), product_grad)
    else:
        raise ConstructionError(f"Unknown closed-form field '{name}'")
    return field if mesh is None else interpolate(mesh, field)


def interpolate(mesh, field):
    """P1 interpolant; the crack is marked Dirichlet when the field vanishes there."""
    nodal = np.asarray(field.evaluate(mesh.vertices), dtype=float)
    crack = mesh.crack_vertices
    vanishes = not crack.any() or float(np.max(np.abs(nodal[crack]))) <= 1e-12
    return ScalarField(mesh, nodal, crack.copy() if vanishes else None)


@dataclass(frozen=True)
class BoundaryData:
    """
    Weighted sum of closed-form fields used as Dirichlet data on the outer sphere.

    With `straightened` the sum is read as a trace of the original variables and pulled
    back through the shear: G(x) = sum_i w_i u_i(F(x)).
    """

    terms: tuple
    straightened: bool = False
    bundle: object = None

    @classmethod
    def from_dict(cls, data, bundle=None):
        terms = tuple((str(t["field"]), float(t.get("weight", 1.0))) for t in data["terms"])
        for name, _ in terms:
            closed_form_field(name)
        straightened = bool(data.get("straightened", False))
        if straightened and bundle is None:
            raise ConstructionError("Straightened boundary data needs a coefficient bundle")
        return cls(terms, straightened, bundle)

    def evaluate(self, points):
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        if self.straightened:
            points = self.bundle.forward(points)
        out = np.zeros(len(points))
        for name, weight in self.terms:
            out += weight * closed_form_field(name).evaluate(points)
        return out


@dataclass(frozen=True)
class CutoffBoundaryData:
    """G_n = G (1 - eta(d / (4 f_n(0)))), d = f~_n(x3) - x2; vanishes near gamma_{r,n}."""

    target: object
    n: int
    alpha: float

    def evaluate(self, points):
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        distance = -approx_level(points, self.n, self.alpha)
        width = 4.0 * approx_profile(self.n, self.alpha, 0.0).value
        eta, _ = transition(distance / width)
        return self.target.evaluate(points) * (1.0 - eta)


def cutoff_boundary_data(target, n, alpha):
    return CutoffBoundaryData(target, int(n), float(alpha))


# -- quadrature over balls ----------------------------------------------------------


@dataclass
class BallQuadrature:
    """Quadrature points of B_rho cap mesh with their tets and barycentrics."""

    mesh: TetMesh
    radius: float
    points: np.ndarray
    weights: np.ndarray
    cells: np.ndarray
    bary: np.ndarray

    def sample(self, u, outside="extrapolate"):
        """Values and gradients of u at the points; element-local when u lives on the mesh."""
        if isinstance(u, ScalarField) and u.mesh is self.mesh:
            return u.local(self.cells, self.bary)
        return u.sample(self.points, outside=outside)

    def integrate(self, values):
        return float(np.sum(self.weights * values))


def _rule_points(coords, cells, rule, parent_bary=None):
    points, weights, bary = tet_quadrature(coords, rule)
    q = weights.shape[1]
    if parent_bary is None:
        point_bary = np.broadcast_to(bary, (len(coords), q, 4))
    else:
        point_bary = np.einsum("qc,kcd->kqd", bary, parent_bary)
        point_bary = np.tile(point_bary, (len(coords) // len(parent_bary), 1, 1))
    return (
        points.reshape(-1, 3),
        weights.reshape(-1),
        np.repeat(cells, q),
        point_bary.reshape(-1, 4),
    )


def ball_quadrature(mesh, radius, rule="tet4", singular=False):
    """
    Quadrature for integrals over B_radius cap mesh.

    Tets inside the ball use `rule`; tets straddling the sphere are red-refined twice and
    each child contributes its centroid with weight volume * clip(1/2 + (radius - |c|)/s, 0, 1),
    s the child diameter. With `singular`, tets touching the origin are refined three
    levels first.
    """
    key = (float(radius), rule, bool(singular))
    cache = mesh.__dict__.setdefault("_ball_cache", {})
    if key in cache:
        return cache[key]

    coords = mesh.vertices[mesh.tets]
    norms = np.linalg.norm(coords, axis=2)
    centroid = coords.mean(axis=1)
    spread = np.linalg.norm(coords - centroid[:, None, :], axis=2).max(axis=1)
    inside = norms.max(axis=1) <= radius * (1.0 + 1e-12)
    outside = np.linalg.norm(centroid, axis=1) - spread >= radius
    straddle = ~inside & ~outside

    parts = []
    touching = inside & (norms.min(axis=1) <= 1e-14) if singular else np.zeros_like(inside)
    regular = np.flatnonzero(inside & ~touching)
    parts.append(_rule_points(coords[regular], regular, rule))
    if touching.any():
        cells = np.flatnonzero(touching)
        children = red_refine(coords[cells], ORIGIN_LEVELS)
        parts.append(
            _rule_points(children, np.repeat(cells, 8**ORIGIN_LEVELS), rule, child_barycentrics(ORIGIN_LEVELS))
        )
    if straddle.any():
        cells = np.flatnonzero(straddle)
        children = red_refine(coords[cells], CLIP_LEVELS)
        points, weights, child_cells, bary = _rule_points(
            children, np.repeat(cells, 8**CLIP_LEVELS), "centroid", child_barycentrics(CLIP_LEVELS)
        )
        size = np.max(
            [np.linalg.norm(children[:, i] - children[:, j], axis=1) for i, j in _TET_EDGES],
            axis=0,
        )
        weights = weights * np.clip(0.5 + (radius - np.linalg.norm(points, axis=1)) / size, 0.0, 1.0)
        keep = weights > 0
        parts.append((points[keep], weights[keep], child_cells[keep], bary[keep]))

    quad = BallQuadrature(mesh, float(radius), *(np.concatenate(column) for column in zip(*parts)))
    cache[key] = quad
    return quad


def sphere_points(radius, n_psi=64, n_phi=128):
    """Points and weights of the product rule on dB_radius (weights scale as radius^2)."""
    unit, weights, _, _ = sphere_rule(n_psi, n_phi)
    return radius * unit, radius**2 * weights, unit


# -- assembly and solve -------------------------------------------------------------


def _potential_mass(coords, bundle, f, rule, origin_mask):
    """Element matrices of int f~ phi_a phi_b."""
    points, weights, bary = tet_quadrature(coords, rule)
    values = transform_potential(bundle, f, points.reshape(-1, 3)).reshape(weights.shape)
    mass = np.einsum("tq,qa,qb->tab", weights * values, bary, bary)
    if origin_mask.any():
        levels = ORIGIN_LEVELS
        count = 8**levels
        children = red_refine(coords[origin_mask], levels)
        c_points, c_weights, c_bary = tet_quadrature(children, rule)
        c_values = transform_potential(bundle, f, c_points.reshape(-1, 3)).reshape(c_weights.shape)
        parent = np.einsum("qc,kcd->kqd", c_bary, child_barycentrics(levels))
        weighted = (c_weights * c_values).reshape(int(origin_mask.sum()), count, -1)
        mass[origin_mask] = np.einsum("mkq,kqa,kqb->mab", weighted, parent, parent)
    return mass


def _element_matrices(mesh, bundle, f, cells):
    tets = mesh.tets[cells]
    coords = mesh.vertices[tets]
    grads = mesh.basis_gradients[cells]
    if bundle is None:
        a_int = np.abs(mesh.volumes[cells])[:, None, None] * np.eye(3)
    else:
        points, weights, _ = tet_quadrature(coords, "tet4")
        a = bundle.matrix(points.reshape(-1, 3)).reshape(len(cells), -1, 3, 3)
        a_int = np.einsum("tq,tqij->tij", weights, a)
    local = np.einsum("taj,tjk,tbk->tab", grads, a_int, grads)
    if f is not None and not f.is_zero:
        rule = "tet11" if f.mode == "a1" else "tet4"
        origin = np.linalg.norm(coords, axis=2).min(axis=1) <= 1e-14
        local -= _potential_mass(coords, bundle, f, rule, origin)
    rows = np.repeat(tets, 4, axis=1).reshape(-1)
    cols = np.tile(tets, (1, 4)).reshape(-1)
    return rows, cols, local.reshape(-1)


def bilinear_form(mesh, bundle=None, f=None, threads=1):
    """
    Sparse matrix of a(U, V) = int A grad U . grad V - int f~ U V.

    Element blocks are computed in chunks on a thread pool and merged in chunk order, so
    the result does not depend on the thread count.

    Args:
        mesh (TetMesh): The mesh
        bundle (CoefficientBundle, optional): Coefficients; identity A when omitted
        f (PotentialSpec, optional): Potential; omitted means f = 0
        threads (int): Worker threads

    Returns:
        scipy.sparse.csr_matrix: (V, V) matrix
    """
    chunks = [np.asarray(c) for c in chunked(range(len(mesh.tets)), ASSEMBLY_CHUNK)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(lambda cells: _element_matrices(mesh, bundle, f, cells), chunks))
    rows, cols, values = (np.concatenate(column) for column in zip(*parts))
    return sparse.coo_matrix((values, (rows, cols)), shape=(mesh.n_vertices,) * 2).tocsr()


def _boundary_values(mesh, boundary_data):
    values = np.zeros(mesh.n_vertices)
    outer = mesh.sphere_vertices & ~mesh.crack_vertices
    points = mesh.vertices[outer]
    evaluate = getattr(boundary_data, "evaluate", boundary_data)
    values[outer] = evaluate(points)
    return values


def assemble_solve(mesh, bundle, f, boundary_data, threads=1, rtol=1e-10):
    """
    Solve -div(A grad U) = f~ U with U = 0 on the crack and U = G on the sphere.

    Args:
        mesh (TetMesh): Slit ball or approximating domain mesh
        bundle (CoefficientBundle): Coefficients
        f (PotentialSpec): Potential
        boundary_data: Object with `evaluate(points)` (or a callable) giving G
        threads (int): Assembly threads
        rtol (float): CG relative residual tolerance

    Returns:
        ScalarField: The solution, with solver diagnostics in `info`

    Raises:
        WellPosednessError: If the reduced matrix is not positive definite
        SolverError: If CG does not converge
    """
    matrix = bilinear_form(mesh, bundle, f, threads)
    values = _boundary_values(mesh, boundary_data)
    fixed = mesh.fixed_vertices
    free, pinned = np.flatnonzero(~fixed), np.flatnonzero(fixed)
    rows = matrix[free]
    load = -(rows[:, pinned] @ values[pinned])
    solution, iteration_log = pcg(rows[:, free], load, rtol=rtol)
    values[free] = solution
    info = {
        "iterations": max(len(iteration_log) - 1, 0),
        "final_residual": float(iteration_log[-1]) if iteration_log else 0.0,
        "load_norm": float(np.linalg.norm(load)),
        "unknowns": int(len(free)),
    }
    logging.info(
        f"Solved on {mesh.kind} mesh: {info['unknowns']} unknowns, {info['iterations']} CG "
        f"iterations, residual {info['final_residual']:.3e}"
    )
    return ScalarField(mesh, values, mesh.crack_vertices.copy(), info=info)


def galerkin_residual(field, bundle, f, threads=1):
    """||(K u)_free|| / ||load||, the relative residual of the discrete equations."""
    mesh = field.mesh
    matrix = bilinear_form(mesh, bundle, f, threads)
    fixed = mesh.fixed_vertices
    free, pinned = np.flatnonzero(~fixed), np.flatnonzero(fixed)
    rows = matrix[free]
    residual = float(np.linalg.norm(rows @ field.nodal))
    load = float(np.linalg.norm(rows[:, pinned] @ field.nodal[pinned]))
    return residual / load if load > 0 else residual


def h1_distance(u, v, region_radius, mesh=None):
    """
    L2 and H1 distances of two fields over B_region_radius.

    Quadrature runs on `mesh` when given. Otherwise it runs on the mesh that covers the
    whole ball: the slit ball mesh when one of the fields lives on an approximating
    domain, the finer mesh otherwise. A field not living on the quadrature mesh is
    sampled pointwise and read as zero off its own mesh.

    Returns:
        dict: {"l2": ..., "h1": ...}

    Raises:
        DomainError: If the region is not covered by the meshes involved
    """
    fields = [x for x in (u, v) if isinstance(x, ScalarField)]
    meshes = [x.mesh for x in fields] + ([mesh] if mesh is not None else [])
    if not meshes:
        raise DomainError("h1_distance needs a quadrature mesh for two closed-form fields")
    for m in meshes:
        if region_radius > m.radius * (1.0 + 1e-10):
            raise DomainError(f"Region radius {region_radius} exceeds mesh radius {m.radius}")

    def rank(field):
        if not isinstance(field, ScalarField):
            return (-1, 0)
        return (int(field.mesh.kind == "slit_ball"), field.mesh.n_vertices)

    if mesh is None:
        reference = max((u, v), key=rank)
        mesh = reference.mesh
        other = v if reference is u else u
    else:
        reference, other = u, v
    quad = ball_quadrature(mesh, region_radius)
    a_val, a_grad = quad.sample(reference, outside="zero")
    b_val, b_grad = quad.sample(other, outside="zero")
    l2_sq = quad.integrate((a_val - b_val) ** 2)
    semi_sq = quad.integrate(np.sum((a_grad - b_grad) ** 2, axis=1))
    return {"l2": math.sqrt(max(l2_sq, 0.0)), "h1": math.sqrt(max(l2_sq + semi_sq, 0.0))}


__all__ = [
    "BallQuadrature",
    "BoundaryData",
    "ClosedFormField",
    "CutoffBoundaryData",
    "ProfileValue",
    "ScalarField",
    "TetMesh",
    "approx_level",
    "approx_profile",
    "assemble_solve",
    "ball_quadrature",
    "bilinear_form",
    "closed_form_field",
    "cutoff_boundary_data",
    "galerkin_residual",
    "graded_local_size",
    "h1_distance",
    "interpolate",
    "mesh_approx_domain",
    "mesh_slit_ball",
    "sphere_points",
    "transition",
]
