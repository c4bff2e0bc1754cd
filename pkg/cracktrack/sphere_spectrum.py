#!/usr/bin/env python
# coding: utf-8

"""
Dirichlet spectrum of the Laplace-Beltrami operator on the slit sphere.

The sphere S^2 is triangulated as a warped cube-sphere whose lattice contains the cut
Theta = {x2 >= 0, x3 = 0, |x| = 1} as a chain of mesh edges. Linear elements give the
cotangent stiffness and the consistent mass matrix; the cut vertices are eliminated and
the smallest eigenpairs come from subspace iteration.

Closed-form spectrum: mu_k = (k/2)(k/2 + N - 1) = k(k + 2N - 2)/4 with multiplicity
ceil(k/2) for N = 2, the eigenfunctions being rho^{j/2} sin(j phi/2) times polynomials,
k = j + 2i.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from cracktrack.errors import DomainError, MeshingError, UnsupportedDimensionError
from cracktrack.utils.data_utils import FLOAT_FORMAT, array_checksum, write_json
from cracktrack.utils.locate_utils import TriangleLocator
from cracktrack.utils.solver_utils import subspace_iteration

CLUSTER_GAP = 1e-4
MATCH_TOLERANCE = 0.1
CUT_TOLERANCE = 1e-12
WARP_EXPONENT = 1.5


def oracle_eigenvalue(k, N=2):
    """k(k + 2N - 2)/4, the eigenvalue of homogeneity degree k/2."""
    if k < 1 or N < 2:
        raise DomainError(f"oracle_eigenvalue needs k >= 1 and N >= 2, got k={k}, N={N}")
    return k * (k + 2 * N - 2) / 4.0


def oracle_multiplicity(k):
    """Number of j in {k, k-2, ...} with j >= 1 (N = 2)."""
    return (k + 1) // 2


def erratum_check(N=2, k_max=3):
    """
    Log the printed eigenvalue sequence k(k + 2N + 2)/4 next to the implemented one.

    Returns:
        dict: k -> (printed, implemented)
    """
    table = {k: (k * (k + 2 * N + 2) / 4.0, oracle_eigenvalue(k, N)) for k in range(1, k_max + 1)}
    for k, (printed, implemented) in table.items():
        logging.info(
            f"Eigenvalue erratum k={k}: printed k(k+2N+2)/4 = {printed:g}, "
            f"implemented k(k+2N-2)/4 = {implemented:g} (homogeneity {k / 2:g})"
        )
    return table


@dataclass
class SphereMesh:
    """
    Triangulated unit sphere with the cut Theta resolved by edges.

    Attributes:
        vertices (np.ndarray): (V, 3) unit vectors
        triangles (np.ndarray): (T, 3) vertex indices, outward oriented
        cut_vertices (np.ndarray): indices of the vertices on Theta
        mesh_size (float): nominal h
        lattice (int): cube-sphere lattice resolution per face edge
    """

    vertices: np.ndarray
    triangles: np.ndarray
    cut_vertices: np.ndarray
    mesh_size: float
    lattice: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def free(self):
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.cut_vertices] = False
        return mask

    @property
    def locator(self):
        if "locator" not in self._cache:
            self._cache["locator"] = TriangleLocator(self.vertices, self.triangles)
        return self._cache["locator"]

    @property
    def checksum(self):
        return array_checksum(self.vertices)

    @property
    def euler_characteristic(self):
        edges = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        n_edges = len(np.unique(edges, axis=0))
        return self.n_vertices - n_edges + len(self.triangles)

    @property
    def max_edge(self):
        coords = self.vertices[self.triangles]
        return float(
            max(np.linalg.norm(coords[:, i] - coords[:, (i + 1) % 3], axis=1).max() for i in range(3))
        )

    def export(self, path):
        with open(path, "w") as f:
            f.write(f"# cracktrack-sphere fnv1a={self.checksum} lattice={self.lattice}\n")
            f.write(f"vertices {self.n_vertices}\n")
            np.savetxt(f, self.vertices, fmt=FLOAT_FORMAT)
            f.write(f"triangles {len(self.triangles)}\n")
            np.savetxt(f, self.triangles, fmt="%d")
            f.write("cut " + " ".join(str(int(i)) for i in self.cut_vertices) + "\n")


def _lattice_for(h):
    """Smallest even lattice with diagonal length sqrt(2) * 3 pi / (4n) <= 1.5 h."""
    n = math.ceil(math.sqrt(2.0) * math.pi / (2.0 * h))
    return n + n % 2


def _warp(u):
    w = np.sign(u) * np.abs(u) ** WARP_EXPONENT
    return np.tan(0.25 * np.pi * w)


def build_slit_sphere_mesh(N=2, h=0.05):
    """
    Triangulate S^N with the cut {x2 >= 0, x3 = 0} conforming.

    Lattice coordinates are warped by |u|^1.5 toward the face centres, which refines the
    mesh at the poles (+-1, 0, 0) where Theta ends.

    Raises:
        UnsupportedDimensionError: For N != 2
        MeshingError: Unless 0.005 <= h <= 0.5
    """
    if N != 2:
        raise UnsupportedDimensionError(f"Slit sphere meshes exist for N = 2 only, got N={N}")
    if not 0.005 <= h <= 0.5:
        raise MeshingError(f"Sphere mesh size must lie in [0.005, 0.5], got {h}")

    n = _lattice_for(h)
    axis = _warp(2.0 * np.arange(n + 1) / n - 1.0)
    axis[n // 2] = 0.0
    ijk = np.stack(np.meshgrid(*(np.arange(n + 1),) * 3, indexing="ij"), axis=-1).reshape(-1, 3)
    on_surface = np.any((ijk == 0) | (ijk == n), axis=1)
    index = np.full(len(ijk), -1, dtype=np.int64)
    index[on_surface] = np.arange(on_surface.sum())
    index = index.reshape(n + 1, n + 1, n + 1)
    cube = axis[ijk[on_surface]]
    vertices = cube / np.linalg.norm(cube, axis=1, keepdims=True)

    a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    a, b = a.reshape(-1), b.reshape(-1)
    triangles = []
    for fixed_axis in range(3):
        for side in (0, n):
            free_axes = [d for d in range(3) if d != fixed_axis]

            def vid(da, db):
                coords = [None] * 3
                coords[fixed_axis] = np.full_like(a, side)
                coords[free_axes[0]] = a + da
                coords[free_axes[1]] = b + db
                return index[coords[0], coords[1], coords[2]]

            q00, q10, q11, q01 = vid(0, 0), vid(1, 0), vid(1, 1), vid(0, 1)
            triangles.append(np.stack([q00, q10, q11], axis=1))
            triangles.append(np.stack([q00, q11, q01], axis=1))
    triangles = np.concatenate(triangles)

    coords = vertices[triangles]
    normals = np.cross(coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0])
    inward = np.einsum("td,td->t", normals, coords.mean(axis=1)) < 0
    triangles[inward] = triangles[inward][:, [0, 2, 1]]

    cut = np.flatnonzero(
        (np.abs(vertices[:, 2]) <= CUT_TOLERANCE) & (vertices[:, 1] >= -CUT_TOLERANCE)
    )
    mesh = SphereMesh(vertices, triangles, cut, float(h), n)
    logging.info(
        f"Slit sphere mesh: lattice {n}, {mesh.n_vertices} vertices, {len(triangles)} "
        f"triangles, {len(cut)} cut vertices"
    )
    return mesh


def sphere_matrices(mesh):
    """
    Stiffness and consistent mass matrices of linear elements on the flat triangles.

    With e_a the edge opposite corner a (cyclic, so e_1 + e_2 + e_3 = 0), the element
    blocks are K_ab = e_a.e_b / (4|T|) and M_ab = |T| (1 + delta_ab) / 12.

    Returns:
        tuple: (stiffness, mass) as csr matrices of shape (V, V)

    Raises:
        MeshingError: If a triangle is degenerate
    """
    triangles = mesh.triangles
    corners = mesh.vertices[triangles]
    edges = np.roll(corners, -1, axis=1) - np.roll(corners, 1, axis=1)
    area = 0.5 * np.linalg.norm(np.cross(edges[:, 0], edges[:, 1]), axis=1)
    if area.min() <= 0.0:
        raise MeshingError(f"Degenerate sphere triangle of area {area.min():.3g}")

    local_k = np.einsum("tad,tbd->tab", edges, edges) / (4.0 * area)[:, None, None]
    local_m = area[:, None, None] * (np.ones((3, 3)) + np.eye(3)) / 12.0
    rows = np.repeat(triangles, 3, axis=1).reshape(-1)
    cols = np.tile(triangles, (1, 3)).reshape(-1)
    shape = (mesh.n_vertices,) * 2

    def assemble(local):
        return sparse.coo_matrix((local.reshape(-1), (rows, cols)), shape=shape).tocsr()

    return assemble(local_k), assemble(local_m)


@dataclass
class SphericalEigenpair:
    """Eigenvalue mu and mass-normalized nodal eigenfunction psi (zero on the cut)."""

    mu: float
    psi: np.ndarray
    k_index: int = None
    multiplicity_cluster: int = 0
    residual: float = 0.0

    @property
    def matched(self):
        return self.k_index is not None

    @property
    def ell(self):
        """Homogeneity degree of the matched eigenvalue, k/2."""
        return None if self.k_index is None else 0.5 * self.k_index

    def to_dict(self):
        return {
            "mu": float(self.mu),
            "k_index": self.k_index,
            "cluster": int(self.multiplicity_cluster),
            "residual": float(self.residual),
            "psi_nodal": self.psi.tolist(),
        }


def match_oracle(mu, N=2, tolerance=MATCH_TOLERANCE):
    """Index k of the nearest oracle eigenvalue within `tolerance`, else None."""
    best, best_error = None, np.inf
    k = 1
    while True:
        target = oracle_eigenvalue(k, N)
        error = abs(mu - target) / target
        if error < best_error:
            best, best_error = k, error
        if target > 2.0 * mu:
            break
        k += 1
    return best if best_error <= tolerance else None


def _clusters(values, gap=CLUSTER_GAP):
    labels = np.zeros(len(values), dtype=int)
    for i in range(1, len(values)):
        jump = (values[i] - values[i - 1]) / abs(values[i - 1])
        labels[i] = labels[i - 1] + int(jump > gap)
    return labels


def solve_eigenpairs(mesh, count, seed=0, max_iter=200):
    """
    The `count` smallest eigenpairs of the slit sphere.

    Args:
        mesh (SphereMesh): The mesh
        count (int): Number of pairs
        seed (int): Seed of the random start vector
        max_iter (int): Subspace iteration cap

    Returns:
        list: SphericalEigenpair, ascending, mass-orthonormal

    Raises:
        EigenConvergenceError: If the iteration does not converge
    """
    if count < 1:
        raise DomainError(f"count must be at least 1, got {count}")
    stiffness, mass = sphere_matrices(mesh)
    free = np.flatnonzero(mesh.free)
    values, vectors, residuals = subspace_iteration(
        stiffness[free][:, free],
        mass[free][:, free],
        count,
        rng=np.random.default_rng(seed),
        max_iter=max_iter,
    )
    clusters = _clusters(values)
    pairs = []
    for i, mu in enumerate(values):
        psi = np.zeros(mesh.n_vertices)
        psi[free] = vectors[:, i]
        # gauge: positive mean over the sphere
        if psi @ (mass @ np.ones(mesh.n_vertices)) < 0:
            psi = -psi
        k = match_oracle(mu)
        if k is None:
            logging.warning(f"Eigenvalue {mu:.6g} matches no oracle value within 10%")
        pairs.append(SphericalEigenpair(float(mu), psi, k, int(clusters[i]), float(residuals[i])))
        logging.info(f"Eigenpair {i}: mu={mu:.8g}, k={k}, cluster={clusters[i]}")
    return pairs


class SlitSphereSpectrum:
    """Mesh, matrices and eigenpairs of one slit sphere discretization."""

    def __init__(self, mesh, pairs):
        self.mesh = mesh
        self.pairs = pairs

    @classmethod
    def compute(cls, h=0.05, count=6, seed=0, N=2):
        mesh = build_slit_sphere_mesh(N, h)
        erratum_check(N)
        return cls(mesh, solve_eigenpairs(mesh, count, seed=seed))

    @cached_property
    def matrices(self):
        return sphere_matrices(self.mesh)

    @property
    def stiffness(self):
        return self.matrices[0]

    @property
    def mass(self):
        return self.matrices[1]

    def multiplicities(self):
        """Numerically found number of pairs per matched k."""
        counts = {}
        for pair in self.pairs:
            if pair.matched:
                counts[pair.k_index] = counts.get(pair.k_index, 0) + 1
        return counts

    def pairs_for(self, k):
        return [pair for pair in self.pairs if pair.k_index == k]

    def gram(self):
        """Mass Gram matrix of the nodal eigenfunctions."""
        psi = np.stack([pair.psi for pair in self.pairs], axis=1)
        return psi.T @ (self.mass @ psi)

    def to_dict(self):
        return {
            "h": self.mesh.mesh_size,
            "lattice": self.mesh.lattice,
            "mesh_checksum": self.mesh.checksum,
            "pairs": [pair.to_dict() for pair in self.pairs],
        }

    def export(self, path):
        write_json(path, self.to_dict())

    @classmethod
    def load(cls, path, N=2):
        """Rebuild the mesh from h and read the pairs back."""
        with open(path) as f:
            data = json.load(f)
        mesh = build_slit_sphere_mesh(N, data["h"])
        if mesh.checksum != data["mesh_checksum"]:
            raise MeshingError(f"Sphere mesh checksum mismatch reading {path}")
        pairs = [
            SphericalEigenpair(p["mu"], np.asarray(p["psi_nodal"]), p["k_index"], p["cluster"], p["residual"])
            for p in data["pairs"]
        ]
        return cls(mesh, pairs)


def _unit(theta):
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    if np.any(np.abs(np.linalg.norm(theta, axis=1) - 1.0) > 1e-8):
        raise DomainError("Eigenfunctions are evaluated at unit vectors only")
    return theta


def eval_eigenfunction(pair, mesh, theta):
    """
    Barycentric interpolation of psi at unit vectors.

    Raises:
        DomainError: If theta is not a unit vector
        GeometryError: If no containing triangle is found
    """
    scalar = np.ndim(theta) == 1
    cells, bary = mesh.locator.locate(_unit(theta))
    values = np.einsum("pa,pa->p", bary, pair.psi[mesh.triangles[cells]])
    return float(values[0]) if scalar else values


def triangle_gradients(mesh, psi):
    """Gradient of the P1 function psi on each flat triangle, shape (T, 3)."""
    coords = mesh.vertices[mesh.triangles]
    e1, e2 = coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]
    values = psi[mesh.triangles]
    d1, d2 = values[:, 1] - values[:, 0], values[:, 2] - values[:, 0]
    g11, g12, g22 = (e1 * e1).sum(1), (e1 * e2).sum(1), (e2 * e2).sum(1)
    det = g11 * g22 - g12**2
    c1 = (g22 * d1 - g12 * d2) / det
    c2 = (g11 * d2 - g12 * d1) / det
    return c1[:, None] * e1 + c2[:, None] * e2


def surface_gradient(pair, mesh, theta):
    """Triangle gradient of psi projected onto the tangent plane at theta, shape (P, 3)."""
    theta = _unit(theta)
    cells, _ = mesh.locator.locate(theta)
    grads = triangle_gradients(mesh, pair.psi)[cells]
    return grads - np.einsum("pd,pd->p", grads, theta)[:, None] * theta


def first_mode_closed_form(theta):
    """sqrt(sin psi) sin(phi/2) * sqrt(2)/pi, psi from the x1 axis and phi from the cut."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    rho = np.hypot(theta[:, 1], theta[:, 2])
    phi = np.mod(np.arctan2(theta[:, 2], theta[:, 1]), 2.0 * np.pi)
    return math.sqrt(2.0) / math.pi * np.sqrt(rho) * np.sin(0.5 * phi)


class HomogeneousExtension:
    """
    |x|^ell sum_m c_m Y_m(x/|x|) for nodal eigenfunctions Y_m on a sphere mesh.

    The gradient is ell |x|^{ell-2} x Y + |x|^{ell-1} grad_S Y, with grad_S the projected
    triangle gradient.
    """

    def __init__(self, mesh, pairs, coefficients, ell):
        self.mesh = mesh
        self.ell = float(ell)
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.psi = sum(c * pair.psi for c, pair in zip(self.coefficients, pairs))
        self._grads = triangle_gradients(mesh, self.psi)

    def sample(self, points, outside=None):
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        norm = np.linalg.norm(points, axis=1)
        nonzero = norm > 0
        values = np.zeros(len(points))
        grads = np.zeros_like(points)
        theta = points[nonzero] / norm[nonzero, None]
        cells, bary = self.mesh.locator.locate(theta)
        y = np.einsum("pa,pa->p", bary, self.psi[self.mesh.triangles[cells]])
        g = self._grads[cells]
        g = g - np.einsum("pd,pd->p", g, theta)[:, None] * theta
        r = norm[nonzero]
        values[nonzero] = r**self.ell * y
        grads[nonzero] = (self.ell * y)[:, None] * theta * r[:, None] ** (self.ell - 1.0) + g * r[
            :, None
        ] ** (self.ell - 1.0)
        return values, grads

    def evaluate(self, points, outside=None):
        return self.sample(points)[0]

    def gradient(self, points, outside=None):
        return self.sample(points)[1]


__all__ = [
    "HomogeneousExtension",
    "SlitSphereSpectrum",
    "SphereMesh",
    "SphericalEigenpair",
    "build_slit_sphere_mesh",
    "erratum_check",
    "eval_eigenfunction",
    "first_mode_closed_form",
    "match_oracle",
    "oracle_eigenvalue",
    "oracle_multiplicity",
    "solve_eigenpairs",
    "sphere_matrices",
    "surface_gradient",
    "triangle_gradients",
]
