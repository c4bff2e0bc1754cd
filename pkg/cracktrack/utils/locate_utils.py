#!/usr/bin/env python
# coding: utf-8

"""
Point location on tetrahedral and triangulated surface meshes.

Candidates come from a KD-tree over element centroids; the containing element is the
candidate whose smallest barycentric coordinate is largest. The candidate count grows
16 -> 64 -> 256 for points that no nearby element contains.
"""

import logging

import numpy as np
from more_itertools import chunked
from scipy.spatial import cKDTree

from cracktrack.errors import GeometryError

CANDIDATE_COUNTS = (16, 64, 256)
INSIDE_TOLERANCE = 1e-9
CHUNK_SIZE = 20000


class TetLocator:
    """
    Locate points in a tetrahedral mesh.

    Args:
        vertices (np.ndarray): Vertex coordinates, shape (V, 3)
        tets (np.ndarray): Vertex indices, shape (T, 4)
    """

    def __init__(self, vertices, tets):
        coords = vertices[tets]
        self.origin = coords[:, 0, :]
        edges = np.transpose(coords[:, 1:, :] - coords[:, :1, :], (0, 2, 1))
        self.inverse = np.linalg.inv(edges)
        self.tree = cKDTree(coords.mean(axis=1))
        self.n_cells = len(tets)

    def _barycentric(self, points, candidates):
        local = points[:, None, :] - self.origin[candidates]
        lam = np.einsum("pkij,pkj->pki", self.inverse[candidates], local)
        return np.concatenate([1.0 - lam.sum(axis=-1, keepdims=True), lam], axis=-1)

    def _locate_chunk(self, points):
        n = len(points)
        cells = np.full(n, -1, dtype=np.int64)
        bary = np.zeros((n, 4))
        score = np.full(n, -np.inf)
        pending = np.arange(n)
        for k in CANDIDATE_COUNTS:
            if len(pending) == 0:
                break
            k = min(k, self.n_cells)
            _, candidates = self.tree.query(points[pending], k=k)
            candidates = np.asarray(candidates).reshape(len(pending), k)
            lam = self._barycentric(points[pending], candidates)
            worst = lam.min(axis=-1)
            best = np.argmax(worst, axis=1)
            rows = np.arange(len(pending))
            better = worst[rows, best] > score[pending]
            update = pending[better]
            cells[update] = candidates[rows, best][better]
            bary[update] = lam[rows, best][better]
            score[update] = worst[rows, best][better]
            pending = pending[score[pending] < -INSIDE_TOLERANCE]
            if k == self.n_cells:
                break
        return cells, bary, score

    def locate(self, points, outside="extrapolate"):
        """
        Find the containing tet and barycentric coordinates of each point.

        Args:
            points (np.ndarray): Query points, shape (P, 3)
            outside (str): What to do with points no tet contains: "extrapolate" keeps the
                nearest tet (barycentrics may be negative), "zero" flags them in the
                returned mask, "raise" raises GeometryError

        Returns:
            tuple: tet indices (P,), barycentric coordinates (P, 4), inside mask (P,)
        """
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        cells = np.empty(len(points), dtype=np.int64)
        bary = np.empty((len(points), 4))
        score = np.empty(len(points))
        for chunk in chunked(range(len(points)), CHUNK_SIZE):
            index = np.asarray(chunk)
            cells[index], bary[index], score[index] = self._locate_chunk(points[index])

        inside = score >= -INSIDE_TOLERANCE
        if not inside.all():
            missing = int((~inside).sum())
            if outside == "raise":
                raise GeometryError(f"{missing} points lie outside the mesh")
            logging.debug(f"{missing} points outside the mesh, policy {outside}")
        return cells, bary, inside


class TriangleLocator:
    """
    Locate unit vectors on a triangulated sphere by central projection.

    The ray through a query direction meets the plane of its containing triangle; the
    barycentric coordinates of that intersection are returned.
    """

    def __init__(self, vertices, triangles):
        self.vertices = vertices
        self.triangles = triangles
        coords = vertices[triangles]
        self.normals = np.cross(coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0])
        centroids = coords.mean(axis=1)
        self.tree = cKDTree(centroids / np.linalg.norm(centroids, axis=1, keepdims=True))
        self.n_cells = len(triangles)

    def _barycentric(self, theta, candidates):
        coords = self.vertices[self.triangles[candidates]]
        normals = self.normals[candidates]
        a = coords[..., 0, :]
        scale = np.einsum("pkd,pkd->pk", normals, a) / np.einsum(
            "pkd,pd->pk", normals, theta
        )
        projected = theta[:, None, :] * scale[..., None]
        b, c = coords[..., 1, :], coords[..., 2, :]
        area = np.einsum("pkd,pkd->pk", normals, normals)
        l1 = np.einsum("pkd,pkd->pk", np.cross(projected - a, c - a), normals)
        l2 = np.einsum("pkd,pkd->pk", np.cross(b - a, projected - a), normals)
        l1, l2 = l1 / area, l2 / area
        lam = np.stack([1.0 - l1 - l2, l1, l2], axis=-1)
        # Triangles facing away from the query direction are never valid
        lam[scale <= 0.0] = -np.inf
        return lam

    def locate(self, theta):
        """
        Containing triangle and barycentric coordinates of unit vectors.

        Raises:
            GeometryError: If no candidate triangle contains a direction
        """
        theta = np.asarray(theta, dtype=float).reshape(-1, 3)
        cells = np.empty(len(theta), dtype=np.int64)
        bary = np.empty((len(theta), 3))
        best_score = np.full(len(theta), -np.inf)
        for chunk in chunked(range(len(theta)), CHUNK_SIZE):
            pending = np.asarray(chunk)
            for k in CANDIDATE_COUNTS:
                k = min(k, self.n_cells)
                _, candidates = self.tree.query(theta[pending], k=k)
                candidates = np.asarray(candidates).reshape(len(pending), k)
                lam = self._barycentric(theta[pending], candidates)
                worst = lam.min(axis=-1)
                best = np.argmax(worst, axis=1)
                rows = np.arange(len(pending))
                cells[pending] = candidates[rows, best]
                bary[pending] = lam[rows, best]
                best_score[pending] = worst[rows, best]
                pending = pending[best_score[pending] < -INSIDE_TOLERANCE]
                if len(pending) == 0 or k == self.n_cells:
                    break
            if len(pending):
                raise GeometryError(
                    f"No containing triangle for {len(pending)} directions, "
                    f"worst barycentric {best_score[pending].min():.3e}"
                )
        return cells, bary
