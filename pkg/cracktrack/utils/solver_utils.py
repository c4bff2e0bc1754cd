#!/usr/bin/env python
# coding: utf-8

"""
Linear and eigen solvers for the assembled FEM systems.

`pcg` runs scipy's conjugate gradients with a Jacobi preconditioner. The callback keeps
the residual history and watches the curvature d^T K d of each step d = x_k - x_{k-1}:
a non-positive value means the bilinear form is not coercive on the discrete space.
Subspace iteration handles the generalized eigenproblems of the sphere discretization.
"""

import logging
import math

import numpy as np
from scipy import sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import cg, splu

from cracktrack.errors import EigenConvergenceError, SolverError, WellPosednessError


def default_max_iterations(n_unknowns):
    """20 * sqrt(n) iterations, never fewer than 100."""
    return max(100, int(math.ceil(20.0 * math.sqrt(n_unknowns))))


class _CurvatureMonitor:
    """cg callback recording relative residuals and rejecting non-positive curvature."""

    def __init__(self, matrix, rhs, x0):
        self.matrix = matrix
        self.rhs = rhs
        self.rhs_norm = np.linalg.norm(rhs)
        self.previous = x0.copy()
        self.iteration_log = [self.relative_residual(x0)]

    def relative_residual(self, x):
        return float(np.linalg.norm(self.rhs - self.matrix @ x) / self.rhs_norm)

    def __call__(self, xk):
        step = xk - self.previous
        curvature = float(step @ (self.matrix @ step))
        if curvature <= 0.0 and np.any(step):
            raise WellPosednessError(
                f"Negative curvature d^T K d = {curvature:.3e} at iteration {len(self.iteration_log)}: "
                "the discrete form is indefinite"
            )
        self.previous = xk.copy()
        self.iteration_log.append(self.relative_residual(xk))


def pcg(matrix, rhs, x0=None, rtol=1e-10, max_iter=None):
    """
    Solve matrix @ x = rhs with diagonally preconditioned CG.

    Args:
        matrix (scipy.sparse matrix): Symmetric system matrix
        rhs (np.ndarray): Right-hand side
        x0 (np.ndarray, optional): Initial guess, zero by default
        rtol (float): Relative residual tolerance ||r|| <= rtol * ||rhs||
        max_iter (int, optional): Iteration cap, `default_max_iterations` by default

    Returns:
        tuple: solution and the list of relative residuals, starting with the initial one

    Raises:
        WellPosednessError: If the diagonal or a CG step has non-positive curvature
        SolverError: If the tolerance is not reached within max_iter iterations
    """
    n = len(rhs)
    max_iter = default_max_iterations(n) if max_iter is None else max_iter
    diagonal = matrix.diagonal()
    if np.any(diagonal <= 0.0):
        raise WellPosednessError(
            f"Non-positive diagonal entry {diagonal.min():.3e} in the system matrix"
        )
    if np.linalg.norm(rhs) == 0.0:
        return np.zeros(n), []

    x0 = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    monitor = _CurvatureMonitor(matrix, rhs, x0)
    x, info = cg(
        matrix,
        rhs,
        x0=x0,
        rtol=rtol,
        atol=0.0,
        maxiter=max_iter,
        M=sparse.diags(1.0 / diagonal),
        callback=monitor,
    )
    iteration_log = monitor.iteration_log
    if info < 0:
        raise SolverError(f"CG breakdown (info={info})", iteration_log=iteration_log)
    if info > 0:
        raise SolverError(
            f"CG stopped after {max_iter} iterations at relative residual {iteration_log[-1]:.3e}",
            iteration_log=iteration_log,
        )
    logging.debug(f"CG converged in {len(iteration_log) - 1} iterations, residual {iteration_log[-1]:.3e}")
    return x, iteration_log


def initial_vectors(stiffness, mass, q, rng=None):
    """
    Starting block for subspace iteration.

    The first column is the mass diagonal, the next are unit vectors at the smallest
    k_ii/m_ii ratios and the last is random when a generator is given.
    """
    n = stiffness.shape[0]
    x = np.zeros((n, q))
    m_diag = mass.diagonal()
    x[:, 0] = m_diag
    if q > 1:
        ok = np.flatnonzero(m_diag != 0.0)
        ratios = stiffness.diagonal()[ok] / m_diag[ok]
        index = ok[np.argsort(ratios, kind="stable")[: q - 1]]
        x[index, np.arange(1, len(index) + 1)] = 1.0
        if rng is not None:
            x[:, -1] = rng.uniform(size=n)
    return x


def _eigen_residuals(stiffness, mass, values, vectors):
    kx = stiffness @ vectors
    r = kx - (mass @ vectors) * values[None, :]
    return np.linalg.norm(r, axis=0) / np.maximum(np.linalg.norm(kx, axis=0), 1e-300)


def subspace_iteration(
    stiffness, mass, count, rng=None, tol=1e-10, residual_tol=1e-8, max_iter=200
):
    """
    Smallest eigenpairs of stiffness @ x = mu * mass @ x by subspace iteration.

    A block of q = min(2p, p + 8, n) vectors is pushed through the factorized stiffness
    and Rayleigh-Ritz projected each step.

    Args:
        stiffness (scipy.sparse matrix): Symmetric positive definite matrix
        mass (scipy.sparse matrix): Symmetric positive definite matrix
        count (int): Number p of wanted eigenpairs
        rng (np.random.Generator, optional): Source of the random start vector
        tol (float): Relative change of the wanted eigenvalues between iterations
        residual_tol (float): ||K x - mu M x|| / ||K x|| for every wanted pair
        max_iter (int): Iteration cap

    Returns:
        tuple: eigenvalues (p,), mass-orthonormal eigenvectors (n, p), residuals (p,)

    Raises:
        EigenConvergenceError: If both criteria are not met within max_iter iterations
    """
    n = stiffness.shape[0]
    count = min(count, n)
    q = min(2 * count, count + 8, n)
    factor = splu(stiffness.tocsc())
    y = mass @ initial_vectors(stiffness, mass, q, rng)
    previous = None
    residuals = np.full(count, np.inf)
    for it in range(1, max_iter + 1):
        x_bar = factor.solve(y)
        k_r = x_bar.T @ y
        y_bar = mass @ x_bar
        m_r = x_bar.T @ y_bar
        values, q_r = eigh(0.5 * (k_r + k_r.T), 0.5 * (m_r + m_r.T))
        y = y_bar @ q_r
        vectors = x_bar @ q_r
        if previous is not None:
            change = np.abs(values[:count] - previous[:count]) / np.abs(values[:count])
            residuals = _eigen_residuals(stiffness, mass, values[:count], vectors[:, :count])
            logging.debug(
                f"Subspace iteration {it}: max change {change.max():.3e}, "
                f"max residual {residuals.max():.3e}"
            )
            if change.max() <= tol and residuals.max() <= residual_tol:
                logging.info(f"Subspace iteration converged in {it} iterations")
                return values[:count], vectors[:, :count], residuals
        previous = values
    raise EigenConvergenceError(
        f"Subspace iteration did not converge in {max_iter} iterations "
        f"(max residual {residuals.max():.3e})",
        residuals=residuals,
    )
