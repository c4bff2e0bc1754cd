#!/usr/bin/env python
# coding: utf-8

"""
Almgren frequency analysis of a solution near the crack edge.

For r in (0, r0]:

    H(r) = r^{-N} int_{dB_r} mu U^2 ds
    D(r) = r^{1-N} (int_{B_r} A grad U . grad U - int_{B_r} f~ U^2)
    N(r) = D(r) / H(r)

plus the limit ell = lim N(r) and its match k0 = 2 ell against the slit sphere spectrum,
the blow-up family U^lambda(x) = U(lambda x) / sqrt(H(lambda)), the Fourier coefficients
of U on the sphere and the coefficients beta_m of the limiting profile.

Fields are anything with `sample(points, outside)` returning values and gradients: P1
`ScalarField`s, closed-form fields, homogeneous extensions and the wrappers below.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import pandas as pd
from scipy.integrate import simpson

from cracktrack.errors import (
    DomainError,
    IllConditionedFitError,
    IntegrabilityError,
    PreconditionError,
    TrivialFieldError,
    UnderflowError,
)
from cracktrack.mesh_fem import ScalarField, ball_quadrature, h1_distance, sphere_points
from cracktrack.sphere_spectrum import HomogeneousExtension, triangle_gradients
from cracktrack.straightening import transform_potential
from cracktrack.utils.data_utils import write_json, write_table
from cracktrack.utils.quadrature_utils import geometric_grid, triangle_quadrature

FIT_POINTS = 3
MATCH_WINDOW = 0.1
CONDITION_LIMIT = 1e8
UNDERFLOW = 1e-300
TAIL_FIT_POINTS = 4
INTEGRABILITY_MARGIN = 0.05


class FieldLike(Protocol):
    def sample(self, points, outside="extrapolate"): ...


@dataclass(frozen=True)
class RescaledField:
    """x -> scale * u(factor * x)."""

    base: object
    factor: float
    scale: float

    def sample(self, points, outside="extrapolate"):
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        values, grads = self.base.sample(self.factor * points, outside=outside)
        return self.scale * values, self.scale * self.factor * grads

    def evaluate(self, points, outside="extrapolate"):
        return self.sample(points, outside)[0]


@dataclass(frozen=True)
class PullbackField:
    """The field in the original variables, u(y) = U(F^{-1}(y))."""

    base: object
    bundle: object

    def sample(self, points, outside="extrapolate"):
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        x = self.bundle.inverse(points)
        values, grads = self.base.sample(x, outside=outside)
        jac = self.bundle.inverse_jacobian(x)
        return values, np.einsum("pji,pj->pi", jac, grads)

    def evaluate(self, points, outside="extrapolate"):
        return self.sample(points, outside)[0]


def _quadrature_mesh(u, mesh):
    if mesh is not None:
        return mesh
    if isinstance(u, ScalarField):
        return u.mesh
    raise DomainError("Closed-form fields need an explicit quadrature mesh")


def _is_trivial(u):
    return isinstance(u, ScalarField) and u.is_trivial


def height(u, bundle, r):
    """H(r) alone; only the sphere of radius r is sampled."""
    dim_n = bundle.crack.dim_n
    points, weights, _ = sphere_points(r)
    values, _ = u.sample(points, outside="extrapolate")
    return float(r**-dim_n * np.sum(weights * bundle.mu(points) * values**2))


def height_energy(u, bundle, f, r, mesh=None):
    """
    H(r) and D(r).

    Args:
        u (FieldLike): The field
        bundle (CoefficientBundle): Coefficients A, mu
        f (PotentialSpec): Potential
        r (float): Radius
        mesh (TetMesh, optional): Quadrature mesh, defaults to the field's own mesh

    Returns:
        dict: {"H": ..., "D": ...}

    Raises:
        ResolutionError: If r < 4 h_local(r) or r exceeds the mesh
    """
    mesh = _quadrature_mesh(u, mesh)
    mesh.require_resolved(r)
    dim_n = bundle.crack.dim_n
    h_value = height(u, bundle, r)

    quad = ball_quadrature(mesh, r, singular=f.mode == "a1")
    values, grads = quad.sample(u)
    a = bundle.matrix(quad.points)
    energy = quad.integrate(np.einsum("pi,pij,pj->p", grads, a, grads))
    if not f.is_zero:
        energy -= quad.integrate(transform_potential(bundle, f, quad.points) * values**2)
    return {"H": h_value, "D": float(r ** (1 - dim_n) * energy)}


@dataclass
class RadialProfile:
    """H, D and N = D/H on ascending radii, with the limit fit when available."""

    radii: np.ndarray
    H: np.ndarray
    D: np.ndarray
    N: np.ndarray
    eps_bar: float
    dim_n: int = 2
    ell_estimate: float = None
    k0: int = None
    fit_report: dict = field(default_factory=dict)

    @property
    def lower_bound(self):
        return -(self.dim_n - 1) / 4.0

    @property
    def lower_bound_holds(self):
        return bool(np.all(self.N > self.lower_bound))

    def to_frame(self):
        return pd.DataFrame({"r": self.radii, "H": self.H, "D": self.D, "N": self.N})

    def summary(self):
        return {
            "eps_bar": self.eps_bar,
            "ell": self.ell_estimate,
            "k0": self.k0,
            "lower_bound": self.lower_bound,
            "lower_bound_holds": self.lower_bound_holds,
            "fit": self.fit_report,
        }


def frequency_profile(u, bundle, f, radii, mesh=None):
    """
    H, D and N on the given radii, with ell and k0 fitted when the grid allows.

    Raises:
        TrivialFieldError: If u vanishes identically
        UnderflowError: If H underflows at some radius
    """
    if _is_trivial(u):
        raise TrivialFieldError("The field vanishes identically; N(r) is undefined")
    radii = np.sort(np.asarray(radii, dtype=float))
    rows = [height_energy(u, bundle, f, r, mesh) for r in radii]
    H = np.array([row["H"] for row in rows])
    D = np.array([row["D"] for row in rows])
    if np.any(H < UNDERFLOW):
        raise UnderflowError(f"H(r) underflows at r = {radii[np.argmin(H)]:.4g}")

    profile = RadialProfile(radii, H, D, D / H, f.eps_bar(), dim_n=bundle.crack.dim_n)
    for r, n_value in zip(radii, profile.N):
        logging.info(f"N({r:.4g}) = {n_value:.6f}")
    if not profile.lower_bound_holds:
        logging.warning(f"N(r) drops below {profile.lower_bound}: min {profile.N.min():.4g}")
    if len(radii) >= 5 and radii[-1] >= 2.0 * radii[0]:
        limit = estimate_limit(profile)
        profile.ell_estimate, profile.k0 = limit["ell"], limit["k0"]
        profile.fit_report = limit
    return profile


def estimate_limit(profile):
    """
    Fit ell = lim N(r) with the model c0 + c1 r^{eps_bar + 1} on the three smallest radii.

    Returns:
        dict: ell, k0 (None when 2 ell is not within 0.1 of an integer >= 1),
        monotone_defect (most negative increment of N(r) exp(C r^{1+eps_bar}), never
        positive), the fitted coefficients and the fit condition number

    Raises:
        PreconditionError: With fewer than 5 radii or less than one octave
        IllConditionedFitError: If the fit condition number exceeds 1e8
    """
    radii = np.asarray(profile.radii, dtype=float)
    if len(radii) < 5 or radii[-1] < 2.0 * radii[0]:
        raise PreconditionError("The limit fit needs at least 5 radii spanning an octave")

    rate = profile.eps_bar + 1.0
    r, n_values = radii[:FIT_POINTS], np.asarray(profile.N)[:FIT_POINTS]
    weights = 1.0 / r
    design = np.stack([np.ones_like(r), r**rate], axis=1) * weights[:, None]
    condition = float(np.linalg.cond(design))
    if condition > CONDITION_LIMIT:
        raise IllConditionedFitError(
            f"Limit fit condition number {condition:.3g} exceeds {CONDITION_LIMIT:g}",
            condition_number=condition,
        )
    (c0, c1), *_ = np.linalg.lstsq(design, n_values * weights, rcond=None)

    twice = 2.0 * c0
    nearest = int(round(twice))
    k0 = nearest if nearest >= 1 and abs(twice - nearest) <= MATCH_WINDOW else None
    if k0 is None:
        logging.warning(f"ell = {c0:.4f} matches no half-integer within {MATCH_WINDOW / 2}")

    growth = max(0.0, -c1 / c0) if c0 != 0 else 0.0
    scaled = np.asarray(profile.N) * np.exp(growth * radii**rate)
    defect = float(min(0.0, np.min(np.diff(scaled)))) if len(scaled) > 1 else 0.0
    logging.info(f"Fitted ell = {c0:.6f} (k0 = {k0}), monotone defect {defect:.3e}")
    return {
        "ell": float(c0),
        "k0": k0,
        "monotone_defect": defect,
        "c0": float(c0),
        "c1": float(c1),
        "growth_constant": growth,
        "condition_number": condition,
    }


def height_limit(profile, ell=None):
    """
    lim H(r)/r^{2 ell} fitted on the three smallest radii.

    ell defaults to k0/2 when matched, else the fitted ell.

    Returns:
        dict: limit, the ratios, stability (relative gap of the two smallest ratios) and
        whether the limit is positive
    """
    if ell is None:
        ell = 0.5 * profile.k0 if profile.k0 is not None else profile.ell_estimate
    if ell is None:
        raise PreconditionError("height_limit needs ell or a fitted profile")
    radii = np.asarray(profile.radii)
    ratios = np.asarray(profile.H) / radii ** (2.0 * ell)
    r, q = radii[:FIT_POINTS], ratios[:FIT_POINTS]
    design = np.stack([np.ones_like(r), r ** (profile.eps_bar + 1.0)], axis=1) / r[:, None]
    (limit, _), *_ = np.linalg.lstsq(design, q / r, rcond=None)
    stability = float(abs(q[0] - q[1]) / max(abs(q[0]), abs(q[1])))
    return {
        "ell": float(ell),
        "limit": float(limit),
        "ratios": ratios.tolist(),
        "stability": stability,
        "positive": bool(limit > 0 and np.all(q > 0)),
    }


def doubling_check(u, bundle, lam, Rs, mesh=None):
    """Ratios H(R lambda)/H(lambda) for R in Rs."""
    mesh = _quadrature_mesh(u, mesh)
    for R in Rs:
        mesh.require_resolved(R * lam)
    base = height(u, bundle, lam)
    if base < UNDERFLOW:
        raise UnderflowError(f"H({lam}) underflows")
    return [height(u, bundle, R * lam) / base for R in Rs]


def doubling_bounds(profile, Rs):
    """Admissible ratio intervals [R^{2 min N - 0.1}, R^{2 max N + 0.1}]."""
    lo, hi = float(np.min(profile.N)), float(np.max(profile.N))
    return [(R ** (2.0 * lo - 0.1), R ** (2.0 * hi + 0.1)) for R in Rs]


def blowup_field(u, bundle, lam):
    """
    U^lambda(x) = U(lambda x) / sqrt(H(lambda)).

    A P1 field is returned on its own mesh scaled by 1/lambda, so B_1 is covered as long as
    lambda does not exceed the mesh radius.

    Raises:
        UnderflowError: If H(lambda) < 1e-300
    """
    h_value = height(u, bundle, lam)
    if h_value < UNDERFLOW:
        raise UnderflowError(f"H({lam:.4g}) = {h_value:.3g}: the field is numerically trivial")
    scale = 1.0 / math.sqrt(h_value)
    if isinstance(u, ScalarField):
        return u.scaled(1.0 / lam, scale)
    return RescaledField(u, lam, scale)


def renormalization(u_lambda, bundle, lam):
    """int_{dB_1} mu(lambda .) |U^lambda|^2 ds, equal to 1 by construction."""
    points, weights, _ = sphere_points(1.0)
    values, _ = u_lambda.sample(points)
    return float(np.sum(weights * bundle.mu(lam * points) * values**2))


# -- Fourier analysis on the sphere -------------------------------------------------


def _sphere_triangle_rule(sphere_mesh):
    """Flat-triangle quadrature of the sphere mesh: points, weights and nodal weights."""
    coords = sphere_mesh.vertices[sphere_mesh.triangles]
    points, weights, bary = triangle_quadrature(coords)
    return points.reshape(-1, 3), weights.reshape(-1), bary


def _basis_at_rule(sphere_mesh, psi, bary):
    """Values of a nodal function at the triangle rule points, exact barycentric form."""
    return np.einsum("qa,ta->tq", bary, psi[sphere_mesh.triangles]).reshape(-1)


def fourier_coefficient(u, pair, sphere_mesh, lam, mesh=None):
    """
    phi(lambda) = int_{S^2} U(lambda theta) Y(theta) ds on the sphere mesh of Y.

    The integral runs over the flat triangles, where the nodal basis is orthonormal.
    """
    if _is_trivial(u):
        return 0.0
    if mesh is not None:
        mesh.require_resolved(lam)
    points, weights, bary = _sphere_triangle_rule(sphere_mesh)
    theta = points / np.linalg.norm(points, axis=1, keepdims=True)
    values, _ = u.sample(lam * theta)
    return float(np.sum(weights * values * _basis_at_rule(sphere_mesh, pair.psi, bary)))


def parseval_check(u, pairs, sphere_mesh, lam, bundle):
    """
    Bessel bounds for the computed coefficients at lambda.

    Returns:
        dict: partial sum of phi^2, int U(lambda theta)^2 on the sphere mesh and the bound
        H(lambda)/min mu
    """
    points, weights, bary = _sphere_triangle_rule(sphere_mesh)
    theta = points / np.linalg.norm(points, axis=1, keepdims=True)
    values, _ = u.sample(lam * theta)
    partial = sum(
        float(np.sum(weights * values * _basis_at_rule(sphere_mesh, pair.psi, bary))) ** 2
        for pair in pairs
    )
    norm_sq = float(np.sum(weights * values**2))
    unit, _, _ = sphere_points(1.0)
    bound = height(u, bundle, lam) / float(bundle.mu(lam * unit).min())
    return {"partial_sum": partial, "norm_sq": norm_sq, "height_bound": bound}


@dataclass
class FourierTable:
    """phi_{k0,m} and Upsilon_{k0,m} on the lambdas, and beta_m from the R formula."""

    lambdas: list
    k0: int
    phi: np.ndarray
    upsilon: np.ndarray
    beta: np.ndarray
    R: float
    dim_n: int = 2
    integrals: dict = field(default_factory=dict)

    @property
    def ell(self):
        return 0.5 * self.k0

    def to_frame(self):
        rows = []
        for m in range(self.phi.shape[1]):
            for i, lam in enumerate(self.lambdas):
                rows.append(
                    {"lambda": lam, "k": self.k0, "m": m + 1, "phi": self.phi[i, m], "upsilon": self.upsilon[i, m]}
                )
        return pd.DataFrame(rows, columns=["lambda", "k", "m", "phi", "upsilon"])

    def summary(self):
        return {"ell": self.ell, "k0": self.k0, "beta": self.beta.tolist(), "R": self.R, **self.integrals}

    def export(self, csv_path, json_path):
        frame = self.to_frame()
        write_table(csv_path, {column: frame[column].to_numpy() for column in frame.columns})
        write_json(json_path, self.summary())


def _sphere_basis(sphere_mesh, pairs, theta):
    """Basis values (P, m) and projected triangle gradients (P, m, 3) at unit vectors."""
    cells, bary = sphere_mesh.locator.locate(theta)
    tri = sphere_mesh.triangles[cells]
    values = np.stack([np.einsum("pa,pa->p", bary, pair.psi[tri]) for pair in pairs], axis=1)
    grads = np.stack([triangle_gradients(sphere_mesh, pair.psi)[cells] for pair in pairs], axis=1)
    normal = np.einsum("pmd,pd->pm", grads, theta)
    return values, grads - normal[..., None] * theta[:, None, :]


def upsilon(u, bundle, f, pairs, sphere_mesh, t, mesh=None):
    """
    Upsilon_m(t) for each pair m:

        - int_{B_t} (A - Id) grad U . grad_S Y_m(x/|x|) / |x|
        + int_{B_t} f~ U Y_m(x/|x|)
        + int_{dB_t} (A - Id) grad U . (x/|x|) Y_m ds
    """
    if bundle.crack.is_flat and f.is_zero:
        return np.zeros(len(pairs))
    mesh = _quadrature_mesh(u, mesh)
    eye = np.eye(3)

    quad = ball_quadrature(mesh, t, singular=f.mode == "a1")
    values, grads = quad.sample(u)
    norm = np.linalg.norm(quad.points, axis=1)
    theta = quad.points / norm[:, None]
    y, grad_y = _sphere_basis(sphere_mesh, pairs, theta)
    flux = np.einsum("pij,pj->pi", bundle.matrix(quad.points) - eye, grads)
    total = -np.einsum("p,pd,pmd->m", quad.weights / norm, flux, grad_y)
    if not f.is_zero:
        potential = transform_potential(bundle, f, quad.points)
        total += np.einsum("p,pm->m", quad.weights * potential * values, y)

    points, weights, unit = sphere_points(t)
    s_values, s_grads = u.sample(points)
    s_y, _ = _sphere_basis(sphere_mesh, pairs, unit)
    s_flux = np.einsum("pij,pj->pi", bundle.matrix(points) - eye, s_grads)
    total += np.einsum("p,pm->m", weights * np.einsum("pd,pd->p", s_flux, unit), s_y)
    return total


def _start_radius(mesh, R):
    t = R / 10.0
    while t < 4.0 * mesh.local_size(t):
        t *= 1.05
    return min(t, R)


def _power_tail(t, values, threshold):
    """Fit |values| = a t^p on the smallest grid points; the sign is that of the smallest t."""
    magnitude = np.abs(values[:TAIL_FIT_POINTS])
    if np.all(magnitude <= UNDERFLOW):
        return 0.0, np.inf
    keep = magnitude > UNDERFLOW
    p, log_a = np.polyfit(np.log(t[:TAIL_FIT_POINTS][keep]), np.log(magnitude[keep]), 1)
    if p <= threshold:
        raise IntegrabilityError(
            f"Upsilon decays like t^{p:.3f}, not faster than t^{threshold:.3f}: "
            "the improper integral may diverge",
            exponent=float(p),
        )
    return float(np.sign(values[0]) * math.exp(log_a)), float(p)


def upsilon_beta(u, bundle, f, pairs, sphere_mesh, lambdas, R, grid_count=12, mesh=None):
    """
    Fourier coefficients and beta_m of the limiting profile for the cluster `pairs`.

        beta_m = phi_m(R)/R^{k0/2}
                 + (2N + k0 - 2)/(2(N + k0 - 1)) int_0^R t^{-N-k0/2} Upsilon_m dt
                 + k0 R^{-N+1-k0}/(2(N + k0 - 1)) int_0^R t^{k0/2-1} Upsilon_m dt

    The integrals use Simpson's rule in log t on a geometric grid from
    max(R/10, 4 h_local) to R and a fitted power law below it.

    Raises:
        PreconditionError: If the pairs are not one matched cluster or lambdas exceed R
        IntegrabilityError: If Upsilon decays too slowly for the first integral
    """
    k_values = {pair.k_index for pair in pairs}
    if len(k_values) != 1 or None in k_values:
        raise PreconditionError("upsilon_beta needs the pairs of one matched eigenvalue")
    k0 = k_values.pop()
    if any(lam > R * (1.0 + 1e-12) for lam in lambdas):
        raise PreconditionError(f"Blow-up scales must not exceed R = {R}")
    dim_n = bundle.crack.dim_n
    lambdas = sorted(float(lam) for lam in lambdas)

    phi = np.array([[fourier_coefficient(u, pair, sphere_mesh, lam) for pair in pairs] for lam in lambdas])
    phi_R = np.array([fourier_coefficient(u, pair, sphere_mesh, R) for pair in pairs])
    flat_free = bundle.crack.is_flat and f.is_zero
    ups = np.array([upsilon(u, bundle, f, pairs, sphere_mesh, lam, mesh) for lam in lambdas])

    first = np.zeros(len(pairs))
    second = np.zeros(len(pairs))
    exponents = [None] * len(pairs)
    if not flat_free:
        t_min = _start_radius(_quadrature_mesh(u, mesh), R)
        grid = geometric_grid(t_min, R, grid_count)
        values = np.array([upsilon(u, bundle, f, pairs, sphere_mesh, t, mesh) for t in grid])
        threshold = dim_n + 0.5 * k0 - 1.0 + INTEGRABILITY_MARGIN
        log_t = np.log(grid)
        for m in range(len(pairs)):
            a, p = _power_tail(grid, values[:, m], threshold)
            exponents[m] = p
            w1 = grid ** (1.0 - dim_n - 0.5 * k0)
            w2 = grid ** (0.5 * k0)
            first[m] = simpson(values[:, m] * w1, x=log_t)
            second[m] = simpson(values[:, m] * w2, x=log_t)
            if a != 0.0:
                first[m] += a * t_min ** (p - dim_n - 0.5 * k0 + 1.0) / (p - dim_n - 0.5 * k0 + 1.0)
                second[m] += a * t_min ** (p + 0.5 * k0) / (p + 0.5 * k0)

    c1 = (2.0 * dim_n + k0 - 2.0) / (2.0 * (dim_n + k0 - 1.0))
    c2 = k0 * R ** (-dim_n + 1.0 - k0) / (2.0 * (dim_n + k0 - 1.0))
    beta = phi_R / R ** (0.5 * k0) + c1 * first + c2 * second
    logging.info(f"beta at R={R:.4g}: {np.array2string(beta, precision=6)}")
    return FourierTable(
        lambdas,
        k0,
        phi,
        ups,
        beta,
        float(R),
        dim_n,
        integrals={
            "phi_R": phi_R.tolist(),
            "first_integral": first.tolist(),
            "second_integral": second.tolist(),
            "tail_exponents": exponents,
        },
    )


def beta_spread(tables):
    """Largest relative difference of the beta vectors across tables."""
    betas = np.stack([table.beta for table in tables])
    scale = np.max(np.abs(betas))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(betas - betas[0])) / scale)


# -- blow-up limits -----------------------------------------------------------------


def blowup_convergence(u, bundle, lambdas, pairs, sphere_mesh, k0, mesh=None):
    """
    H1(B_1) distance from U^lambda to |x|^{k0/2} Psi(x/|x|), Psi the normalized projection
    of U^lambda on the span of the cluster `pairs`.

    Returns:
        list: dicts with lambda, h1 and l2 errors and the projection coefficients

    Raises:
        PreconditionError: If k0 is unmatched or the pairs belong to another eigenvalue
    """
    if k0 is None or not pairs or any(pair.k_index != k0 for pair in pairs):
        raise PreconditionError(f"Blow-up comparison needs the eigen-cluster of k0 = {k0}")
    rows = []
    for lam in sorted(lambdas, reverse=True):
        u_lam = blowup_field(u, bundle, lam)
        coefficients = np.array([fourier_coefficient(u_lam, pair, sphere_mesh, 1.0) for pair in pairs])
        norm = np.linalg.norm(coefficients)
        if norm == 0:
            raise UnderflowError(f"U^lambda has no component on the k0 cluster at lambda={lam}")
        target = HomogeneousExtension(sphere_mesh, pairs, coefficients / norm, 0.5 * k0)
        quad_mesh = None if isinstance(u_lam, ScalarField) else _quadrature_mesh(u, mesh).scaled(1.0 / lam)
        distance = h1_distance(u_lam, target, 1.0, mesh=quad_mesh)
        logging.info(f"Blow-up at lambda={lam:.4g}: H1 error {distance['h1']:.4e}")
        rows.append({"lambda": lam, **distance, "coefficients": coefficients.tolist()})
    return rows


def asymptotic_profile_error(u, table, pairs, sphere_mesh, lambdas, mesh=None):
    """H1(B_1) distance between U(lambda x)/lambda^{k0/2} and |x|^{k0/2} sum beta_m Y_m."""
    target = HomogeneousExtension(sphere_mesh, pairs, table.beta, table.ell)
    base = _quadrature_mesh(u, mesh)
    errors = []
    for lam in sorted(lambdas, reverse=True):
        scaled = RescaledField(u, lam, lam ** (-table.ell))
        errors.append(h1_distance(scaled, target, 1.0, mesh=base.scaled(1.0 / lam))["h1"])
    return errors


def downstairs_convergence(u, bundle, table, pairs, sphere_mesh, lambdas, mesh=None):
    """
    The same distance in the original variables, u(y) = U(F^{-1}(y)), with gradients taken
    through Jac F^{-1}.
    """
    pulled = PullbackField(u, bundle)
    target = HomogeneousExtension(sphere_mesh, pairs, table.beta, table.ell)
    base = _quadrature_mesh(u, mesh)
    errors = []
    for lam in sorted(lambdas, reverse=True):
        scaled = RescaledField(pulled, lam, lam ** (-table.ell))
        errors.append(h1_distance(scaled, target, 1.0, mesh=base.scaled(1.0 / lam))["h1"])
    return errors


def vanishing_order(u, bundle, radii, mesh=None):
    """
    Slope of log sqrt(H(r)) against log r over the three smallest radii.

    Raises:
        TrivialFieldError: If u vanishes identically
    """
    if _is_trivial(u):
        raise TrivialFieldError("A trivial field has no finite vanishing order")
    radii = np.sort(np.asarray(radii, dtype=float))[:FIT_POINTS]
    mesh = _quadrature_mesh(u, mesh)
    for r in radii:
        mesh.require_resolved(r)
    values = np.array([height(u, bundle, r) for r in radii])
    if np.any(values < UNDERFLOW):
        raise TrivialFieldError("H(r) vanishes at the smallest radii")
    slope, _ = np.polyfit(np.log(radii), 0.5 * np.log(values), 1)
    return float(slope)


def emit_profile(profile, csv_path, json_path=None):
    """CSV with header r,H,D,N and an optional JSON sidecar with the fit."""
    if len(profile.radii) == 0:
        raise DomainError("Cannot export an empty profile")
    frame = profile.to_frame()
    write_table(csv_path, {column: frame[column].to_numpy() for column in frame.columns})
    if json_path is not None:
        write_json(json_path, profile.summary())


__all__ = [
    "FieldLike",
    "FourierTable",
    "HomogeneousExtension",
    "PullbackField",
    "RadialProfile",
    "RescaledField",
    "asymptotic_profile_error",
    "beta_spread",
    "blowup_convergence",
    "blowup_field",
    "doubling_bounds",
    "doubling_check",
    "downstairs_convergence",
    "emit_profile",
    "estimate_limit",
    "fourier_coefficient",
    "frequency_profile",
    "height",
    "height_energy",
    "height_limit",
    "parseval_check",
    "renormalization",
    "upsilon",
    "upsilon_beta",
    "vanishing_order",
]
