#!/usr/bin/env python
# coding: utf-8

"""
Numerical audits of the inequalities and identities behind the frequency argument.

Each audit returns an `AuditReport` with a signed residual. For inequalities the report
passes when residual >= -tolerance, for identities when |residual| <= tolerance.
Fields are sampled the same way as in `frequency_analysis`: P1 fields on their own mesh,
closed-form fields on an explicit quadrature mesh.
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
import sympy as smp
import torch

from cracktrack.crack_geometry import evaluate_terms
from cracktrack.errors import DomainError, PreconditionError, RadiusTooLargeError
from cracktrack.mesh_fem import ScalarField, approx_profile, ball_quadrature, sphere_points
from cracktrack.straightening import transform_potential, transform_potential_gradient
from cracktrack.utils.data_utils import write_json
from cracktrack.utils.quadrature_utils import triangle_quadrature

HARDY_TOLERANCE = 0.01
COERCIVITY_TOLERANCE = 0.01
POHOZAEV_TOLERANCE = 0.03
BOUNDARY_TOLERANCE = 0.02
RELLICH_TOLERANCE = 1e-8
STAR_TOLERANCE = 1e-10
FIT_MARGIN = 1.1
XI_RADII = 100
XI_DIRECTIONS = 100
POHOZAEV_MODES = ("a1_inequality", "a2_inequality", "approx_identity")


@dataclass
class AuditReport:
    """
    Outcome of one audit.

    Attributes:
        name (str): Audit name
        lhs (float): Left-hand side
        rhs (float): Right-hand side
        residual (float): Signed residual, nonnegative when an inequality holds
        tolerance (float): Absolute tolerance
        passed (bool): Verdict
        kind (str): "inequality" or "identity"
        context (dict): Radius, field, mode and audit specific values
    """

    name: str
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    passed: bool
    kind: str = "inequality"
    context: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _report(name, lhs, rhs, residual, tolerance, kind, context, extra_condition=True):
    if kind == "identity":
        passed = abs(residual) <= tolerance
    else:
        passed = residual >= -tolerance
    report = AuditReport(
        name,
        float(lhs),
        float(rhs),
        float(residual),
        float(tolerance),
        bool(passed and extra_condition),
        kind,
        context,
    )
    level = logging.INFO if report.passed else logging.WARNING
    logging.log(
        level,
        f"Audit {name} at {context.get('radius')}: residual {residual:.4e} "
        f"(tolerance {tolerance:.3e}) -> {'pass' if report.passed else 'FAIL'}",
    )
    return report


def _field_id(u):
    if isinstance(u, ScalarField):
        return f"p1:{u.mesh.checksum}"
    return getattr(u, "name", type(u).__name__)


def _quadrature_mesh(u, mesh):
    if mesh is not None:
        return mesh
    if isinstance(u, ScalarField):
        return u.mesh
    raise DomainError("Closed-form fields need an explicit quadrature mesh")


def _volume(u, r, mesh, singular=False):
    mesh = _quadrature_mesh(u, mesh)
    mesh.require_resolved(r)
    quad = ball_quadrature(mesh, r, singular=singular)
    values, grads = quad.sample(u)
    return quad, values, grads


def _surface(u, r, outside="extrapolate"):
    points, weights, unit = sphere_points(r)
    values, grads = u.sample(points, outside=outside)
    return points, weights, unit, values, grads


# -- Hardy and coercivity -----------------------------------------------------------


def hardy_residual(u, r, mesh=None, dim_n=2, tolerance=HARDY_TOLERANCE):
    """
    ((N-1)/2)^2 int_{B_r} U^2/|x|^2 <= int_{B_r} |grad U|^2 + (N-1)/(2r) int_{dB_r} U^2.

    The tolerance is relative to the right-hand side.
    """
    quad, values, grads = _volume(u, r, mesh, singular=True)
    norm_sq = np.sum(quad.points**2, axis=1)
    lhs = ((dim_n - 1) / 2.0) ** 2 * quad.integrate(values**2 / norm_sq)
    _, weights, _, s_values, _ = _surface(u, r)
    rhs = quad.integrate(np.sum(grads**2, axis=1)) + (dim_n - 1) / (2.0 * r) * float(
        np.sum(weights * s_values**2)
    )
    return _report(
        "hardy",
        lhs,
        rhs,
        rhs - lhs,
        tolerance * abs(rhs),
        "inequality",
        {"radius": r, "field": _field_id(u)},
    )


def default_coercivity_constant(f, dim_n=2):
    """4 amplitude/(N-1) under a1; None under a2, where C has to be fitted."""
    if f.is_zero:
        return 0.0
    if f.mode == "a1":
        return 4.0 * abs(f.amplitude) / (dim_n - 1)
    return None


def _coercivity_terms(u, bundle, f, r, mesh):
    quad, values, grads = _volume(u, r, mesh, singular=f.mode == "a1")
    a = bundle.matrix(quad.points)
    energy = quad.integrate(np.einsum("pi,pij,pj->p", grads, a, grads))
    potential = 0.0
    if not f.is_zero:
        potential = quad.integrate(np.abs(transform_potential(bundle, f, quad.points)) * values**2)
    dirichlet = quad.integrate(np.sum(grads**2, axis=1))
    points, weights, _, s_values, _ = _surface(u, r)
    boundary = float(np.sum(weights * bundle.mu(points) * s_values**2))
    return energy, potential, dirichlet, boundary


def coercivity_audit(u, bundle, f, r, mesh=None, constant=None, tolerance=COERCIVITY_TOLERANCE):
    """
    int A grad U.grad U - int |f~| U^2 + C r^{-1+eps} int_{dB_r} mu U^2 >= 1/4 int |grad U|^2.

    Args:
        constant (float, optional): C; defaults to 4 amplitude/(N-1) under a1

    Raises:
        PreconditionError: Under a2 without a fitted constant
        RadiusTooLargeError: If C r^eps >= (N-1)/4
    """
    dim_n = bundle.crack.dim_n
    if constant is None:
        constant = default_coercivity_constant(f, dim_n)
    if constant is None:
        raise PreconditionError("Mode a2 coercivity needs a fitted constant, see fit_coercivity_constant")
    eps = f.epsilon()
    if constant * r**eps >= (dim_n - 1) / 4.0:
        raise RadiusTooLargeError(
            f"C r^eps = {constant * r**eps:.4g} >= (N-1)/4 at r = {r}: radius too large"
        )
    energy, potential, dirichlet, boundary = _coercivity_terms(u, bundle, f, r, mesh)
    lhs = energy - potential + constant * r ** (eps - 1.0) * boundary
    rhs = 0.25 * dirichlet
    return _report(
        "coercivity",
        lhs,
        rhs,
        lhs - rhs,
        tolerance * abs(rhs),
        "inequality",
        {"radius": r, "field": _field_id(u), "mode": f.mode, "C": constant, "eps": eps},
    )


def fit_coercivity_constant(fields, bundle, f, radii, mesh=None, margin=FIT_MARGIN):
    """
    Smallest C making the coercivity inequality hold on the probe set, times `margin`.

    Returns:
        float: The fitted constant, 0 when no probe needs a boundary term
    """
    eps = f.epsilon()
    needed = 0.0
    for u in fields:
        for r in radii:
            energy, potential, dirichlet, boundary = _coercivity_terms(u, bundle, f, r, mesh)
            deficit = 0.25 * dirichlet - energy + potential
            if deficit > 0 and boundary > 0:
                needed = max(needed, deficit / (r ** (eps - 1.0) * boundary))
    constant = margin * needed
    logging.info(f"Fitted coercivity constant C = {constant:.6g} on {len(radii)} radii")
    return constant


def probe_coercivity_radius(fields, bundle, f, radii, mesh=None, constant=None, tolerance=COERCIVITY_TOLERANCE):
    """
    Largest probe radius below which coercivity passes for every probe field.

    A radius where the side condition fails counts as a failure.

    Returns:
        dict: r0 (None when no radius passes) and the reports
    """
    reports = []
    r0 = None
    for r in sorted(radii):
        passed = True
        for u in fields:
            try:
                report = coercivity_audit(u, bundle, f, r, mesh, constant, tolerance)
            except RadiusTooLargeError as e:
                logging.info(f"Coercivity probe stops at r = {r}: {e}")
                passed = False
                break
            reports.append(report)
            passed = passed and report.passed
        if not passed:
            break
        r0 = r
    logging.info(f"Coercivity radius r0 = {r0}")
    return {"r0": r0, "reports": reports}


def _fibonacci_directions(count, dim=3):
    """Nearly uniform unit vectors on S^2 (golden angle spiral)."""
    index = np.arange(count) + 0.5
    z = 1.0 - 2.0 * index / count
    rho = np.sqrt(1.0 - z**2)
    theta = math.pi * (3.0 - math.sqrt(5.0)) * index
    return np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)


def xi_f(f, r):
    """sup over B_r of |f(x)| |x|^2, sampled on 100 radii times 100 directions."""
    if f.is_zero:
        return 0.0
    radii = np.linspace(r / XI_RADII, r, XI_RADII)
    points = (radii[:, None, None] * _fibonacci_directions(XI_DIRECTIONS)[None]).reshape(-1, 3)
    values = np.abs(f.value(points)) * np.sum(points**2, axis=1)
    return float(np.max(values))


# -- Rellich-Necas --------------------------------------------------------------------


def random_cubic(rng, dim=3):
    """A random polynomial of degree <= 3 with small integer coefficients."""
    symbols = smp.symbols(f"x1:{dim + 1}")
    monomials = sorted(smp.itermonomials(symbols, 3), key=smp.default_sort_key)
    coefs = rng.integers(-3, 4, size=len(monomials))
    if not np.any(coefs):
        coefs[-1] = 1
    return sum(int(c) * m for c, m in zip(coefs, monomials))


def _polynomial_terms(v, dim):
    symbols = smp.symbols(f"x1:{dim + 1}")
    expr = smp.sympify(v, locals={str(s): s for s in symbols})
    poly = smp.Poly(expr, *symbols)
    terms = poly.terms()
    powers = np.array([p for p, _ in terms], dtype=np.int64).reshape(-1, dim)
    coefs = np.array([float(c) for _, c in terms])
    if poly.total_degree() > 3:
        raise PreconditionError(f"Rellich-Necas test polynomials have degree <= 3, got {poly.total_degree()}")
    return powers, coefs


def _divergence_side(bundle, x, powers, coefs):
    """div((A g.g) beta - 2 A g (beta.g)) by autograd, with g, Hess v for the other side."""
    x = torch.tensor(x, dtype=torch.float64, requires_grad=True)
    v = evaluate_terms(x, powers, coefs)
    (g,) = torch.autograd.grad(v.sum(), x, create_graph=True)
    a = bundle.torch_matrix(x)
    ax = torch.einsum("pij,pj->pi", a, x)
    mu = (ax * x).sum(dim=1) / (x * x).sum(dim=1)
    beta = ax / mu[:, None]
    ag = torch.einsum("pij,pj->pi", a, g)
    flux = (ag * g).sum(dim=1)[:, None] * beta - 2.0 * ag * (beta * g).sum(dim=1)[:, None]
    div = sum(_partial(flux[:, i], x)[:, i] for i in range(x.shape[1]))
    hess = torch.stack([_partial(g[:, i], x) for i in range(x.shape[1])], dim=1)
    return div.detach().numpy(), g.detach().numpy(), hess.detach().numpy()


def _partial(y, x):
    """Gradient of y.sum() with respect to x; zeros when y does not depend on x."""
    if not y.requires_grad:
        return torch.zeros_like(x)
    (grad,) = torch.autograd.grad(y.sum(), x, retain_graph=True, allow_unused=True)
    return torch.zeros_like(x) if grad is None else grad


def rellich_necas_residual(v, bundle, sample_points, tolerance=RELLICH_TOLERANCE):
    """
    Pointwise check of

        div((A grad v.grad v) beta - 2 A grad v (beta.grad v))
          = (div beta) A grad v.grad v - 2 Jac beta (A grad v).grad v
            + (dA grad v grad v).beta - 2 (beta.grad v) div(A grad v)

    The left side is differentiated by autograd through `torch_matrix`; the right side uses
    the analytic derivatives of the bundle.

    Args:
        v: Polynomial of degree <= 3 (sympy expression or string in x1, x2, x3)
        bundle (CoefficientBundle): Coefficients
        sample_points (np.ndarray): Points away from the origin, shape (P, 3)

    Returns:
        AuditReport: residual = max |LHS - RHS|, tolerance 1e-8 times the scale
    """
    x = np.asarray(sample_points, dtype=float).reshape(-1, bundle.dim)
    if np.any(np.linalg.norm(x, axis=1) == 0.0):
        raise DomainError("beta is not differentiable at the origin")
    powers, coefs = _polynomial_terms(v, bundle.dim)
    lhs, g, hess = _divergence_side(bundle, x, powers, coefs)

    a = bundle.matrix(x)
    da = bundle.matrix_derivative(x)
    beta = bundle.beta(x)
    ag = np.einsum("pij,pj->pi", a, g)
    div_ag = np.einsum("pij,pji->p", a, hess) + np.einsum("piij,pj->p", da, g)
    rhs = (
        bundle.div_beta(x) * np.sum(ag * g, axis=1)
        - 2.0 * np.einsum("pij,pj,pi->p", bundle.jac_beta(x), ag, g)
        + np.sum(bundle.dA(x, g, g) * beta, axis=1)
        - 2.0 * np.sum(beta * g, axis=1) * div_ag
    )
    difference = np.abs(lhs - rhs)
    scale = 1.0 + float(np.max(np.abs(rhs)))
    worst = int(np.argmax(difference))
    return _report(
        "rellich_necas",
        lhs[worst],
        rhs[worst],
        -float(difference[worst]),
        tolerance * scale,
        "identity",
        {"radius": float(np.linalg.norm(x, axis=1).max()), "field": str(v), "points": len(x)},
    )


def rellich_necas_sweep(bundles, count=20, points=50, seed=0, radius=0.25, tolerance=RELLICH_TOLERANCE):
    """Random cubics times bundles on points sampled in B_radius minus a small core."""
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(count):
        v = random_cubic(rng)
        for bundle in bundles:
            directions = rng.normal(size=(points, bundle.dim))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
            sample = directions * radius * rng.uniform(0.05, 1.0, size=(points, 1))
            reports.append(rellich_necas_residual(v, bundle, sample, tolerance))
    return reports


# -- Pohozaev and the boundary identity ------------------------------------------------


def _gamma_normals(points, n, alpha):
    """Outward unit normals of B_{r,n} on gamma: (0, 1, -f~_n'(x3)) normalized."""
    t = np.abs(points[:, 2])
    slope = np.sign(points[:, 2]) * approx_profile(n, alpha, t).derivative
    normals = np.stack([np.zeros_like(t), np.ones_like(t), -slope], axis=1)
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def gamma_term(u, bundle, r):
    """int_{gamma_{r,n} cap B_r} (1/mu) (dU/dnu)^2 (A nu.nu)(A x.nu) ds on an approximating mesh."""
    mesh = u.mesh
    if mesh.kind != "approx_domain":
        raise PreconditionError("The gamma term lives on approximating-domain meshes only")
    coords = mesh.vertices[mesh.crack_faces]
    points, weights, _ = triangle_quadrature(coords)
    grads = np.repeat(u.element_gradients[mesh.crack_face_cells], points.shape[1], axis=0)
    points, weights = points.reshape(-1, 3), weights.reshape(-1)
    keep = np.linalg.norm(points, axis=1) <= r
    points, weights, grads = points[keep], weights[keep], grads[keep]
    if len(points) == 0:
        return 0.0, 0.0
    nu = _gamma_normals(points, mesh.params["n"], mesh.params["alpha"])
    a = bundle.matrix(points)
    a_nu = np.einsum("pij,pj->pi", a, nu)
    ax_nu = np.einsum("pij,pj,pi->p", a, points, nu)
    dnu = np.sum(grads * nu, axis=1)
    integrand = dnu**2 * np.sum(a_nu * nu, axis=1) * ax_nu / bundle.mu(points)
    return float(np.sum(weights * integrand)), float(ax_nu.min())


def _sphere_pohozaev(u, bundle, radius, outside):
    points, weights, unit, _, grads = _surface(u, radius, outside)
    a_grad = np.einsum("pij,pj->pi", bundle.matrix(points), grads)
    energy = float(np.sum(weights * np.sum(a_grad * grads, axis=1)))
    normal = float(np.sum(weights * np.sum(a_grad * unit, axis=1) ** 2 / bundle.mu(points)))
    return radius * energy - 2.0 * radius * normal


def _pohozaev_volume(quad, values, grads, bundle, f, mode):
    x = quad.points
    a = bundle.matrix(x)
    beta = bundle.beta(x)
    ag = np.einsum("pij,pj->pi", a, grads)
    integrand = (
        bundle.div_beta(x) * np.sum(ag * grads, axis=1)
        - 2.0 * np.einsum("pij,pj,pi->p", bundle.jac_beta(x), ag, grads)
        + np.sum(bundle.dA(x, grads, grads) * beta, axis=1)
    )
    total = quad.integrate(integrand)
    if f.is_zero:
        return total
    potential = transform_potential(bundle, f, x)
    if mode == "a2_inequality":
        divergence = potential * bundle.div_beta(x) + np.sum(
            transform_potential_gradient(bundle, f, x) * beta, axis=1
        )
        return total - quad.integrate(divergence * values**2)
    return total + 2.0 * quad.integrate(np.sum(beta * grads, axis=1) * potential * values)


def pohozaev_residual(
    u,
    bundle,
    f,
    r,
    mode="a1_inequality",
    mesh=None,
    inner_radius=None,
    expect_equality=False,
    tolerance=POHOZAEV_TOLERANCE,
):
    """
    Pohozaev audit on B_r.

    LHS = r int_{dB_r} A grad U.grad U - 2 r int_{dB_r} (A grad U.nu)^2 / mu.

    "a1_inequality": LHS >= volume terms + 2 int (beta.grad U) f~ U.
    "a2_inequality": LHS >= volume terms + r int_{dB_r} f~ U^2 - int (f~ div beta + grad f~.beta) U^2.
    "approx_identity": on an approximating-domain solve, LHS minus the gamma term (and the
    small sphere terms when `inner_radius` is given) equals the a1 right-hand side.

    The volume terms are (div beta) A grad U.grad U - 2 Jac beta (A grad U).grad U
    + (dA grad U grad U).beta. The tolerance is relative to |LHS| + |RHS|. With
    `expect_equality` an inequality mode is checked as an identity (homogeneous harmonic
    fields on a flat crack, where the dropped crack term vanishes).
    """
    if mode not in POHOZAEV_MODES:
        raise PreconditionError(f"Unknown Pohozaev mode '{mode}', expected one of {POHOZAEV_MODES}")
    identity = mode == "approx_identity"
    if identity and not (isinstance(u, ScalarField) and u.mesh.kind == "approx_domain"):
        raise PreconditionError("approx_identity needs a field solved on an approximating domain")
    outside = "zero" if identity else "extrapolate"

    quad, values, grads = _volume(u, r, mesh, singular=f.mode == "a1")
    rhs = _pohozaev_volume(quad, values, grads, bundle, f, mode)
    lhs = _sphere_pohozaev(u, bundle, r, outside)
    context = {"radius": r, "field": _field_id(u), "mode": mode}

    if mode == "a2_inequality" and not f.is_zero:
        points, weights, _, s_values, _ = _surface(u, r, outside)
        rhs += r * float(np.sum(weights * transform_potential(bundle, f, points) * s_values**2))

    sign_ok = True
    if identity:
        if inner_radius is not None:
            inner, inner_values, inner_grads = _volume(u, inner_radius, mesh, singular=f.mode == "a1")
            rhs -= _pohozaev_volume(inner, inner_values, inner_grads, bundle, f, mode)
            lhs -= _sphere_pohozaev(u, bundle, inner_radius, outside)
        gamma, min_ax_nu = gamma_term(u, bundle, r)
        lhs -= gamma
        sign_ok = gamma >= 0.0
        context.update({"gamma_term": gamma, "min_ax_nu": min_ax_nu, "n": u.mesh.params["n"]})
        logging.info(f"gamma term at r={r}: {gamma:.6e} (min A x.nu {min_ax_nu:.3e})")

    return _report(
        "pohozaev",
        lhs,
        rhs,
        lhs - rhs,
        tolerance * (abs(lhs) + abs(rhs)),
        "identity" if identity or expect_equality else "inequality",
        context,
        extra_condition=sign_ok,
    )


def boundary_identity_residual(u, bundle, f, r, mesh=None, tolerance=BOUNDARY_TOLERANCE):
    """int_{B_r} A grad U.grad U - int_{B_r} f~ U^2 = int_{dB_r} (A grad U.nu) U."""
    quad, values, grads = _volume(u, r, mesh, singular=f.mode == "a1")
    lhs = quad.integrate(np.einsum("pi,pij,pj->p", grads, bundle.matrix(quad.points), grads))
    if not f.is_zero:
        lhs -= quad.integrate(transform_potential(bundle, f, quad.points) * values**2)
    points, weights, unit, s_values, s_grads = _surface(u, r)
    flux = np.einsum("pij,pj,pi->p", bundle.matrix(points), s_grads, unit)
    rhs = float(np.sum(weights * flux * s_values))
    return _report(
        "boundary_identity",
        lhs,
        rhs,
        lhs - rhs,
        tolerance * max(abs(lhs), abs(rhs)),
        "identity",
        {"radius": r, "field": _field_id(u)},
    )


# -- star-shapedness of the approximating domains --------------------------------------


def star_shaped_upstairs(bundle, r, n, alpha, sample_count=4096):
    """
    min of A(x)x.nu(x) over a grid on gamma_{r,n} = {x2 = f~_n(x3)} cap B_r.

    Returns:
        dict: min_value, argmin and the number of samples

    Raises:
        DomainError: If gamma_{r,n} cap B_r is empty (n^{1/(2 alpha)} <= 1/r)
    """
    if not n ** (1.0 / (2.0 * alpha)) > 1.0 / r:
        raise DomainError(f"gamma is empty in B_{r}: need n^(1/(2 alpha)) > 1/r, got n={n}")
    side = max(2, int(math.ceil(math.sqrt(sample_count))))
    x1, x3 = np.meshgrid(np.linspace(-r, r, side), np.linspace(-r, r, side), indexing="ij")
    x1, x3 = x1.reshape(-1), x3.reshape(-1)
    points = np.stack([x1, approx_profile(n, alpha, np.abs(x3)).value, x3], axis=1)
    points = points[np.linalg.norm(points, axis=1) <= r]
    if len(points) == 0:
        raise DomainError(f"No samples of gamma inside B_{r}")
    nu = _gamma_normals(points, n, alpha)
    values = np.einsum("pij,pj,pi->p", bundle.matrix(points), points, nu)
    worst = int(np.argmin(values))
    logging.info(f"Star-shapedness n={n}: min A x.nu = {values[worst]:.4e} over {len(points)} samples")
    return {"min_value": float(values[worst]), "argmin": points[worst].tolist(), "count": len(points)}


def star_shaped_report(bundle, r, n, alpha, sample_count=4096, tolerance=STAR_TOLERANCE):
    result = star_shaped_upstairs(bundle, r, n, alpha, sample_count)
    return _report(
        "star_shaped",
        result["min_value"],
        0.0,
        result["min_value"],
        tolerance,
        "inequality",
        {"radius": r, "n": n, "alpha": alpha, "argmin": result["argmin"]},
    )


# -- reporting -----------------------------------------------------------------------


def format_table(reports):
    """Human-readable table of reports."""
    if not reports:
        return "(no audits)"
    frame = pd.DataFrame(
        [
            {
                "audit": report.name,
                "radius": report.context.get("radius"),
                "field": report.context.get("field", ""),
                "lhs": report.lhs,
                "rhs": report.rhs,
                "residual": report.residual,
                "tolerance": report.tolerance,
                "kind": report.kind,
                "verdict": "pass" if report.passed else "FAIL",
            }
            for report in reports
        ]
    )
    return frame.to_string(index=False, float_format=lambda value: f"{value:.6g}")


def export_reports(reports, path):
    """JSON array of reports."""
    return write_json(path, [report.to_dict() for report in reports])


def all_passed(reports):
    return all(report.passed for report in reports)


__all__ = [
    "AuditReport",
    "all_passed",
    "boundary_identity_residual",
    "coercivity_audit",
    "default_coercivity_constant",
    "export_reports",
    "fit_coercivity_constant",
    "format_table",
    "gamma_term",
    "hardy_residual",
    "pohozaev_residual",
    "probe_coercivity_radius",
    "random_cubic",
    "rellich_necas_residual",
    "rellich_necas_sweep",
    "star_shaped_report",
    "star_shaped_upstairs",
    "xi_f",
]
