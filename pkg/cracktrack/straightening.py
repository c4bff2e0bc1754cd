#!/usr/bin/env python
# coding: utf-8

"""
The straightening shear and the coefficient fields it induces.

F(x', x_N, x_{N+1}) = (x', x_N + g(x'), x_{N+1}) maps the flat slit onto the crack. With
J = Jac F the pulled-back operator has matrix A = J^{-1} J^{-T} (det J = 1):

    A = [[I, -grad g, 0], [-grad g^T, 1 + |grad g|^2, 0], [0, 0, 1]]

and the derived fields mu = Ax.x/|x|^2, beta = Ax/mu and dA(x)v1v2 with components
sum_jk d_l a_jk v1_j v2_k. A depends on x' only. All evaluators take points of shape
(P, N+1) and are exact for polynomial cracks.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import sympy as smp

from cracktrack.crack_geometry import CrackSpec, evaluate_terms
from cracktrack.errors import ConstructionError, DomainError, SingularityError

ELLIPTICITY_FLOOR = 0.5
NORM_CEILING = 2.0
MIN_RADIUS = 1e-3
SAMPLES_PER_RADIUS = 1000


def _points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise DomainError(f"Expected points with {dim} coordinates")
    return x.reshape(-1, dim), x.shape[:-1]


class CoefficientBundle:
    """
    Evaluators for F, F^{-1}, Jac F, A, mu, beta, det Jac F and dA for one crack.

    Built by `build_bundle`; immutable afterwards.
    """

    def __init__(self, crack, r_tilde=None, lipschitz_bound=None):
        self.crack = crack
        self.dim = crack.dim_n + 1
        self.r_tilde = r_tilde
        self.lipschitz_bound = lipschitz_bound

    # -- the map -----------------------------------------------------------------

    def forward(self, x):
        x, shape = _points(x, self.dim)
        y = x.copy()
        n = self.crack.dim_n
        y[:, n - 1] += self.crack.g(x[:, : n - 1])
        return y.reshape(*shape, self.dim)

    def inverse(self, y):
        y, shape = _points(y, self.dim)
        x = y.copy()
        n = self.crack.dim_n
        x[:, n - 1] -= self.crack.g(y[:, : n - 1])
        return x.reshape(*shape, self.dim)

    def jacobian(self, x):
        """Jac F, shape (P, N+1, N+1): identity plus grad g in row N."""
        x, _ = _points(x, self.dim)
        n = self.crack.dim_n
        jac = np.broadcast_to(np.eye(self.dim), (len(x), self.dim, self.dim)).copy()
        jac[:, n - 1, : n - 1] = self.crack.grad_g(x[:, : n - 1])
        return jac

    def inverse_jacobian(self, x):
        """Jac F^{-1} evaluated at F(x) equals (Jac F(x))^{-1} = I - e_N grad g^T."""
        x, _ = _points(x, self.dim)
        n = self.crack.dim_n
        jac = np.broadcast_to(np.eye(self.dim), (len(x), self.dim, self.dim)).copy()
        jac[:, n - 1, : n - 1] = -self.crack.grad_g(x[:, : n - 1])
        return jac

    def det_jac(self, x):
        x, _ = _points(x, self.dim)
        return np.ones(len(x))

    # -- coefficients ------------------------------------------------------------

    def matrix(self, x):
        """A(x), shape (P, N+1, N+1)."""
        x, _ = _points(x, self.dim)
        n = self.crack.dim_n
        grad = self.crack.grad_g(x[:, : n - 1])
        a = np.broadcast_to(np.eye(self.dim), (len(x), self.dim, self.dim)).copy()
        a[:, : n - 1, n - 1] = -grad
        a[:, n - 1, : n - 1] = -grad
        a[:, n - 1, n - 1] = 1.0 + np.sum(grad**2, axis=-1)
        return a

    def matrix_derivative(self, x):
        """d_l A(x), shape (P, l, N+1, N+1); zero for l >= N since A depends on x' only."""
        x, _ = _points(x, self.dim)
        n = self.crack.dim_n
        xp = x[:, : n - 1]
        grad = self.crack.grad_g(xp)
        hess = self.crack.hessian_g(xp)
        da = np.zeros((len(x), self.dim, self.dim, self.dim))
        da[:, : n - 1, : n - 1, n - 1] = -hess
        da[:, : n - 1, n - 1, : n - 1] = -hess
        da[:, : n - 1, n - 1, n - 1] = 2.0 * np.einsum("pi,pil->pl", grad, hess)
        return da

    def mu(self, x):
        """mu(x) = A(x)x.x / |x|^2, with mu(0) = 1."""
        x, _ = _points(x, self.dim)
        ax = np.einsum("pij,pj->pi", self.matrix(x), x)
        s = np.sum(x * x, axis=-1)
        out = np.ones(len(x))
        nonzero = s > 0
        out[nonzero] = np.sum(ax * x, axis=-1)[nonzero] / s[nonzero]
        return out

    def beta(self, x):
        """beta(x) = A(x)x / mu(x)."""
        x, _ = _points(x, self.dim)
        ax = np.einsum("pij,pj->pi", self.matrix(x), x)
        return ax / self.mu(x)[:, None]

    def grad_mu(self, x):
        """Gradient of mu, shape (P, N+1)."""
        x, _ = _points(x, self.dim)
        a = self.matrix(x)
        da = self.matrix_derivative(x)
        ax = np.einsum("pij,pj->pi", a, x)
        s = np.sum(x * x, axis=-1)[:, None]
        q = np.sum(ax * x, axis=-1)[:, None]
        dq = 2.0 * ax + np.einsum("pi,plij,pj->pl", x, da, x)
        return dq / s - 2.0 * q * x / s**2

    def jac_beta(self, x):
        """(Jac beta)_{ij} = d_j beta_i, shape (P, N+1, N+1)."""
        x, _ = _points(x, self.dim)
        a = self.matrix(x)
        da = self.matrix_derivative(x)
        ax = np.einsum("pij,pj->pi", a, x)
        mu = self.mu(x)[:, None]
        d_ax = a + np.einsum("pjik,pk->pij", da, x)
        return d_ax / mu[..., None] - np.einsum("pi,pj->pij", ax, self.grad_mu(x)) / mu[..., None] ** 2

    def div_beta(self, x):
        return np.trace(self.jac_beta(x), axis1=1, axis2=2)

    def dA(self, x, v1, v2):
        """Vectors (sum_jk d_l a_jk v1_j v2_k)_l, shape (P, N+1); last entry is zero."""
        x, _ = _points(x, self.dim)
        v1 = np.broadcast_to(np.asarray(v1, dtype=float), x.shape)
        v2 = np.broadcast_to(np.asarray(v2, dtype=float), x.shape)
        return np.einsum("pljk,pj,pk->pl", self.matrix_derivative(x), v1, v2)

    def torch_matrix(self, x):
        """A(x) for a torch tensor of points, built from the same polynomial terms."""
        import torch

        n = self.crack.dim_n
        xp = x[..., : n - 1]
        grad = torch.stack(
            [evaluate_terms(xp, powers, coefs) for powers, coefs in self.crack.gradient_terms()],
            dim=-1,
        )
        eye = torch.eye(self.dim, dtype=x.dtype)
        a = eye.expand(*x.shape[:-1], self.dim, self.dim).clone()
        a[..., : n - 1, n - 1] = -grad
        a[..., n - 1, : n - 1] = -grad
        a[..., n - 1, n - 1] = 1.0 + (grad**2).sum(dim=-1)
        return a

    def provenance(self):
        return {
            "crack": self.crack.to_dict(),
            "r_tilde": self.r_tilde,
            "lipschitz_bound": self.lipschitz_bound,
        }


def _ball_samples(rng, radius, count, dim):
    """Half the samples on the sphere of `radius`, half uniformly inside."""
    directions = rng.normal(size=(count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = np.full(count, radius)
    half = count // 2
    radii[half:] = radius * rng.uniform(size=count - half) ** (1.0 / dim)
    return directions * radii[:, None]


def _normalization_holds(bundle, points):
    eig = np.linalg.eigvalsh(bundle.matrix(points))
    return (
        eig[:, 0].min() >= ELLIPTICITY_FLOOR
        and eig[:, -1].max() <= NORM_CEILING
        and bundle.mu(points).min() >= ELLIPTICITY_FLOOR
    )


def build_bundle(crack, seed=0):
    """
    Build the coefficient bundle of a crack.

    r_tilde is the first radius of the halving sequence starting at the crack's domain
    radius at which A is 1/2-elliptic, ||A|| <= 2 and mu >= 1/2 on 10^3 sample points.

    Args:
        crack (CrackSpec): The crack
        seed (int): Seed of the sampling generator

    Returns:
        CoefficientBundle: The bundle

    Raises:
        ConstructionError: If the normalization fails even at radius 1e-3
    """
    rng = np.random.default_rng(seed)
    bundle = CoefficientBundle(crack)
    dim = crack.dim_n + 1
    radius = crack.domain_radius
    while True:
        if _normalization_holds(bundle, _ball_samples(rng, radius, SAMPLES_PER_RADIUS, dim)):
            break
        radius *= 0.5
        if radius < MIN_RADIUS:
            raise ConstructionError(
                "Ellipticity/norm normalization of A fails at radius 1e-3: crack too wild"
            )
    bundle.r_tilde = radius

    pairs = _ball_samples(rng, radius, 2 * SAMPLES_PER_RADIUS, dim).reshape(-1, 2, dim)
    diff = bundle.matrix(pairs[:, 0]) - bundle.matrix(pairs[:, 1])
    dist = np.linalg.norm(pairs[:, 0] - pairs[:, 1], axis=-1)
    bundle.lipschitz_bound = float(np.max(np.linalg.norm(diff, ord=2, axis=(1, 2)) / dist))
    logging.info(
        f"Built bundle for {crack.family} crack: r_tilde={radius:.4g}, "
        f"lipschitz_bound={bundle.lipschitz_bound:.4g}"
    )
    return bundle


def dA_form(bundle, x, v1, v2):
    """dA(x)v1v2 for a single point or a batch."""
    x = np.asarray(x, dtype=float)
    out = bundle.dA(x.reshape(-1, bundle.dim), v1, v2)
    return out[0] if x.ndim == 1 else out


def straighten_point(bundle, p, direction="forward"):
    """
    Apply F ("forward") or F^{-1} ("inverse") to a point or batch.

    Raises:
        DomainError: If a point lies outside the ball of radius r_tilde
    """
    p = np.asarray(p, dtype=float)
    if bundle.r_tilde is not None and np.any(
        np.linalg.norm(p, axis=-1) > bundle.r_tilde * (1.0 + 1e-12) + 1e-12
    ):
        raise DomainError(f"Point outside the validity radius r_tilde={bundle.r_tilde}")
    if direction == "forward":
        return bundle.forward(p)
    if direction == "inverse":
        return bundle.inverse(p)
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction}")


def asymptotic_constants(bundle, radii=(0.2, 0.1, 0.05, 0.025), samples=400, seed=0):
    """
    Fitted constants K for ||A - Id|| <= K r, |mu - 1| <= K r, |beta - x| <= K r^2 and
    ||Jac beta - Id|| <= K r over spheres of the given radii.

    Returns:
        dict: name -> (per-radius maxima, fitted K)
    """
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(samples, bundle.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    report = {"A": [], "mu": [], "beta": [], "jac_beta": []}
    for r in radii:
        x = r * directions
        eye = np.eye(bundle.dim)
        report["A"].append(np.linalg.norm(bundle.matrix(x) - eye, ord=2, axis=(1, 2)).max())
        report["mu"].append(np.abs(bundle.mu(x) - 1.0).max())
        report["beta"].append(np.linalg.norm(bundle.beta(x) - x, axis=1).max())
        report["jac_beta"].append(np.linalg.norm(bundle.jac_beta(x) - eye, ord=2, axis=(1, 2)).max())
    radii = np.asarray(radii, dtype=float)
    powers = {"A": 1, "mu": 1, "beta": 2, "jac_beta": 1}
    return {
        name: (np.asarray(values), float(np.max(np.asarray(values) / radii ** powers[name])))
        for name, values in report.items()
    }


# -- potentials ------------------------------------------------------------------


@dataclass(frozen=True)
class PotentialSpec:
    """
    The potential f of the equation -div(A grad U) = f~ U.

    mode "a1": f(x) = amplitude * |x|^{-2+delta}, not evaluated at the origin for any delta.
    mode "a2": a smooth sympy expression in x1..x{N+1}, with integrability exponent p
    (p = inf for globally smooth expressions).
    """

    mode: str
    delta: float = 1.0
    amplitude: float = 1.0
    expression: str = "0"
    p: float = float("inf")
    dim_n: int = 2
    _value: object = field(default=None, init=False, repr=False, compare=False)
    _gradient: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.mode == "a1":
            if not self.delta > 0:
                raise ConstructionError(f"mode a1 needs delta > 0, got {self.delta}")
        elif self.mode == "a2":
            if not self.p > (self.dim_n + 1) / 2.0:
                raise ConstructionError(f"mode a2 needs p > (N+1)/2, got {self.p}")
            symbols = smp.symbols(f"x1:{self.dim_n + 2}")
            try:
                expr = smp.sympify(self.expression, locals={str(s): s for s in symbols})
            except (smp.SympifyError, TypeError) as e:
                raise ConstructionError(f"Cannot parse potential '{self.expression}': {e}")
            if expr.free_symbols - set(symbols):
                raise ConstructionError(
                    f"Potential uses unknown symbols {expr.free_symbols - set(symbols)}"
                )
            object.__setattr__(self, "_value", smp.lambdify(symbols, expr, "numpy"))
            gradient = [smp.lambdify(symbols, smp.diff(expr, s), "numpy") for s in symbols]
            object.__setattr__(self, "_gradient", gradient)
        else:
            raise ConstructionError(f"Unknown potential mode '{self.mode}'")

    @classmethod
    def zero(cls, dim_n=2):
        return cls(mode="a2", expression="0", dim_n=dim_n)

    @classmethod
    def from_dict(cls, data):
        p = data.get("p", "inf")
        return cls(
            mode=data["mode"],
            delta=float(data.get("delta", 1.0)),
            amplitude=float(data.get("amplitude", 1.0)),
            expression=str(data.get("expression", "0")),
            p=float(p),
            dim_n=int(data.get("dim_n", 2)),
        )

    def to_dict(self):
        if self.mode == "a1":
            return {"mode": "a1", "delta": self.delta, "amplitude": self.amplitude, "dim_n": self.dim_n}
        return {"mode": "a2", "expression": self.expression, "p": self.p, "dim_n": self.dim_n}

    @property
    def is_zero(self):
        return (self.mode == "a2" and smp.sympify(self.expression) == 0) or (
            self.mode == "a1" and self.amplitude == 0.0
        )

    def epsilon(self):
        """delta under a1, (2p - N - 1)/p under a2 (2 when p is infinite)."""
        if self.mode == "a1":
            return self.delta
        if np.isinf(self.p):
            return 2.0
        return (2.0 * self.p - self.dim_n - 1.0) / self.p

    def eps_bar(self):
        """0 if epsilon - 1 >= 0, else epsilon - 1."""
        return min(0.0, self.epsilon() - 1.0)

    def check_origin(self, x):
        """
        Raises:
            SingularityError: If a nonzero mode-a1 potential is evaluated at the origin
        """
        if self.mode == "a1" and self.amplitude != 0.0 and np.any(np.linalg.norm(x, axis=-1) == 0.0):
            raise SingularityError(f"Mode a1 potential (delta={self.delta}) is not defined at the origin")

    def value(self, x):
        """
        f(x) at points of shape (P, N+1).

        Raises:
            SingularityError: If a mode-a1 potential is evaluated at the origin
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.mode == "a1":
            self.check_origin(x)
            return self.amplitude * np.linalg.norm(x, axis=-1) ** (self.delta - 2.0)
        out = self._value(*x.T)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape[:1]).copy()

    def gradient(self, x):
        """
        grad f(x), shape (P, N+1).

        Raises:
            SingularityError: If a mode-a1 potential is evaluated at the origin
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.mode == "a1":
            self.check_origin(x)
            norm = np.linalg.norm(x, axis=-1, keepdims=True)
            return self.amplitude * (self.delta - 2.0) * norm ** (self.delta - 4.0) * x
        columns = [np.broadcast_to(np.asarray(g(*x.T), dtype=float), x.shape[:1]) for g in self._gradient]
        return np.stack(columns, axis=-1)

    def bound(self, x):
        """Pointwise majorant used by the coercivity constant: amplitude |x|^{-2+delta}."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.abs(self.amplitude) * np.linalg.norm(x, axis=-1) ** (self.delta - 2.0)


def transform_potential(bundle, f, x):
    """
    f~(x) = |det Jac F(x)| f(F(x)).

    Raises:
        SingularityError: At x = 0 in mode a1
    """
    x = np.asarray(x, dtype=float)
    points = x.reshape(-1, bundle.dim)
    f.check_origin(points)
    out = np.abs(bundle.det_jac(points)) * f.value(bundle.forward(points))
    return float(out[0]) if x.ndim == 1 else out


def transform_potential_gradient(bundle, f, x):
    """grad f~(x) = Jac F(x)^T grad f(F(x)) (det Jac F = 1)."""
    points = np.asarray(x, dtype=float).reshape(-1, bundle.dim)
    return np.einsum("pji,pj->pi", bundle.jacobian(points), f.gradient(bundle.forward(points)))


__all__ = [
    "CoefficientBundle",
    "CrackSpec",
    "PotentialSpec",
    "asymptotic_constants",
    "build_bundle",
    "dA_form",
    "straighten_point",
    "transform_potential",
    "transform_potential_gradient",
]
