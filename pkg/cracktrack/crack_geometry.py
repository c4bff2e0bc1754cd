#!/usr/bin/env python
# coding: utf-8

"""
Crack profiles and the crack sets they define.

A crack is the graph-bounded set Gamma = {x_N >= g(x'), x_{N+1} = 0} in R^{N+1}, with
g(0) = 0 and grad g(0) = 0. Its straightened counterpart is the flat slit
{x_N >= 0, x_{N+1} = 0}. Profiles are polynomials of total degree at most 4 stored as
term arrays (powers, coefficients), so every derivative is exact.

Coordinates are written (x', x_N, x_{N+1}); with N = 2 that is (x1, x2, x3).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from cracktrack.errors import ConstructionError, DomainError

FAMILIES = ("flat", "polynomial", "radial_quadratic")
MAX_DEGREE = 4
PLANE_TOLERANCE = 1e-12


def monomials(points, powers):
    """
    Evaluate every monomial x^p of `powers` at `points` by repeated multiplication.

    Works for numpy arrays and torch tensors alike (no pow with zero exponents, so
    autograd stays finite at the origin).

    Args:
        points: Array of shape (..., d)
        powers (np.ndarray): Integer exponents, shape (T, d)

    Returns:
        list: T arrays of shape (...)
    """
    values = []
    for term in powers:
        value = points[..., 0] * 0.0 + 1.0
        for axis, power in enumerate(term):
            for _ in range(int(power)):
                value = value * points[..., axis]
        values.append(value)
    return values


def evaluate_terms(points, powers, coefs):
    """Sum of coefs[t] * x^powers[t]; zero when there are no terms."""
    total = points[..., 0] * 0.0
    for coef, value in zip(coefs, monomials(points, powers)):
        total = total + float(coef) * value
    return total


def differentiate_terms(powers, coefs, axis):
    """Exact partial derivative of a polynomial in term form along `axis`."""
    keep = powers[:, axis] > 0
    new_powers = powers[keep].copy()
    new_coefs = coefs[keep] * new_powers[:, axis]
    new_powers[:, axis] -= 1
    return new_powers, new_coefs


@dataclass(frozen=True)
class CrackSpec:
    """
    Crack profile g: R^{N-1} -> R and the domain it lives in.

    Args:
        family (str): "flat", "polynomial" or "radial_quadratic"
        coeffs (tuple): Family parameters. radial_quadratic: (c,) for g = c|x'|^2.
            polynomial with N = 2: univariate (c0, c1, c2, c3, c4) with c0 = c1 = 0.
            polynomial with N > 2: ((powers...), coef) pairs.
        dim_n (int): N >= 2, the ambient space is R^{N+1}
        domain_radius (float): Radius r_bar of the ball where g is used
    """

    family: str
    coeffs: tuple = ()
    dim_n: int = 2
    domain_radius: float = 0.5
    powers: np.ndarray = field(init=False, repr=False, compare=False)
    coefs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConstructionError(f"Unknown crack family '{self.family}', expected {FAMILIES}")
        if int(self.dim_n) < 2:
            raise ConstructionError(f"dim_n must be at least 2, got {self.dim_n}")
        if not self.domain_radius > 0:
            raise ConstructionError(f"domain_radius must be positive, got {self.domain_radius}")
        powers, coefs = self._terms()
        degrees = powers.sum(axis=1)
        nonzero = coefs != 0.0
        if np.any(nonzero & (degrees < 2)):
            raise ConstructionError(
                "Crack profile must satisfy g(0) = 0 and grad g(0) = 0: "
                "constant and linear coefficients must vanish"
            )
        if np.any(nonzero & (degrees > MAX_DEGREE)):
            raise ConstructionError(f"Crack profile total degree exceeds {MAX_DEGREE}")
        object.__setattr__(self, "powers", powers[nonzero])
        object.__setattr__(self, "coefs", coefs[nonzero])

    def _terms(self):
        d = self.dim_n - 1
        if self.family == "flat":
            return np.zeros((0, d), dtype=np.int64), np.zeros(0)
        if self.family == "radial_quadratic":
            if len(self.coeffs) != 1:
                raise ConstructionError("radial_quadratic takes exactly one coefficient c")
            return 2 * np.eye(d, dtype=np.int64), np.full(d, float(self.coeffs[0]))
        if d == 1 and all(np.isscalar(c) for c in self.coeffs):
            coefs = np.asarray(self.coeffs, dtype=float)
            powers = np.arange(len(coefs), dtype=np.int64)[:, None]
            return powers, coefs
        try:
            powers = np.array([list(term[0]) for term in self.coeffs], dtype=np.int64)
            coefs = np.array([float(term[1]) for term in self.coeffs])
        except (TypeError, IndexError, ValueError):
            raise ConstructionError("polynomial coeffs must be ((powers...), coef) pairs")
        if powers.ndim != 2 or powers.shape[1] != d or np.any(powers < 0):
            raise ConstructionError(f"Each polynomial term needs {d} nonnegative powers")
        return powers, coefs

    @property
    def is_flat(self):
        return len(self.coefs) == 0

    def g(self, xp):
        """Crack profile g(x'), vectorized over the leading axes of xp."""
        return evaluate_terms(np.asarray(xp, dtype=float), self.powers, self.coefs)

    def grad_g(self, xp):
        """Exact gradient, shape (..., N-1)."""
        xp = np.asarray(xp, dtype=float)
        return np.stack(
            [
                evaluate_terms(xp, *differentiate_terms(self.powers, self.coefs, i))
                for i in range(self.dim_n - 1)
            ],
            axis=-1,
        )

    def hessian_g(self, xp):
        """Exact Hessian, shape (..., N-1, N-1)."""
        xp = np.asarray(xp, dtype=float)
        d = self.dim_n - 1
        rows = []
        for i in range(d):
            first = differentiate_terms(self.powers, self.coefs, i)
            rows.append(
                np.stack(
                    [evaluate_terms(xp, *differentiate_terms(*first, j)) for j in range(d)],
                    axis=-1,
                )
            )
        return np.stack(rows, axis=-2)

    def gradient_terms(self):
        """Term form of each partial derivative of g, for torch evaluation."""
        return [differentiate_terms(self.powers, self.coefs, i) for i in range(self.dim_n - 1)]

    @classmethod
    def from_dict(cls, data):
        coeffs = data.get("coeffs", [])
        coeffs = tuple(
            (tuple(c[0]), c[1]) if isinstance(c, (list, tuple)) else c for c in coeffs
        )
        return cls(
            family=data["family"],
            coeffs=coeffs,
            dim_n=int(data.get("dim_n", 2)),
            domain_radius=float(data.get("domain_radius", 0.5)),
        )

    def to_dict(self):
        coeffs = [list(c) if isinstance(c, tuple) else c for c in self.coeffs]
        coeffs = [[list(c[0]), c[1]] if isinstance(c, list) else c for c in coeffs]
        return {
            "family": self.family,
            "coeffs": coeffs,
            "dim_n": self.dim_n,
            "domain_radius": self.domain_radius,
        }


def load_crack(path):
    """Read a CrackSpec from a JSON file."""
    with open(path) as f:
        return CrackSpec.from_dict(json.load(f))


def as_point(coords, dim_n=2):
    """
    Validate a point of R^{N+1}.

    Raises:
        DomainError: If the length is not N+1 or an entry is not finite
    """
    point = np.asarray(coords, dtype=float)
    if point.shape[-1] != dim_n + 1:
        raise DomainError(f"Expected {dim_n + 1} coordinates, got {point.shape[-1]}")
    if not np.all(np.isfinite(point)):
        raise DomainError("Point coordinates must be finite")
    return point


@dataclass(frozen=True)
class CrackLocalData:
    g: np.ndarray
    grad_g: np.ndarray
    star_defect: np.ndarray
    normal: np.ndarray


def crack_local_data(spec, xp):
    """
    Local geometry of the crack boundary at x'.

    Args:
        spec (CrackSpec): The crack
        xp: Point(s) of R^{N-1}, shape (..., N-1)

    Returns:
        CrackLocalData: g(x'), grad g(x'), the star-shapedness defect g - grad g . x' and
        the unit normal (-grad g, 1)/sqrt(1 + |grad g|^2)

    Raises:
        DomainError: If |x'| exceeds the crack's domain radius
    """
    xp = np.asarray(xp, dtype=float)
    if xp.ndim == 0:
        xp = xp[None]
    if xp.shape[-1] != spec.dim_n - 1:
        raise DomainError(f"Expected {spec.dim_n - 1} tangential coordinates")
    if np.any(np.linalg.norm(xp, axis=-1) > spec.domain_radius * (1.0 + 1e-12)):
        raise DomainError(f"|x'| exceeds the crack domain radius {spec.domain_radius}")
    g = spec.g(xp)
    grad = spec.grad_g(xp)
    defect = g - np.sum(grad * xp, axis=-1)
    normal = np.concatenate([-grad, np.ones_like(g)[..., None]], axis=-1)
    normal = normal / np.linalg.norm(normal, axis=-1, keepdims=True)
    return CrackLocalData(g=g, grad_g=grad, star_defect=defect, normal=normal)


def contains_crack(spec, p, straightened=False):
    """
    Membership in the closed crack set.

    Args:
        spec (CrackSpec): The crack
        p: Point(s) of R^{N+1}, shape (..., N+1)
        straightened (bool): Test the flat slit {x_N >= 0} instead of {x_N >= g(x')}

    Returns:
        bool or np.ndarray: True where the point lies on the selected crack
    """
    p = np.asarray(p, dtype=float)
    n = spec.dim_n
    on_plane = np.abs(p[..., n]) <= PLANE_TOLERANCE
    threshold = 0.0 if straightened else spec.g(p[..., : n - 1])
    result = on_plane & (p[..., n - 1] >= threshold)
    return bool(result) if result.ndim == 0 else result
