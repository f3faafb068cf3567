"""
Gyrovector calculus on the κ-stereographic model.

All operations act on the last axis and broadcast over leading axes. They are
written against the dispatching helpers of ``autograd`` so the same code runs
on plain arrays and on Tensors.
"""

import math
from typing import NamedTuple, Optional

import numpy as np

from . import autograd as ag
from .errors import (
    ChartOverflowError,
    DegenerateAggregationError,
    ManifoldDomainError,
    SingularityError,
)

FLAT_THRESHOLD = 1e-12
MIN_NORM = 1e-15
BOUNDARY_EPS = 1e-5
# largest |x| handed to arctanh
ATANH_LIMIT = 1.0 - 1e-15


def _check_finite(x, what: str) -> None:
    if not np.all(np.isfinite(ag.value(x))):
        raise ManifoldDomainError(f"{what} must be finite")


def _sqnorm(x):
    return ag.reduce_sum(x * x, axis=-1, keepdims=True)


def _inner(x, y):
    return ag.reduce_sum(x * y, axis=-1, keepdims=True)


def _safe_norm(x):
    return ag.clip(ag.norm(x), MIN_NORM, None)


def _expand_last(x):
    if ag.is_tensor(x):
        return x.reshape(x.shape + (1,))
    return np.expand_dims(ag.value(x), -1)


class LorentzPoint(NamedTuple):
    """Point of the hyperboloid (κ < 0) or sphere (κ > 0) model; ``time`` has a trailing axis of size 1."""

    time: np.ndarray
    space: np.ndarray

    def residual(self, kappa: float) -> np.ndarray:
        """|sgn(κ)·t² + ‖s‖² − 1/κ| per point."""
        t = np.asarray(self.time, dtype=np.float64)[..., 0]
        s = np.asarray(self.space, dtype=np.float64)
        return np.abs(math.copysign(1.0, kappa) * t * t + np.sum(s * s, axis=-1) - 1.0 / kappa)


class Stereographic:
    """The κ-stereographic model 𝔖^d_κ = {x : −κ‖x‖² < 1} for a fixed curvature κ."""

    def __init__(self, kappa: float):
        kappa = float(kappa)
        if not math.isfinite(kappa):
            raise ManifoldDomainError("curvature must be finite")
        self.kappa = kappa

    def __repr__(self):
        return f"Stereographic(kappa={self.kappa})"

    @property
    def is_flat(self) -> bool:
        return abs(self.kappa) < FLAT_THRESHOLD

    @property
    def radius(self) -> float:
        """Chart radius 1/√|κ| (infinite when flat)."""
        return math.inf if self.is_flat else 1.0 / math.sqrt(abs(self.kappa))

    # ------------------------------------------------------------- scalars

    def tan_kappa(self, x):
        _check_finite(x, "tan_kappa argument")
        if self.is_flat:
            return x
        sk = math.sqrt(abs(self.kappa))
        if self.kappa > 0:
            return ag.tan(x * sk) / sk
        return ag.tanh(x * sk) / sk

    def arctan_kappa(self, x):
        _check_finite(x, "arctan_kappa argument")
        if self.is_flat:
            return x
        sk = math.sqrt(abs(self.kappa))
        if self.kappa > 0:
            return ag.arctan(x * sk) / sk
        return ag.arctanh(ag.clip(x * sk, -ATANH_LIMIT, ATANH_LIMIT)) / sk

    # -------------------------------------------------------------- points

    def in_domain(self, x) -> np.ndarray:
        return -self.kappa * np.sum(ag.value(x) ** 2, axis=-1) < 1.0

    def conformal_factor(self, x):
        """λ_x = 2 / (1 + κ‖x‖²), with a trailing axis of size 1."""
        denominator = 1.0 + self.kappa * _sqnorm(x)
        if np.any(ag.value(denominator) <= 0.0):
            raise ManifoldDomainError("point lies outside the manifold domain")
        return 2.0 / denominator

    def project_to_domain(self, x):
        """Pull κ < 0 points back inside radius (1 − ε)/√−κ; identity otherwise."""
        _check_finite(x, "point")
        if self.kappa >= 0 or self.is_flat:
            return x
        limit = (1.0 - BOUNDARY_EPS) / math.sqrt(-self.kappa)
        norms = ag.norm(x)
        outside = ag.value(norms) >= limit
        if not np.any(outside):
            return x
        return x * ag.where(outside, limit / ag.clip(norms, MIN_NORM, None), 1.0)

    def mobius_add(self, x, y):
        k = self.kappa
        x2, y2, xy = _sqnorm(x), _sqnorm(y), _inner(x, y)
        numerator = (1.0 - 2.0 * k * xy - k * y2) * x + (1.0 + k * x2) * y
        denominator = 1.0 - 2.0 * k * xy + k * k * x2 * y2
        if np.any(np.abs(ag.value(denominator)) < MIN_NORM):
            raise SingularityError("Möbius addition of antipodal points")
        return self.project_to_domain(numerator / denominator)

    def mobius_scalar(self, r, x):
        x_norm = _safe_norm(x)
        return self.project_to_domain(self.tan_kappa(r * self.arctan_kappa(x_norm)) * x / x_norm)

    def distance(self, x, y):
        """Geodesic distance 2·arctan_κ‖(−x) ⊕ y‖ (last axis reduced)."""
        return 2.0 * self.arctan_kappa(ag.norm(self.mobius_add(-x, y), keepdims=False))

    def pairwise_distance(self, points):
        """n×n distance matrix of an (n, d) point set."""
        n, d = points.shape
        return self.distance(points.reshape(n, 1, d), points.reshape(1, n, d))

    def _check_period(self, angle) -> None:
        if self.kappa > 0 and not self.is_flat:
            if np.any(ag.value(angle) * math.sqrt(self.kappa) >= math.pi / 2):
                raise ChartOverflowError("tangent vector leaves the period of tan_kappa")

    def log_map(self, x, y):
        u = self.mobius_add(-x, y)
        u_norm = _safe_norm(u)
        return (2.0 / self.conformal_factor(x)) * self.arctan_kappa(u_norm) * u / u_norm

    def exp_map(self, x, v):
        v_norm = _safe_norm(v)
        half_angle = self.conformal_factor(x) * v_norm / 2.0
        self._check_period(half_angle)
        return self.mobius_add(x, self.tan_kappa(half_angle) * v / v_norm)

    def log0(self, y):
        """Logarithmic map at the origin (λ_o = 2)."""
        y_norm = _safe_norm(y)
        return self.arctan_kappa(y_norm) * y / y_norm

    def exp0(self, v):
        """Exponential map at the origin."""
        v_norm = _safe_norm(v)
        self._check_period(v_norm)
        return self.project_to_domain(self.tan_kappa(v_norm) * v / v_norm)

    # ------------------------------------------------------ neural operators

    def gyro_transform(self, weight, z):
        """
        Manifold-preserving linear map z ↦ f·(zW) for row points z.

        The scaling radicand κ⁻¹[1 − (λ_z − 1)²] equals (λ_z‖z‖)², so the factor
        reduces to λ_z‖z‖ / (λ_z‖zW‖). Rows with ‖zW‖ < 1e-15 map to the origin.
        """
        zw = ag.matmul(z, weight)
        zw_norm = ag.norm(zw)
        lam = self.conformal_factor(z)
        scale = (lam * ag.norm(z)) / (lam * ag.clip(zw_norm, MIN_NORM, None))
        out = scale * zw
        degenerate = ag.value(zw_norm) < MIN_NORM
        if np.any(degenerate):
            out = ag.where(degenerate, 0.0, out)
        return self.project_to_domain(out)

    def tangent_linear(self, weight, z):
        """Exp_o(Log_o(z) W): the tangent-space replacement of gyro_transform."""
        return self.exp0(ag.matmul(self.log0(z), weight))

    def _half_of(self, numerator, denominator):
        if np.any(np.abs(ag.value(denominator)) < MIN_NORM):
            raise DegenerateAggregationError("gyro-midpoint denominator vanished")
        return self.mobius_scalar(0.5, numerator / denominator)

    def gyro_midpoint(self, points, weights):
        """
        Weighted gyro-midpoint of the sets along axis −2.

        Args:
            points: (..., m, d) manifold points
            weights: (..., m) non-negative weights, broadcast against points

        Returns:
            (..., d) midpoints
        """
        lam = self.conformal_factor(points)
        alpha = _expand_last(weights)
        numerator = ag.reduce_sum(alpha * lam * points, axis=-2)
        denominator = ag.reduce_sum(alpha * (lam - 1.0), axis=-2)
        return self._half_of(numerator, denominator)

    def aggregate(self, points, coefficients):
        """Row-wise gyro-midpoints: out_i = midpoint of all points with weights coefficients[i]."""
        lam = self.conformal_factor(points)
        numerator = ag.matmul(coefficients, lam * points)
        denominator = ag.matmul(coefficients, lam - 1.0)
        return self._half_of(numerator, denominator)

    # ------------------------------------------------- Lorentz / spherical

    def stereo_unproject(self, z) -> LorentzPoint:
        if self.is_flat:
            raise ManifoldDomainError("the flat model has no Lorentz counterpart")
        z = ag.value(z)
        lam = ag.value(self.conformal_factor(z))
        return LorentzPoint(time=(lam - 1.0) / math.sqrt(abs(self.kappa)), space=lam * z)

    def stereo_project(self, point: LorentzPoint) -> np.ndarray:
        if self.is_flat:
            raise ManifoldDomainError("the flat model has no Lorentz counterpart")
        return np.asarray(point.space) / (1.0 + math.sqrt(abs(self.kappa)) * np.asarray(point.time))

    # ------------------------------------------------------------- sampling

    def random_points(self, rng: np.random.Generator, count: int, dim: int,
                      max_fraction: float = 0.9, scale: Optional[float] = None) -> np.ndarray:
        """
        Seeded in-domain samples with radius at most ``max_fraction`` of the chart radius.

        For κ = 0 the chart radius is taken as ``scale`` (default 1).
        """
        direction = rng.standard_normal((count, dim))
        direction /= np.maximum(np.linalg.norm(direction, axis=-1, keepdims=True), MIN_NORM)
        bound = scale if scale is not None else (1.0 if self.is_flat else self.radius)
        radius = max_fraction * bound * rng.uniform(0.0, 1.0, size=(count, 1))
        return direction * radius
