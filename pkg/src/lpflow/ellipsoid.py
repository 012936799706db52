"""Ellipsoid value type: center, orthonormal axis frame, sorted semi-axes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

__all__ = ["Ellipsoid", "unit_ball_volume"]

# relative gap below which two semi-axes count as tied
_TIE_RTOL = 1e-12


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d."""
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def _canonical_frame(axes: np.ndarray, semi: np.ndarray):
    d = semi.shape[0]
    axes = axes.copy()
    for i in range(d):
        k = int(np.argmax(np.abs(axes[i]) > 1e-12))
        if axes[i, k] < 0:
            axes[i] = -axes[i]
    order = sorted(range(d), key=lambda i: (semi[i], tuple(-axes[i])))
    semi = semi[order]
    axes = axes[order]
    # a fully tied spectrum has no preferred frame
    if semi[-1] - semi[0] <= _TIE_RTOL * semi[-1]:
        axes = np.eye(d)
        semi = np.full(d, semi.mean()) if d > 1 else semi
    return axes, semi


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """``{center + sum_i t_i a_i q_i : sum t_i^2 <= 1}``.

    ``axes`` holds the unit axis directions ``q_i`` as rows; ``semi_axes`` is
    sorted ascending.  Instances are normalised on construction so that equal
    ellipsoids compare equal field by field.
    """

    center: np.ndarray
    axes: np.ndarray
    semi_axes: np.ndarray

    def __post_init__(self):
        center = np.array(self.center, dtype=float).reshape(-1)
        d = center.shape[0]
        semi = np.array(self.semi_axes, dtype=float).reshape(-1)
        axes = np.array(self.axes, dtype=float).reshape(d, d)
        if semi.shape[0] != d:
            raise InvalidArgument("need one semi-axis per ambient dimension")
        if not np.all(np.isfinite(semi)) or np.any(semi <= 0):
            raise InvalidArgument(f"semi-axes must be positive, got {semi}")
        if not np.allclose(axes @ axes.T, np.eye(d), atol=1e-8):
            raise InvalidArgument("axis frame is not orthonormal")
        axes, semi = _canonical_frame(axes, semi)
        for name, val in (("center", center), ("axes", axes), ("semi_axes", semi)):
            val.flags.writeable = False
            object.__setattr__(self, name, val)

    # -- constructors -------------------------------------------------
    @classmethod
    def ball(cls, radius: float = 1.0, center=None, dim: int | None = None) -> "Ellipsoid":
        if center is None:
            center = np.zeros(dim if dim is not None else 2)
        center = np.asarray(center, dtype=float)
        d = center.shape[0]
        return cls(center, np.eye(d), np.full(d, float(radius)))

    @classmethod
    def from_matrix(cls, shape: np.ndarray, center) -> "Ellipsoid":
        """From ``{x : (x-c)^T shape^{-1} (x-c) <= 1}``; eigenvalues of ``shape`` are squared semi-axes."""
        shape = 0.5 * (shape + shape.T)
        evals, evecs = np.linalg.eigh(shape)
        if np.any(evals <= 0):
            raise InvalidArgument("shape matrix is not positive definite")
        return cls(center, evecs.T, np.sqrt(evals))

    @classmethod
    def from_angle(cls, semi_axes, angle: float = 0.0, center=(0.0, 0.0)) -> "Ellipsoid":
        """Planar ellipse whose first semi-axis points along ``angle``."""
        c, s = math.cos(angle), math.sin(angle)
        return cls(center, np.array([[c, s], [-s, c]]), semi_axes)

    # -- geometry -----------------------------------------------------
    @property
    def dim(self) -> int:
        """Ambient dimension n+1."""
        return self.center.shape[0]

    @property
    def shape_matrix(self) -> np.ndarray:
        return self.axes.T @ np.diag(self.semi_axes**2) @ self.axes

    @property
    def volume(self) -> float:
        return unit_ball_volume(self.dim) * float(np.prod(self.semi_axes))

    @property
    def eccentricity(self) -> float:
        return float(self.semi_axes[-1] / self.semi_axes[0])

    def support(self, directions) -> np.ndarray:
        """Support function at the normalised ``directions`` (rows)."""
        x = np.atleast_2d(np.asarray(directions, dtype=float))
        y = x @ self.axes.T
        norm2 = np.einsum("ij,ij->i", x, x)
        quad = (y**2) @ (self.semi_axes**2)
        return (x @ self.center) / np.sqrt(norm2) + np.sqrt(quad / norm2)

    def radial(self, directions) -> np.ndarray:
        """Radial function about the origin; requires the origin inside."""
        x = np.atleast_2d(np.asarray(directions, dtype=float))
        x = x / np.linalg.norm(x, axis=1, keepdims=True)
        inv = np.linalg.inv(self.shape_matrix)
        a = np.einsum("ij,jk,ik->i", x, inv, x)
        b = x @ inv @ self.center
        c = self.center @ inv @ self.center - 1.0
        if c > 0:
            raise InvalidArgument("origin is not inside the ellipsoid")
        return (b + np.sqrt(b * b - a * c)) / a

    def quadratic_form(self, points) -> np.ndarray:
        """``(z-c)^T shape^{-1} (z-c)`` per row; <= 1 means inside."""
        z = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        y = (z @ self.axes.T) / self.semi_axes
        return np.einsum("ij,ij->i", y, y)

    def contains_origin(self) -> bool:
        return bool(self.quadratic_form(np.zeros(self.dim))[0] <= 1.0)

    def boundary_samples(self, count: int, rng=None) -> np.ndarray:
        """Points on the boundary: uniform angles in 2D, random directions otherwise."""
        d = self.dim
        if d == 2 and rng is None:
            t = 2.0 * np.pi * np.arange(count) / count
            s = np.column_stack([np.cos(t), np.sin(t)])
        else:
            rng = np.random.default_rng(rng)
            s = rng.standard_normal((count, d))
            s /= np.linalg.norm(s, axis=1, keepdims=True)
        return self.center + (s * self.semi_axes) @ self.axes

    def affine_image(self, matrix, shift) -> "Ellipsoid":
        """Image under ``z -> M z + c``."""
        m = np.asarray(matrix, dtype=float)
        a = self.axes.T @ np.diag(self.semi_axes)
        return Ellipsoid.from_matrix(m @ a @ a.T @ m.T, m @ self.center + np.asarray(shift, dtype=float))

    def scaled(self, factor: float) -> "Ellipsoid":
        """Homothety about the center."""
        return Ellipsoid(self.center, self.axes, self.semi_axes * factor)

    # -- serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "axes": self.axes.tolist(),
            "semi_axes": self.semi_axes.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Ellipsoid":
        return cls(data["center"], data["axes"], data["semi_axes"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Ellipsoid":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Ellipsoid)
            and np.array_equal(self.center, other.center)
            and np.array_equal(self.axes, other.axes)
            and np.array_equal(self.semi_axes, other.semi_axes)
        )

    def __repr__(self) -> str:
        return (
            f"Ellipsoid(center={self.center.tolist()}, "
            f"semi_axes={self.semi_axes.tolist()})"
        )
