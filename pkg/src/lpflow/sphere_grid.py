"""Grids on S^1 and S^2 with quadrature and covariant derivative stencils.

S^1 is sampled at ``N`` equispaced angles.  S^2 uses a latitude-longitude
grid of ``M`` colatitude rings at the midpoints ``(i + 1/2) pi / M`` (the
poles themselves are never nodes) and ``2M`` longitudes.  Since the number
of longitudes is even, the stencil point "across the pole" from ring 0 is
ring 0 at longitude ``phi + pi``; that is how the theta stencil is closed.

Derivatives are expressed in the orthonormal frame ``(e_theta, e_phi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "SphereGrid",
    "make_grid",
    "integrate",
    "gradient",
    "covariant_hessian_plus_uI",
    "sphere_area",
]

MIN_RESOLUTION = 16


def sphere_area(dim: int) -> float:
    """Surface measure |S^dim| for dim in {1, 2}."""
    return {1: 2.0 * np.pi, 2: 4.0 * np.pi}[dim]


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Immutable sampling of S^dim.

    Attributes
    ----------
    dim : int
        Sphere dimension (1 or 2).
    resolution : int
        Node count for S^1, number of colatitude rings for S^2.
    nodes : (N, dim+1) ndarray
        Unit vectors.
    weights : (N,) ndarray
        Quadrature weights, summing to |S^dim|.
    """

    dim: int
    resolution: int
    nodes: np.ndarray
    weights: np.ndarray
    theta: np.ndarray
    phi: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def shape(self) -> tuple[int, ...]:
        """Logical (structured) shape of a field on this grid."""
        if self.dim == 1:
            return (self.resolution,)
        return (self.resolution, 2 * self.resolution)

    @property
    def spacing(self) -> float:
        """Smallest geodesic spacing between stencil neighbours."""
        if self.dim == 1:
            return 2.0 * np.pi / self.resolution
        dth = np.pi / self.resolution
        return float(np.sin(self.theta[0]) * dth)

    def same_as(self, other: "SphereGrid") -> bool:
        return (
            self is other
            or (self.dim == other.dim and self.resolution == other.resolution)
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SphereGrid) and self.same_as(other)

    def __hash__(self) -> int:
        return hash((self.dim, self.resolution))


def _fejer_weights(m: int) -> np.ndarray:
    # Fejer's first rule on theta_k = (k + 1/2) pi / m for int_0^pi g sin(theta).
    theta = (np.arange(m) + 0.5) * np.pi / m
    j = np.arange(1, m // 2 + 1)
    s = np.cos(2.0 * np.outer(theta, j)) / (4.0 * j**2 - 1.0)
    return (2.0 / m) * (1.0 - 2.0 * s.sum(axis=1))


_GRID_CACHE: dict[tuple[int, int], SphereGrid] = {}


def make_grid(dim: int, resolution: int) -> SphereGrid:
    """Build (or fetch a cached) grid on S^dim.

    Raises
    ------
    InvalidArgument
        If ``dim`` is not 1 or 2, or ``resolution`` is below 16.
    """
    if dim not in (1, 2):
        raise InvalidArgument(f"only S^1 and S^2 are supported, got dim={dim}")
    resolution = int(resolution)
    if resolution < MIN_RESOLUTION:
        raise InvalidArgument(
            f"resolution must be >= {MIN_RESOLUTION}, got {resolution}"
        )
    key = (dim, resolution)
    if key in _GRID_CACHE:
        return _GRID_CACHE[key]

    if dim == 1:
        theta = 2.0 * np.pi * np.arange(resolution) / resolution
        nodes = np.column_stack([np.cos(theta), np.sin(theta)])
        weights = np.full(resolution, 2.0 * np.pi / resolution)
        grid = SphereGrid(1, resolution, nodes, weights, theta)
    else:
        m = resolution
        theta = (np.arange(m) + 0.5) * np.pi / m
        phi = 2.0 * np.pi * np.arange(2 * m) / (2 * m)
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        nodes = np.column_stack(
            [
                (np.sin(th) * np.cos(ph)).ravel(),
                (np.sin(th) * np.sin(ph)).ravel(),
                np.cos(th).ravel(),
            ]
        )
        dphi = np.pi / m
        weights = np.outer(_fejer_weights(m), np.full(2 * m, dphi)).ravel()
        grid = SphereGrid(2, m, nodes, weights, theta, phi)

    for arr in (grid.nodes, grid.weights, grid.theta, grid.phi):
        arr.flags.writeable = False
    _GRID_CACHE[key] = grid
    return grid


def _check_field(grid: SphereGrid, values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.shape[0] != grid.size:
        raise InvalidArgument(
            f"field has shape {values.shape}, grid has {grid.size} nodes"
        )
    return values


def integrate(grid: SphereGrid, values) -> float:
    """Quadrature sum ``sum_i w_i f_i`` over the sphere."""
    values = _check_field(grid, values)
    return float(np.dot(grid.weights, values))


def _theta_padded(grid: SphereGrid, u2: np.ndarray, width: int = 1) -> np.ndarray:
    """Pad the colatitude axis with ``width`` ghost rings across each pole."""
    m = grid.resolution
    top = np.roll(u2[width - 1 :: -1], -m, axis=1)
    bottom = np.roll(u2[: -width - 1 : -1], -m, axis=1)
    return np.concatenate([top, u2, bottom], axis=0)


def _d1_4th(v: np.ndarray, h: float, axis: int) -> np.ndarray:
    # fourth-order centred first derivative on a periodic axis
    return (
        8.0 * (np.roll(v, -1, axis) - np.roll(v, 1, axis))
        - (np.roll(v, -2, axis) - np.roll(v, 2, axis))
    ) / (12.0 * h)


def _d2_4th(v: np.ndarray, h: float, axis: int) -> np.ndarray:
    # fourth-order centred second derivative on a periodic axis
    return (
        16.0 * (np.roll(v, -1, axis) + np.roll(v, 1, axis))
        - (np.roll(v, -2, axis) + np.roll(v, 2, axis))
        - 30.0 * v
    ) / (12.0 * h * h)


def _s2_derivatives(grid: SphereGrid, u: np.ndarray):
    """``u_th, u_ph, u_thth, u_phph, u_thph`` on the (m, 2m) node array.

    The terms that get divided by ``sin`` or ``sin^2`` in the covariant
    Hessian use fourth-order stencils, so that the pole rings (where
    ``sin ~ h``) keep an O(h^2) error; ``u_thth`` is second order.
    """
    m = grid.resolution
    dth = np.pi / m
    dph = np.pi / m
    u2 = u.reshape(m, 2 * m)
    up = _theta_padded(grid, u2, width=2)
    inner = up[1:-1]
    u_th = (8.0 * (up[3:-1] - up[1:-3]) - (up[4:] - up[:-4])) / (12.0 * dth)
    u_thth = (inner[2:] - 2.0 * u2 + inner[:-2]) / dth**2
    u_ph = _d1_4th(u2, dph, axis=1)
    u_phph = _d2_4th(u2, dph, axis=1)
    # mixed derivative: phi-derivative of the padded theta-derivative
    u_thph = _d1_4th(u_th, dph, axis=1)
    return u_th, u_ph, u_thth, u_phph, u_thph


def gradient(grid: SphereGrid, u) -> np.ndarray:
    """Tangential gradient of ``u`` as ambient vectors, shape (N, dim+1).

    Uses fourth-order centred differences; boundary reconstruction
    ``u x + grad u`` is sensitive to gradient error.
    """
    u = _check_field(grid, u)
    if grid.dim == 1:
        h = 2.0 * np.pi / grid.resolution
        du = _d1_4th(u, h, 0)
        tangent = np.column_stack([-grid.nodes[:, 1], grid.nodes[:, 0]])
        return du[:, None] * tangent
    m = grid.resolution
    h = np.pi / m
    u2 = u.reshape(m, 2 * m)
    up = _theta_padded(grid, u2, width=2)
    u_th = (8.0 * (up[3:-1] - up[1:-3]) - (up[4:] - up[:-4])) / (12.0 * h)
    u_ph = _d1_4th(u2, h, 1)
    th, ph = np.meshgrid(grid.theta, grid.phi, indexing="ij")
    e_th = np.stack(
        [np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=-1
    )
    e_ph = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=-1)
    g = u_th[..., None] * e_th + (u_ph / np.sin(th))[..., None] * e_ph
    return g.reshape(m * 2 * m, 3)


def covariant_hessian_plus_uI(grid: SphereGrid, u) -> np.ndarray:
    """Matrix field ``b_ij = nabla^2_ij u + u delta_ij`` in an orthonormal frame.

    Returns an array of shape ``(N, dim, dim)``.  For S^1 this is the 1x1
    field ``u'' + u``.  Stencils are centred; the result is second-order accurate,
    including the rings next to the poles (see ``_s2_derivatives``).
    """
    u = _check_field(grid, u)
    if grid.dim == 1:
        h = 2.0 * np.pi / grid.resolution
        up = np.concatenate([u[-1:], u, u[:1]])
        upp = (up[2:] - 2.0 * u + up[:-2]) / h**2
        return (upp + u)[:, None, None]

    m = grid.resolution
    u2 = u.reshape(m, 2 * m)
    u_th, u_ph, u_thth, u_phph, u_thph = _s2_derivatives(grid, u)
    sin = np.sin(grid.theta)[:, None]
    cot = (np.cos(grid.theta) / np.sin(grid.theta))[:, None]
    b = np.empty((m, 2 * m, 2, 2))
    b[..., 0, 0] = u_thth + u2
    b[..., 1, 1] = u_phph / sin**2 + cot * u_th + u2
    off = (u_thph - cot * u_ph) / sin
    b[..., 0, 1] = off
    b[..., 1, 0] = off
    return b.reshape(m * 2 * m, 2, 2)
