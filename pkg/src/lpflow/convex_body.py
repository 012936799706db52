"""Support-function calculus for convex bodies sampled on a sphere grid."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ellipsoid import Ellipsoid
from .errors import ConvexityLost, InvalidArgument
from .sphere_grid import (
    SphereGrid,
    covariant_hessian_plus_uI,
    gradient,
    integrate,
    make_grid,
)

__all__ = [
    "SupportField",
    "CurvatureData",
    "support_of_ellipsoid",
    "ma_det",
    "min_eig_b",
    "radial_function",
    "volume",
    "boundary_points",
    "hausdorff_distance",
    "p_area_density",
    "curvature_data",
]

# ratio-matrix rows processed per block in radial_function
_BLOCK = 512


@dataclass(frozen=True, eq=False)
class SupportField:
    """Samples of a support function ``u`` on ``grid``."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.shape[0] != self.grid.size:
            raise InvalidArgument(
                f"{values.shape[0]} values for a grid of {self.grid.size} nodes"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def with_values(self, values) -> "SupportField":
        return SupportField(self.grid, values)

    def to_dict(self) -> dict:
        return {
            "dim": self.grid.dim,
            "resolution": self.grid.resolution,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SupportField":
        grid = make_grid(int(data["dim"]), int(data["resolution"]))
        return cls(grid, data["values"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SupportField":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class CurvatureData:
    b: np.ndarray
    h: np.ndarray
    K: np.ndarray
    kappa: np.ndarray


def support_of_ellipsoid(
    E: Ellipsoid, grid: SphereGrid, require_interior: bool = False
) -> SupportField:
    """Exact samples of the support function of ``E``."""
    if E.dim != grid.dim + 1:
        raise InvalidArgument(
            f"ellipsoid lives in R^{E.dim}, grid is S^{grid.dim}"
        )
    u = E.support(grid.nodes)
    if require_interior and np.any(u <= 0):
        raise InvalidArgument("origin is not interior to the ellipsoid")
    return SupportField(grid, u)


def _b(u: SupportField) -> np.ndarray:
    return covariant_hessian_plus_uI(u.grid, u.values)


def _det(b: np.ndarray) -> np.ndarray:
    if b.shape[-1] == 1:
        return b[:, 0, 0].copy()
    return b[:, 0, 0] * b[:, 1, 1] - b[:, 0, 1] * b[:, 1, 0]


def ma_det(u: SupportField) -> np.ndarray:
    """``det(nabla^2 u + u I)`` per node; nonpositive entries are returned as is."""
    return _det(_b(u))


def min_eig_b(u: SupportField) -> np.ndarray:
    """Smallest eigenvalue of ``b`` per node."""
    b = _b(u)
    if b.shape[-1] == 1:
        return b[:, 0, 0].copy()
    tr = b[:, 0, 0] + b[:, 1, 1]
    disc = np.sqrt(0.25 * (b[:, 0, 0] - b[:, 1, 1]) ** 2 + b[:, 0, 1] ** 2)
    return 0.5 * tr - disc


def _parabolic_drop(gm, g0, gp):
    # decrease of the vertex of the parabola through three equispaced samples
    curv = gp - 2.0 * g0 + gm
    with np.errstate(invalid="ignore", divide="ignore"):
        drop = np.where(
            np.isfinite(gm) & np.isfinite(gp) & (curv > 0),
            (gp - gm) ** 2 / (8.0 * curv),
            0.0,
        )
    return drop


def radial_function(u: SupportField, grid: SphereGrid | None = None) -> np.ndarray:
    """Radial function about the origin at the nodes of ``grid``.

    ``r(xi) = min u(x) / <x, xi>`` over nodes with ``<x, xi> > 0``.  The
    discrete minimum is refined by a parabolic fit through the neighbouring
    stencil points of the minimising node.
    """
    src = u.grid
    grid = src if grid is None else grid
    x = src.nodes
    vals = u.values
    out = np.empty(grid.size)
    if src.dim == 1:
        n = src.size
        for start in range(0, grid.size, _BLOCK):
            xi = grid.nodes[start : start + _BLOCK]
            c = xi @ x.T
            with np.errstate(divide="ignore"):
                g = np.where(c > 1e-12, vals[None, :] / np.where(c > 1e-12, c, 1.0), np.inf)
            k = np.argmin(g, axis=1)
            rows = np.arange(len(k))
            g0 = g[rows, k]
            gm = g[rows, (k - 1) % n]
            gp = g[rows, (k + 1) % n]
            out[start : start + _BLOCK] = g0 - _parabolic_drop(gm, g0, gp)
        return out

    if grid is src and vals.min() > 0:
        return _radial_s2_banded(src, vals)
    return _radial_s2_rows(src, vals, grid.nodes, 0, src.size)


def _radial_s2_rows(src: SphereGrid, vals: np.ndarray, xis: np.ndarray, col0: int, col1: int) -> np.ndarray:
    """Refined minimum of ``u(x)/<x, xi>`` over source columns ``col0:col1``.

    Columns are whole colatitude rings of ``src``; neighbours outside the
    column range count as missing and do not refine the minimum.
    """
    m = src.resolution
    nphi = 2 * m
    x = src.nodes[col0:col1]
    v = vals[col0:col1]
    out = np.empty(len(xis))

    def pick(g, rows, i, j):
        col = i * nphi + j - col0
        inside = (col >= 0) & (col < col1 - col0)
        return np.where(inside, g[rows, np.clip(col, 0, col1 - col0 - 1)], np.inf)

    for start in range(0, len(xis), _BLOCK):
        xi = xis[start : start + _BLOCK]
        c = xi @ x.T
        with np.errstate(divide="ignore"):
            g = np.where(c > 1e-12, v[None, :] / np.where(c > 1e-12, c, 1.0), np.inf)
        k = np.argmin(g, axis=1)
        rows = np.arange(len(k))
        g0 = g[rows, k]
        i, j = np.divmod(k + col0, nphi)
        # longitude neighbours
        drop = _parabolic_drop(
            pick(g, rows, i, (j - 1) % nphi), g0, pick(g, rows, i, (j + 1) % nphi)
        )
        # colatitude neighbours, reflected across the poles
        up_i = np.where(i == 0, 0, i - 1)
        up_j = np.where(i == 0, (j + m) % nphi, j)
        dn_i = np.where(i == m - 1, m - 1, i + 1)
        dn_j = np.where(i == m - 1, (j + m) % nphi, j)
        drop = drop + _parabolic_drop(pick(g, rows, up_i, up_j), g0, pick(g, rows, dn_i, dn_j))
        out[start : start + _BLOCK] = g0 - drop
    return out


def _radial_s2_banded(src: SphereGrid, vals: np.ndarray) -> np.ndarray:
    """Same result as the full search, restricted ring by ring to a latitude band.

    The node ``xi`` itself gives the bound ``u(xi)``, so the minimiser has
    ``<x, xi> >= min(u) / u(xi)``: it lies in a cap of angular radius
    ``alpha = arccos(min(u) / u(xi))``.  Each ring of ``xi`` is searched over
    the rings within ``alpha`` of it, plus one guard ring per side so the
    parabolic refinement sees the same neighbours as the full search.
    """
    m = src.resolution
    nphi = 2 * m
    h = np.pi / m
    umin = vals.min()
    out = np.empty(src.size)
    for i in range(m):
        sl = slice(i * nphi, (i + 1) * nphi)
        alpha = float(np.arccos(np.clip(umin / vals[sl].max(), -1.0, 1.0)))
        theta = src.theta[i]
        # a cap across a pole wraps to colatitudes <= alpha - theta <= hi (or
        # the mirror at the south pole), so clamping the band is enough
        lo = theta - alpha
        hi = theta + alpha
        i0 = max(0, int(np.floor((lo - 0.5 * h) / h)) - 1)
        i1 = min(m - 1, int(np.ceil((hi - 0.5 * h) / h)) + 1)
        out[sl] = _radial_s2_rows(src, vals, src.nodes[sl], i0 * nphi, (i1 + 1) * nphi)
    return out


def volume(u: SupportField) -> float:
    """``(1/(n+1)) * integral of r^{n+1}`` over the sphere."""
    n = u.grid.dim
    r = radial_function(u)
    return integrate(u.grid, r ** (n + 1)) / (n + 1)


def boundary_points(u: SupportField) -> np.ndarray:
    """``u(x) x + grad u(x)`` per node: the boundary point with outer normal x."""
    return u.values[:, None] * u.grid.nodes + gradient(u.grid, u.values)


def hausdorff_distance(u1: SupportField, u2: SupportField) -> float:
    """Sup-norm of the support-function difference."""
    if not u1.grid.same_as(u2.grid):
        raise InvalidArgument("support fields live on different grids")
    return float(np.max(np.abs(u1.values - u2.values)))


def p_area_density(u: SupportField, p: float) -> np.ndarray:
    """Density ``u^{1-p} det(b)`` of the L_p surface area measure."""
    return u.values ** (1.0 - p) * ma_det(u)


def curvature_data(u: SupportField) -> CurvatureData:
    """Radii matrix ``b``, its inverse, Gauss curvature and principal curvatures.

    Raises
    ------
    ConvexityLost
        At the first node where ``b`` is not positive definite.
    """
    b = _b(u)
    evals = np.linalg.eigvalsh(b)
    bad = np.flatnonzero(evals[:, 0] <= 0)
    if bad.size:
        node = int(bad[0])
        raise ConvexityLost(node, float(evals[node, 0]))
    h = np.linalg.inv(b)
    det = np.prod(evals, axis=1)
    kappa = np.sort(1.0 / evals, axis=1)
    return CurvatureData(b=b, h=h, K=1.0 / det, kappa=kappa)
