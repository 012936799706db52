"""Minimum-volume enclosing (John) ellipsoids."""

from __future__ import annotations

import numpy as np

from .convex_body import SupportField, boundary_points
from .ellipsoid import Ellipsoid
from .errors import DegenerateInput, InvalidArgument, IterationLimit

__all__ = [
    "Ellipsoid",
    "mvee",
    "min_ellipsoid_of_body",
    "john_containment",
    "eccentricity",
    "DEFAULT_TOL",
    "MAX_ITER",
]

DEFAULT_TOL = 1e-7
MAX_ITER = 100_000
# Khachiyan stage tolerance before the Newton polish
_COARSE_TOL = 1e-2


def _khachiyan_weights(points: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Barycentric weights of the optimal design, with Todd-Yildirim away steps."""
    n_pts, d = points.shape
    q = np.vstack([points.T, np.ones(n_pts)])
    w = np.full(n_pts, 1.0 / n_pts)
    lift = d + 1.0
    for _ in range(max_iter):
        x = (q * w) @ q.T
        m = np.einsum("ij,ji->i", q.T, np.linalg.solve(x, q))
        j = int(np.argmax(m))
        support = w > 0
        i = int(np.flatnonzero(support)[np.argmin(m[support])])
        eps_plus = m[j] / lift - 1.0
        eps_minus = 1.0 - m[i] / lift
        if eps_plus <= tol and eps_minus <= tol:
            return w
        if eps_plus >= eps_minus:
            step = (m[j] - lift) / (lift * (m[j] - 1.0))
            w *= 1.0 - step
            w[j] += step
        else:
            step = min((lift - m[i]) / (lift * (m[i] - 1.0)), w[i] / (1.0 - w[i]))
            w *= 1.0 + step
            w[i] -= step
            w[i] = max(w[i], 0.0)
    raise IterationLimit(f"MVEE did not reach tol={tol} in {max_iter} iterations")


def _sym_basis(d: int) -> list[tuple[int, int]]:
    return [(k, l) for k in range(d) for l in range(k, d)]


def _barrier_polish(
    pts: np.ndarray, shape: np.ndarray, center: np.ndarray, gap: float, max_newton: int
) -> tuple[np.ndarray, np.ndarray]:
    """Refine ``{z : |A z + b| <= 1}`` by a log-barrier path-following Newton method.

    Minimises ``-log det A`` subject to ``|A z_i + b|^2 <= 1``.  The
    Khachiyan ellipsoid, slightly inflated, is the strictly feasible start.
    Returns ``(A, b)`` once the duality gap ``N / t`` is below ``gap``.
    """
    n_pts, d = pts.shape
    basis = _sym_basis(d)
    nsym = len(basis)
    nvar = nsym + d
    # jac[i] maps the variable vector to r_i = A z_i + b
    jac = np.zeros((n_pts, d, nvar))
    for c, (k, l) in enumerate(basis):
        jac[:, k, c] += pts[:, l]
        if k != l:
            jac[:, l, c] += pts[:, k]
    jac[:, :, nsym:] = np.eye(d)

    evals, evecs = np.linalg.eigh(shape)
    a = evecs @ np.diag(evals**-0.5) @ evecs.T
    b = -a @ center
    r = pts @ a.T + b
    scale = np.sqrt(np.max(np.einsum("ij,ij->i", r, r))) * 1.01
    a /= scale
    b /= scale
    x = np.concatenate([[a[k, l] for k, l in basis], b])

    def unpack(v):
        m = np.zeros((d, d))
        for c, (k, l) in enumerate(basis):
            m[k, l] = m[l, k] = v[c]
        return m, v[nsym:]

    def objective(v, t):
        m, bb = unpack(v)
        try:
            chol = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            return np.inf
        rr = pts @ m.T + bb
        s = 1.0 - np.einsum("ij,ij->i", rr, rr)
        if np.any(s <= 0):
            return np.inf
        return -2.0 * t * np.sum(np.log(np.diag(chol))) - np.sum(np.log(s))

    # dA for each symmetric basis element, for the log-det derivatives
    dmats = np.zeros((nsym, d, d))
    for c, (k, l) in enumerate(basis):
        dmats[c, k, l] = dmats[c, l, k] = 1.0
    jac_flat = jac.reshape(n_pts * d, nvar)

    t = n_pts / _COARSE_TOL
    newton = 0
    while True:
        last = n_pts / t < gap
        for _ in range(50):
            m, bb = unpack(x)
            minv = np.linalg.inv(m)
            rr = pts @ m.T + bb
            s = 1.0 - np.einsum("ij,ij->i", rr, rr)
            jr = (jac * rr[:, :, None]).sum(axis=1) / s[:, None]
            grad = 2.0 * jr.sum(axis=0)
            hess = (jac_flat * np.repeat(2.0 / s, d)[:, None]).T @ jac_flat + 4.0 * jr.T @ jr
            md = minv[None] @ dmats
            grad[:nsym] -= t * np.einsum("cii->c", md)
            hess[:nsym, :nsym] += t * np.einsum("aij,bji->ab", md, md)
            dx = -np.linalg.solve(hess, grad)
            decrement = -grad @ dx
            newton += 1
            if newton > max_newton:
                raise IterationLimit("barrier Newton iteration did not converge")
            if decrement < (1e-20 if last else 1e-6):
                break
            f0 = objective(x, t)
            alpha = 1.0
            while objective(x + alpha * dx, t) > f0 - 0.25 * alpha * decrement:
                alpha *= 0.5
                if alpha < 1e-12:
                    break
            x = x + alpha * dx
            if decrement < (1e-16 if last else 1e-6):
                break
        if last:
            break
        t = min(t * 50.0, 2.0 * n_pts / gap)
    return unpack(x)


def mvee(points, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER) -> Ellipsoid:
    """Minimum-volume ellipsoid enclosing ``points`` (rows in R^d).

    Khachiyan's barycentric ascent (with away steps) runs to a coarse
    tolerance; a log-barrier Newton solve on the ellipsoid parameters then
    drives the volume gap below ``tol``.  The result is rescaled so that the
    farthest point lies exactly on the boundary.

    Raises
    ------
    DegenerateInput
        Fewer than d+1 affinely independent points.
    IterationLimit
        No convergence within ``max_iter`` iterations.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise InvalidArgument("points must be a 2-D array")
    if not 0.0 < tol <= 1e-2:
        raise InvalidArgument(f"tol must lie in (0, 1e-2], got {tol}")
    n_pts, d = pts.shape
    lifted = np.hstack([pts, np.ones((n_pts, 1))])
    if n_pts < d + 1:
        raise DegenerateInput(f"{n_pts} points cannot span R^{d}")
    sv = np.linalg.svd(lifted, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise DegenerateInput("points are affinely degenerate")

    # work in centred, scaled coordinates for conditioning
    shift = pts.mean(axis=0)
    spread = np.abs(pts - shift).max()
    z = (pts - shift) / spread

    w = _khachiyan_weights(z, max(tol, _COARSE_TOL), max_iter)
    c0 = w @ z
    dev = z - c0
    shape0 = d * (dev * w[:, None]).T @ dev
    a, b = _barrier_polish(z, shape0, c0, gap=tol * 1e-3, max_newton=max_iter)
    r = z @ a.T + b
    scale = np.sqrt(np.max(np.einsum("ij,ij->i", r, r)))
    a /= scale
    b /= scale
    ainv = np.linalg.inv(a)
    center = -ainv @ b
    shape = ainv @ ainv.T
    return Ellipsoid.from_matrix(shape * spread**2, center * spread + shift)


def eccentricity(E: Ellipsoid) -> float:
    """Largest over smallest semi-axis."""
    return E.eccentricity


def min_ellipsoid_of_body(u: SupportField, tol: float = DEFAULT_TOL) -> Ellipsoid:
    """John ellipsoid of the body with support function ``u``."""
    return mvee(boundary_points(u), tol)


def john_containment(u: SupportField, E: Ellipsoid, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Check ``E/(n+1)`` (shrunk about its center) lies inside the body.

    Returns the pass flag and the worst margin ``min(u - u_shrunk)``; the
    check passes when the margin is at least ``-10 * tol``.
    """
    shrunk = E.scaled(1.0 / E.dim)
    margin = float(np.min(u.values - shrunk.support(u.grid.nodes)))
    return margin >= -10.0 * tol, margin
