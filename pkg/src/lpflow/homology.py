"""Integer simplicial homology via Smith normal form.

Complexes are closed families of sorted vertex tuples; orientation follows
vertex order.  Boundary matrices are reduced over Z with Python integers, so
torsion is exact.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidComplex

__all__ = [
    "SimplicialComplex",
    "HomologyProfile",
    "smith_diagonal",
    "homology",
    "suspension",
    "product",
    "verify_n1_eccentric_family",
    "eccentric_family_complex",
    "circle",
    "sphere2",
    "rp2",
    "point",
    "two_points",
    "random_complex",
]


class SimplicialComplex:
    """Finite abstract simplicial complex.

    Parameters
    ----------
    simplices : iterable of vertex tuples
        Every simplex must appear together with all of its faces unless
        ``close=True``, in which case faces are added.
    """

    def __init__(self, simplices, close: bool = False):
        found: dict[int, set[tuple[int, ...]]] = {}
        for s in simplices:
            t = tuple(sorted(int(v) for v in s))
            if not t:
                continue
            if len(set(t)) != len(t):
                raise InvalidComplex(f"simplex {s} repeats a vertex")
            if close:
                for r in range(1, len(t) + 1):
                    for face in itertools.combinations(t, r):
                        found.setdefault(r - 1, set()).add(face)
            else:
                found.setdefault(len(t) - 1, set()).add(t)
        if not found:
            raise InvalidComplex("empty complex")
        top = max(found)
        self.simplices: list[list[tuple[int, ...]]] = [
            sorted(found.get(k, ())) for k in range(top + 1)
        ]
        self._index = [{s: i for i, s in enumerate(level)} for level in self.simplices]
        self._check_faces()
        self._check_boundary_squared()

    # -- construction checks ------------------------------------------
    def _check_faces(self) -> None:
        for k in range(1, self.dim + 1):
            lower = self._index[k - 1]
            for s in self.simplices[k]:
                for face in itertools.combinations(s, k):
                    if face not in lower:
                        raise InvalidComplex(f"face {face} of {s} is missing")

    def _check_boundary_squared(self) -> None:
        for k in range(2, self.dim + 1):
            for s in self.simplices[k]:
                acc: dict[tuple[int, ...], int] = {}
                for i in range(len(s)):
                    face = s[:i] + s[i + 1 :]
                    for j in range(len(face)):
                        ff = face[:j] + face[j + 1 :]
                        acc[ff] = acc.get(ff, 0) + (-1) ** (i + j)
                if any(acc.values()):
                    raise InvalidComplex(f"boundary of boundary is nonzero on {s}")

    # -- accessors ------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.simplices) - 1

    @property
    def vertices(self) -> list[int]:
        return [s[0] for s in self.simplices[0]]

    def count(self, k: int) -> int:
        return len(self.simplices[k]) if 0 <= k <= self.dim else 0

    def euler_characteristic(self) -> int:
        return sum((-1) ** k * self.count(k) for k in range(self.dim + 1))

    def boundary_matrix(self, k: int) -> list[list[int]]:
        """Integer matrix of the boundary map C_k -> C_{k-1} (rows: (k-1)-faces)."""
        if k <= 0 or k > self.dim:
            return []
        rows = self._index[k - 1]
        mat = [[0] * self.count(k) for _ in range(self.count(k - 1))]
        for col, s in enumerate(self.simplices[k]):
            for i in range(len(s)):
                mat[rows[s[:i] + s[i + 1 :]]][col] += (-1) ** i
        return mat

    def maximal(self) -> list[tuple[int, ...]]:
        """Simplices that are not a face of any other simplex."""
        covered = set()
        for k in range(1, self.dim + 1):
            for s in self.simplices[k]:
                covered.update(itertools.combinations(s, k))
        return [s for level in self.simplices for s in level if s not in covered]

    # -- serialisation --------------------------------------------------
    def to_dict(self) -> dict:
        return {str(k): [list(s) for s in level] for k, level in enumerate(self.simplices)}

    @classmethod
    def from_dict(cls, data: dict) -> "SimplicialComplex":
        return cls([tuple(s) for level in data.values() for s in level])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SimplicialComplex":
        return cls.from_dict(json.loads(text))

    def __repr__(self) -> str:
        counts = ", ".join(str(self.count(k)) for k in range(self.dim + 1))
        return f"SimplicialComplex(dim={self.dim}, f-vector=({counts}))"


def smith_diagonal(matrix: list[list[int]]) -> list[int]:
    """Nonzero invariant factors of an integer matrix, in divisibility order."""
    a = [list(row) for row in matrix]
    m = len(a)
    n = len(a[0]) if m else 0
    diag: list[int] = []
    t = 0
    while t < min(m, n):
        best = None
        for i in range(t, m):
            row = a[i]
            for j in range(t, n):
                v = row[j]
                if v and (best is None or abs(v) < best[0]):
                    best = (abs(v), i, j)
                    if best[0] == 1:
                        break
            if best is not None and best[0] == 1:
                break
        if best is None:
            break
        _, i, j = best
        a[t], a[i] = a[i], a[t]
        if j != t:
            for row in a:
                row[t], row[j] = row[j], row[t]
        while True:
            piv = a[t][t]
            dirty = False
            for i in range(t + 1, m):
                v = a[i][t]
                if v:
                    q = v // piv
                    ri, rt = a[i], a[t]
                    for j in range(t, n):
                        if rt[j]:
                            ri[j] -= q * rt[j]
                    if ri[t]:
                        a[t], a[i] = a[i], a[t]
                        dirty = True
                        break
            if dirty:
                continue
            rt = a[t]
            for j in range(t + 1, n):
                v = rt[j]
                if v:
                    q = v // piv
                    for row in a[t:]:
                        if row[t]:
                            row[j] -= q * row[t]
                    if rt[j]:
                        for row in a:
                            row[t], row[j] = row[j], row[t]
                        dirty = True
                        break
            if not dirty:
                break
        diag.append(abs(a[t][t]))
        t += 1
    # enforce d_1 | d_2 | ... by pairwise gcd/lcm exchange
    for i in range(len(diag)):
        for j in range(i + 1, len(diag)):
            g = math.gcd(diag[i], diag[j])
            l = diag[i] * diag[j] // g
            diag[i], diag[j] = g, l
    return diag


@dataclass(frozen=True)
class HomologyProfile:
    """Per-degree Betti number and torsion invariant factors (all >= 2)."""

    betti: tuple
    torsion: tuple

    def group(self, k: int) -> tuple[int, tuple]:
        if k < 0 or k >= len(self.betti):
            return 0, ()
        return self.betti[k], self.torsion[k]

    def describe(self, k: int) -> str:
        b, tors = self.group(k)
        parts = ["Z"] * (1 if b else 0)
        if b > 1:
            parts = [f"Z^{b}"]
        parts += [f"Z/{q}" for q in tors]
        return " + ".join(parts) if parts else "0"

    def to_dict(self) -> dict:
        return {
            str(k): {"betti": b, "torsion": list(t)}
            for k, (b, t) in enumerate(zip(self.betti, self.torsion))
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "HomologyProfile":
        keys = sorted(data, key=int)
        return cls(
            tuple(data[k]["betti"] for k in keys),
            tuple(tuple(data[k]["torsion"]) for k in keys),
        )


def homology(X: SimplicialComplex) -> HomologyProfile:
    """Integral homology ``H_k = Z^{betti_k} + torsion`` for ``k = 0..dim X``."""
    factors = [[] for _ in range(X.dim + 2)]
    for k in range(1, X.dim + 1):
        factors[k] = smith_diagonal(X.boundary_matrix(k))
    ranks = [len(f) for f in factors]
    betti = []
    torsion = []
    for k in range(X.dim + 1):
        betti.append(X.count(k) - ranks[k] - ranks[k + 1])
        torsion.append(tuple(d for d in factors[k + 1] if d > 1))
    return HomologyProfile(tuple(betti), tuple(torsion))


def suspension(X: SimplicialComplex) -> SimplicialComplex:
    """Join of ``X`` with two new apex vertices."""
    top = max(X.vertices)
    north, south = top + 1, top + 2
    simplices = [s for level in X.simplices for s in level]
    cones = [s + (apex,) for s in simplices for apex in (north, south)]
    return SimplicialComplex(simplices + cones + [(north,), (south,)])


def product(X: SimplicialComplex, Y: SimplicialComplex) -> SimplicialComplex:
    """Staircase triangulation of ``|X| x |Y|``.

    Vertex ``(x, y)`` gets id ``x * base + y``; each pair of maximal
    simplices contributes one top simplex per monotone lattice path.
    """
    base = max(Y.vertices) + 1
    out = set()
    for s in X.maximal():
        for t in Y.maximal():
            p, q = len(s) - 1, len(t) - 1
            for rights in itertools.combinations(range(p + q), p):
                i = j = 0
                verts = [s[0] * base + t[0]]
                rset = set(rights)
                for move in range(p + q):
                    if move in rset:
                        i += 1
                    else:
                        j += 1
                    verts.append(s[i] * base + t[j])
                out.add(tuple(verts))
    return SimplicialComplex(out, close=True)


# -- standard complexes ------------------------------------------------------
def point() -> SimplicialComplex:
    return SimplicialComplex([(0,)])


def two_points() -> SimplicialComplex:
    return SimplicialComplex([(0,), (1,)])


def circle(m: int = 3) -> SimplicialComplex:
    """Boundary of an m-gon."""
    if m < 3:
        raise InvalidComplex(f"a simplicial circle needs at least 3 vertices, got {m}")
    return SimplicialComplex([(k, (k + 1) % m) for k in range(m)], close=True)


def sphere2() -> SimplicialComplex:
    """Boundary of the octahedron."""
    tris = [
        (a, b, c)
        for a in (0, 1)
        for b in (2, 3)
        for c in (4, 5)
    ]
    return SimplicialComplex(tris, close=True)


def rp2() -> SimplicialComplex:
    """Six-vertex real projective plane (hemi-icosahedron)."""
    tris = [
        (0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 1),
        (1, 2, 4), (2, 3, 5), (3, 4, 1), (4, 5, 2), (5, 1, 3),
    ]
    return SimplicialComplex(tris, close=True)


def random_complex(rng, n_vertices: int = 6, n_top: int = 5, top_dim: int = 2) -> SimplicialComplex:
    """Closure of a random set of ``top_dim``-simplices on ``n_vertices`` vertices."""
    rng = np.random.default_rng(rng)
    pool = list(itertools.combinations(range(n_vertices), top_dim + 1))
    pick = rng.choice(len(pool), size=min(n_top, len(pool)), replace=False)
    return SimplicialComplex([pool[i] for i in sorted(pick)], close=True)


# -- the n = 1 eccentric class -------------------------------------------------
def eccentric_family_complex(
    samples: int = 12, ecc: float = 10.0, jitter: float = 0.0, rng=0, resolution: int = 64
) -> SimplicialComplex:
    """Circle complex on centred ellipses of area pi and eccentricity ``ecc``.

    Ellipses are sampled by major-axis angle over ``[0, 2 pi)``; samples whose
    support functions coincide (angles differing by pi) are identified, and
    consecutive samples are joined by an edge.  The quotient is the class of
    such ellipses, a projective line.
    """
    from .ellipsoid import Ellipsoid
    from .sphere_grid import make_grid

    if samples % 2:
        raise InvalidComplex("need an even number of samples so antipodal angles coincide")
    gen = np.random.default_rng(rng)
    step = 2.0 * np.pi / samples
    half = np.arange(samples // 2) * step
    if jitter:
        half = half + gen.uniform(-jitter, jitter, size=half.shape) * step
    angles = np.concatenate([half, half + np.pi])
    grid = make_grid(1, resolution)
    a = math.sqrt(ecc)
    supports = [
        Ellipsoid.from_angle((a, 1.0 / a), float(alpha)).support(grid.nodes) for alpha in angles
    ]
    labels: list[int] = []
    reps: list[np.ndarray] = []
    for u in supports:
        for idx, r in enumerate(reps):
            if np.max(np.abs(u - r)) < 1e-9:
                labels.append(idx)
                break
        else:
            reps.append(u)
            labels.append(len(reps) - 1)
    if len(reps) < 3:
        raise InvalidComplex(f"only {len(reps)} distinct ellipses; a circle needs 3")
    edges = {
        tuple(sorted((labels[k], labels[(k + 1) % samples]))) for k in range(samples)
    }
    if len(edges) < len(reps):
        raise InvalidComplex("sampled family does not close up into a simplicial circle")
    return SimplicialComplex(edges, close=True)


def verify_n1_eccentric_family(
    samples: int = 12, ecc: float = 10.0, jitter: float = 0.0, rng=0
) -> bool:
    """``H_1`` of the n=1 eccentric ellipse class is ``Z``, in degree ``n(n+1)/2 + n - 1 = 1``."""
    n = 1
    degree = n * (n + 1) // 2 + n - 1
    X = eccentric_family_complex(samples, ecc, jitter, rng)
    prof = homology(X)
    return degree == 1 and prof.group(degree) == (1, ()) and prof.group(0) == (1, ())
