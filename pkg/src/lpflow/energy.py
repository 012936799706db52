"""The energy functional J, its dissipation rate and the admissible ellipsoid class."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, Iterable, Union

import numpy as np

from .convex_body import SupportField, ma_det, min_eig_b, volume
from .ellipsoid import Ellipsoid, unit_ball_volume
from .errors import ConvexityLost, InvalidArgument
from .john import min_ellipsoid_of_body
from .sphere_grid import SphereGrid, integrate

__all__ = [
    "EnergyReport",
    "AdmissibleParams",
    "field_values",
    "functional_J",
    "dissipation",
    "residual",
    "compute_A0",
    "default_params",
    "energy_report",
    "in_admissible_class",
    "property_P_scan",
    "loglog_slope",
]

FieldSpec = Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def field_values(f: FieldSpec, grid: SphereGrid) -> np.ndarray:
    """Samples of ``f`` on ``grid``: constant, array, or callable of the nodes."""
    if callable(f):
        vals = np.asarray(f(grid.nodes), dtype=float)
    elif np.ndim(f) == 0:
        vals = np.full(grid.size, float(f))
    else:
        vals = np.asarray(f, dtype=float)
    if vals.shape != (grid.size,):
        raise InvalidArgument(f"f has shape {vals.shape}, grid has {grid.size} nodes")
    return vals


def _check_p(p: float) -> None:
    if p == 0:
        raise InvalidArgument("p must be nonzero")


def functional_J(u: SupportField, f: FieldSpec, p: float) -> float:
    """``vol(body) - (1/p) * int f u^p``."""
    _check_p(p)
    fv = field_values(f, u.grid)
    return volume(u) - integrate(u.grid, fv * u.values**p) / p


def _det_checked(u: SupportField) -> np.ndarray:
    lam = min_eig_b(u)
    bad = np.flatnonzero(lam <= 0)
    if bad.size:
        raise ConvexityLost(int(bad[0]), float(lam[bad[0]]))
    return ma_det(u)


def dissipation(u: SupportField, f: FieldSpec, p: float) -> float:
    """``int (1/K - f u^{p-1})^2 u K``: the rate of change of J along the flow."""
    _check_p(p)
    fv = field_values(f, u.grid)
    det = _det_checked(u)
    gap = det - fv * u.values ** (p - 1.0)
    return integrate(u.grid, gap * gap * u.values / det)


def residual(u: SupportField, f: FieldSpec, p: float) -> float:
    """Max-norm of ``det(nabla^2 u + u I) - f u^{p-1}``."""
    fv = field_values(f, u.grid)
    return float(np.max(np.abs(ma_det(u) - fv * u.values ** (p - 1.0))))


def compute_A0(f: FieldSpec, p: float, grid: SphereGrid) -> float:
    """Energy threshold ``2 * (-|f|_1 / (p (2(n+1))^p) + 2^{n+1} vol(B_1))``.

    Only defined in the super-critical range ``p < -n-1``.
    """
    n = grid.dim
    if not p < -n - 1:
        raise InvalidArgument(f"need p < -{n + 1} for n={n}, got p={p}")
    fv = field_values(f, grid)
    if np.any(fv <= 0):
        raise InvalidArgument("f must be positive")
    f_l1 = integrate(grid, fv)
    return 2.0 * (-f_l1 / (p * (2.0 * (n + 1)) ** p) + 2.0 ** (n + 1) * unit_ball_volume(n + 1))


@dataclass(frozen=True)
class AdmissibleParams:
    """Bounds defining the admissible ellipsoid class, plus the threshold A0."""

    A0: float
    bar_e: float = 10.0
    bar_v: float = 0.05
    bar_d: float = 0.05

    def __post_init__(self):
        if not self.bar_e > 1:
            raise InvalidArgument("bar_e must exceed 1")
        if not 0 < self.bar_v < 1:
            raise InvalidArgument("bar_v must lie in (0, 1)")
        if not self.bar_d > 0:
            raise InvalidArgument("bar_d must be positive")
        if not self.A0 > 0:
            raise InvalidArgument("A0 must be positive")


def default_params(f: FieldSpec, p: float, grid: SphereGrid, **overrides) -> AdmissibleParams:
    return AdmissibleParams(A0=compute_A0(f, p, grid), **overrides)


@dataclass(frozen=True)
class EnergyReport:
    J: float
    dissipation: float
    vol: float
    ecc: float
    origin_dist: float
    residual: float
    t: float = 0.0

    CSV_FIELDS = ("t", "J", "dissipation", "vol", "ecc", "origin_dist", "residual")

    def csv_row(self) -> str:
        return ",".join(f"{getattr(self, k):.17g}" for k in self.CSV_FIELDS)

    @classmethod
    def from_csv_row(cls, line: str) -> "EnergyReport":
        vals = [float(x) for x in line.strip().split(",")]
        return cls(**dict(zip(cls.CSV_FIELDS, vals)))

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def energy_report(
    u: SupportField,
    f: FieldSpec,
    p: float,
    params: AdmissibleParams | None = None,
    t: float = 0.0,
    with_ecc: bool = True,
) -> EnergyReport:
    """All scalar energy diagnostics of ``u`` at one instant.

    ``params`` is accepted for symmetry with the admissibility check; the
    report itself does not depend on it.  ``with_ecc=False`` skips the John
    ellipsoid (``ecc`` is then NaN).
    """
    fv = field_values(f, u.grid)
    ecc = min_ellipsoid_of_body(u).eccentricity if with_ecc else math.nan
    _check_p(p)
    vol = volume(u)
    return EnergyReport(
        J=vol - integrate(u.grid, fv * u.values**p) / p,
        dissipation=dissipation(u, fv, p),
        vol=vol,
        ecc=ecc,
        origin_dist=float(np.min(u.values)),
        residual=residual(u, fv, p),
        t=t,
    )


def in_admissible_class(E: Ellipsoid, params: AdmissibleParams) -> tuple[bool, str]:
    """Membership in the admissible class; the reason names the first violated bound."""
    vol = E.volume
    if vol < params.bar_v:
        return False, "volume floor"
    if vol > 1.0 / params.bar_v:
        return False, "volume cap"
    if E.eccentricity > params.bar_e:
        return False, "eccentricity cap"
    if not E.contains_origin():
        return False, "origin outside"
    return True, "ok"


def property_P_scan(
    family: Iterable[tuple[float, SupportField]], f: FieldSpec, p: float
) -> list[tuple[float, float]]:
    """Tabulate ``(parameter, J)`` along a family of bodies."""
    return [(float(param), functional_J(u, f, p)) for param, u in family]


def loglog_slope(table: Iterable[tuple[float, float]]) -> float:
    """Least-squares slope of ``log J`` against ``log parameter``."""
    x, y = np.log(np.array(list(table), dtype=float)).T
    return float(np.polyfit(x, y, 1)[0])
