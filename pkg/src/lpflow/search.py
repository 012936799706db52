"""Shooting search for initial ellipsoids whose evolved John ellipsoid is the unit ball.

For a horizon ``t`` the objective is the Hausdorff distance between the
John ellipsoid of the modified flow at time ``t`` and ``B_1(0)``.  Nelder-Mead
minimises it over a chart of ellipsoids; a sequence of increasing horizons is
warm-started and the last minimiser is verified against the energy cap.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from .ellipsoid import Ellipsoid
from .energy import AdmissibleParams, in_admissible_class
from .errors import InvalidArgument
from .flow import FAILED, FlowConfig, run_modified
from .john import min_ellipsoid_of_body
from .sphere_grid import SphereGrid

__all__ = [
    "EllipsoidParams",
    "ObjectiveValue",
    "SearchResult",
    "objective",
    "find_initial",
    "limiting_initial",
    "PENALTY",
    "TOL_SEARCH",
    "CAP_FRACTION",
    "DEFAULT_HORIZONS",
    "default_seed",
    "evaluate",
]

log = logging.getLogger(__name__)

PENALTY = 1e3
TOL_SEARCH = 1e-2
CAP_FRACTION = 0.75
DEFAULT_HORIZONS = (0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class EllipsoidParams:
    """Chart on ellipsoids: center, log semi-axes, rotation angle(s).

    ``rotation`` is one angle in the plane, or ZYZ Euler angles in R^3.
    """

    center: tuple
    log_semi_axes: tuple
    rotation: tuple

    @property
    def dim(self) -> int:
        return len(self.center)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.center, self.log_semi_axes, self.rotation]).astype(float)

    @classmethod
    def from_vector(cls, v, dim: int) -> "EllipsoidParams":
        v = np.asarray(v, dtype=float)
        nrot = 1 if dim == 2 else 3
        if v.shape != (2 * dim + nrot,):
            raise InvalidArgument(f"expected {2 * dim + nrot} parameters, got {v.shape}")
        return cls(
            tuple(v[:dim]), tuple(v[dim : 2 * dim]), tuple(v[2 * dim :])
        )

    def decode(self) -> Ellipsoid:
        d = self.dim
        if d == 2:
            c, s = math.cos(self.rotation[0]), math.sin(self.rotation[0])
            axes = np.array([[c, s], [-s, c]])
        elif d == 3:
            axes = Rotation.from_euler("ZYZ", self.rotation).as_matrix().T
        else:
            raise InvalidArgument(f"unsupported ambient dimension {d}")
        return Ellipsoid(self.center, axes, np.exp(self.log_semi_axes))

    @classmethod
    def encode(cls, E: Ellipsoid) -> "EllipsoidParams":
        axes = np.array(E.axes)
        if np.linalg.det(axes) < 0:
            axes[-1] = -axes[-1]
        if E.dim == 2:
            rot = (math.atan2(axes[0, 1], axes[0, 0]),)
        else:
            rot = tuple(Rotation.from_matrix(axes.T).as_euler("ZYZ"))
        return cls(tuple(E.center), tuple(np.log(E.semi_axes)), rot)

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "log_semi_axes": list(self.log_semi_axes),
            "rotation": list(self.rotation),
        }


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    penalised: bool = False
    flow_status: str = ""


def _violation(E: Ellipsoid, params: AdmissibleParams) -> float:
    vol = E.volume
    amount = 0.0
    if vol < params.bar_v:
        amount += (params.bar_v - vol) / params.bar_v
    if vol > 1.0 / params.bar_v:
        amount += (vol - 1.0 / params.bar_v) * params.bar_v
    if E.eccentricity > params.bar_e:
        amount += (E.eccentricity - params.bar_e) / params.bar_e
    q0 = float(E.quadratic_form(np.zeros(E.dim))[0])
    if q0 > 1.0:
        amount += q0 - 1.0
    return amount


def evaluate(
    eparams: EllipsoidParams,
    t: float,
    cfg: FlowConfig,
    params: AdmissibleParams,
    grid: SphereGrid,
) -> ObjectiveValue:
    """Objective with its bookkeeping (penalty flag, flow status)."""
    try:
        E = eparams.decode()
    except (InvalidArgument, ValueError, OverflowError):
        return ObjectiveValue(PENALTY * 2.0, True, "undecodable")
    ok, _ = in_admissible_class(E, params)
    if not ok:
        return ObjectiveValue(PENALTY * (1.0 + _violation(E, params)), True, "inadmissible")
    # only the terminal body matters here; skip intermediate energy reports
    quiet = replace(cfg, sample_dt=max(cfg.sample_dt, t))
    state = run_modified(E, quiet, params, t, grid=grid, require_admissible=False)
    if state.status == FAILED:
        return ObjectiveValue(PENALTY, True, state.status)
    unit = np.ones(grid.size)
    try:
        john = min_ellipsoid_of_body(state.u)
    except (ArithmeticError, ValueError, RuntimeError):
        return ObjectiveValue(PENALTY, True, "john-failed")
    dist = float(np.max(np.abs(john.support(grid.nodes) - unit)))
    return ObjectiveValue(dist, False, state.status)


def objective(
    eparams: EllipsoidParams,
    t: float,
    cfg: FlowConfig,
    params: AdmissibleParams,
    grid: SphereGrid,
) -> float:
    """Distance from the John ellipsoid of the modified flow at ``t`` to ``B_1(0)``."""
    return evaluate(eparams, t, cfg, params, grid).value


@dataclass
class SearchResult:
    E_star: Ellipsoid | None
    horizon_results: list = field(default_factory=list)
    certified: bool = False
    failing_horizon: float | None = None
    sup_J: float = math.nan
    A0: float = math.nan
    verification_status: str = ""
    traces: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "E_star": None if self.E_star is None else self.E_star.to_dict(),
            "horizons": [
                {"t": t, "E": E.to_dict(), "objective": obj}
                for t, E, obj in self.horizon_results
            ],
            "certified": self.certified,
            "failing_horizon": self.failing_horizon,
            "sup_J": self.sup_J,
            "A0": self.A0,
            "verification_status": self.verification_status,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def traces_csv(self) -> str:
        lines = ["horizon,evaluation,objective"]
        lines += [f"{h:.17g},{k},{v:.17g}" for h, k, v in self.traces]
        return "\n".join(lines) + "\n"


class _TargetReached(Exception):
    pass


def _simplex(x0: np.ndarray, step: float, rng: np.random.Generator | None) -> np.ndarray:
    k = x0.shape[0]
    pts = [x0]
    for i in range(k):
        e = np.zeros(k)
        e[i] = step if rng is None else step * rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5)
        pts.append(x0 + e)
    return np.array(pts)


def _nelder_mead(fun, x0, step, rng, restarts, max_evals, fatol, on_pass=None) -> None:
    """First pass from ``x0`` then jittered restarts from the incumbent ``on_pass()``."""
    x = x0
    for attempt in range(restarts + 1):
        simplex = _simplex(x, step / 10**attempt, None if attempt == 0 else rng)
        minimize(
            fun,
            x,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "maxfev": max_evals,
                "xatol": 1e-10,
                "fatol": fatol,
                "adaptive": True,
            },
        )
        if on_pass is not None:
            x = on_pass()


def find_initial(
    t: float,
    cfg: FlowConfig,
    params: AdmissibleParams,
    seed: EllipsoidParams,
    grid: SphereGrid,
    tol_search: float = TOL_SEARCH,
    max_evals: int = 1500,
    restarts: int = 3,
    step: float = 0.05,
    rng_seed: int = 0,
    trace: list | None = None,
    target_fraction: float = 0.5,
    ramp: int = 3,
) -> tuple[EllipsoidParams, float]:
    """Nelder-Mead minimisation of the objective from ``seed``.

    After the first pass, up to ``restarts`` further passes start from the
    incumbent with a randomly jittered simplex of shrinking size.  The best
    point is returned even when its objective exceeds ``tol_search``; the
    caller decides what "not found" means.  The search stops as soon as an
    evaluation reaches ``target_fraction * tol_search``.

    The objective sharpens quickly with ``t`` (radial and translational
    perturbations of the ball grow exponentially), so a seed that misses the
    tolerance at ``t`` is first carried through the horizons
    ``t / 2^ramp, ..., t / 2``, each warm-started from the previous
    minimiser.  Only evaluations at ``t`` itself compete for the result,
    which is therefore never worse than the seed at ``t``.
    """
    dim = seed.dim
    rng = np.random.default_rng(rng_seed)
    target = tol_search * target_fraction
    counter = [0]
    best = {"x": seed.to_vector(), "f": math.inf}

    def make_fun(h: float, stage: dict):
        def fun(v):
            counter[0] += 1
            val = evaluate(EllipsoidParams.from_vector(v, dim), h, cfg, params, grid).value
            if trace is not None:
                trace.append((h, counter[0], val))
            if val < stage["f"]:
                stage["x"], stage["f"] = np.array(v, dtype=float), val
            if val <= target:
                raise _TargetReached
            return val

        return fun

    fun = make_fun(t, best)
    try:
        fun(best["x"])
    except _TargetReached:
        return EllipsoidParams.from_vector(best["x"], dim), best["f"]

    x0 = best["x"]
    if t > 0:
        for k in range(ramp, 0, -1):
            h = t / 2**k
            stage = {"x": x0, "f": math.inf}
            try:
                _nelder_mead(
                    make_fun(h, stage), x0, step, rng, restarts, max_evals, target * 1e-2,
                    on_pass=lambda: stage["x"],
                )
            except _TargetReached:
                pass
            log.debug("ramp horizon %.3g: objective %.3e", h, stage["f"])
            x0 = stage["x"]

    try:
        if x0 is not best["x"]:
            fun(x0)
        # start from whichever of the seed and the ramp result is better at t
        _nelder_mead(
            fun, best["x"], step, rng, restarts, max_evals, target * 1e-2,
            on_pass=lambda: best["x"],
        )
    except _TargetReached:
        pass
    log.debug("horizon %.3g: objective %.3e", t, best["f"])
    return EllipsoidParams.from_vector(best["x"], dim), best["f"]


def limiting_initial(
    horizons,
    cfg: FlowConfig,
    params: AdmissibleParams,
    grid: SphereGrid,
    seed: EllipsoidParams | None = None,
    tol_search: float = TOL_SEARCH,
    **search_kw,
) -> SearchResult:
    """Warm-started searches over increasing horizons plus a verification run.

    The verification run of the modified flow from the last minimiser on
    ``[0, t_m]`` certifies the result when J never exceeds
    ``CAP_FRACTION * A0`` and the flow does not fail.
    """
    horizons = [float(h) for h in horizons]
    if not horizons:
        raise InvalidArgument("need at least one horizon")
    if any(b <= a for a, b in zip(horizons, horizons[1:])) or horizons[0] < 0:
        raise InvalidArgument("horizons must be nonnegative and strictly increasing")
    if cfg.T_max < horizons[-1]:
        raise InvalidArgument(f"T_max={cfg.T_max} is below the last horizon {horizons[-1]}")
    if seed is None:
        seed = default_seed(grid.dim + 1)
    seed_E = seed.decode()
    ok, why = in_admissible_class(seed_E, params)
    if not ok:
        raise InvalidArgument(f"seed is not admissible: {why}")

    result = SearchResult(E_star=None, A0=params.A0)
    current = seed
    for h in horizons:
        # the horizon schedule is itself the continuation, so no inner ramp
        search_kw.setdefault("ramp", 0)
        current, val = find_initial(
            h, cfg, params, current, grid, tol_search=tol_search, trace=result.traces, **search_kw
        )
        result.horizon_results.append((h, current.decode(), val))
        log.info("horizon %.3g: objective %.3e", h, val)
        if val > tol_search:
            result.failing_horizon = h
            result.E_star = current.decode()
            return result

    result.E_star = current.decode()
    state = run_modified(result.E_star, cfg, params, horizons[-1], grid=grid)
    result.sup_J = state.J_sup
    result.verification_status = state.status
    result.certified = state.status != FAILED and result.sup_J <= CAP_FRACTION * params.A0
    return result


def default_seed(ambient: int) -> EllipsoidParams:
    """A mildly eccentric, off-centre ellipsoid near the unit ball."""
    if ambient == 2:
        return EllipsoidParams.encode(Ellipsoid.from_angle((1.1, 1.0 / 1.1), 0.3, (0.02, -0.01)))
    E = Ellipsoid(
        (0.02, -0.01, 0.015),
        Rotation.from_euler("ZYZ", (0.3, 0.2, -0.1)).as_matrix().T,
        (1.1, 1.0, 1.0 / 1.1),
    )
    return EllipsoidParams.encode(E)
