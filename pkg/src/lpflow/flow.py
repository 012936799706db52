"""Explicit RK4 integration of the support-function Gauss curvature flow.

The evolution equation is ``du/dt = -f u^p / det(nabla^2 u + u I) + u``.
Along the flow J is non-decreasing, with rate equal to the dissipation.
``run_modified`` adds the threshold controller: the flow is never started
when J(initial) >= A0, and is frozen at the last state before J reaches A0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from .convex_body import SupportField, curvature_data, support_of_ellipsoid
from .ellipsoid import Ellipsoid
from .energy import (
    AdmissibleParams,
    EnergyReport,
    energy_report,
    field_values,
    functional_J,
    in_admissible_class,
)
from .errors import ConvexityLost, InvalidArgument
from .sphere_grid import SphereGrid, covariant_hessian_plus_uI, gradient

__all__ = [
    "FlowConfig",
    "FlowState",
    "Diagnostics",
    "RUNNING",
    "FROZEN",
    "STATIONARY_INITIAL",
    "CONVERGED",
    "FAILED",
    "rhs",
    "step",
    "initial_state",
    "run_raw",
    "run_modified",
    "monotonicity_check",
    "MonotonicityReport",
    "curvature_diagnostics",
]

log = logging.getLogger(__name__)

RUNNING = "running"
FROZEN = "frozen-at-A0"
STATIONARY_INITIAL = "stationary-initial"
CONVERGED = "converged"
FAILED = "failed"

# stability interval of classical RK4 on the negative real axis
_RK4_REAL_STABILITY = 2.785


@dataclass
class FlowConfig:
    """Flow parameters.  ``f`` may be a constant, grid samples or a callable of nodes."""

    p: float
    f: object = 1.0
    dt_init: float = 1e-3
    dt_min: float = 1e-9
    dt_max: float = 1e-2
    eps_b: float = 1e-6
    tol_residual: float = 1e-4
    T_max: float = 100.0
    mode: str = "raw"
    # fraction of the RK4 parabolic stability limit; None disables the cap
    cfl: Optional[float] = 0.9
    sample_dt: float = 0.0
    stop_on_converged: bool = False
    tol_dissipation: float = math.inf

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise InvalidArgument("need 0 < dt_min <= dt_init <= dt_max")
        if not self.eps_b > 0:
            raise InvalidArgument("eps_b must be positive")
        if self.mode not in ("raw", "modified"):
            raise InvalidArgument(f"unknown mode {self.mode!r}")
        if self.T_max <= 0:
            raise InvalidArgument("T_max must be positive")

    def check(self, grid: SphereGrid) -> np.ndarray:
        """Validate against ``grid`` and return the sampled ``f``."""
        n = grid.dim
        if not self.p < -n - 1:
            raise InvalidArgument(
                f"super-critical range requires p < {-n - 1} for n={n}, got p={self.p}"
            )
        fv = field_values(self.f, grid)
        if np.any(fv <= 0):
            raise InvalidArgument("f must be positive")
        return fv


@dataclass(frozen=True)
class Diagnostics:
    t: float
    max_K: float
    min_kappa: float
    min_u: float
    max_u: float
    max_grad: float


@dataclass
class FlowState:
    """Current body, time, adaptive step and append-only logs."""

    u: SupportField
    t: float = 0.0
    dt: float = 1e-3
    status: str = RUNNING
    reason: str = ""
    history: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    n_steps: int = 0
    n_rejected: int = 0
    t_frozen: Optional[float] = None
    # largest J seen at any accepted step where J was evaluated
    J_sup: float = -math.inf
    # (values, stage) cache of the right-hand side at the current u
    stage: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def J_history(self) -> list[tuple[float, EnergyReport]]:
        return [(r.t, r) for r in self.history]

    @property
    def active(self) -> bool:
        return self.status == RUNNING

    def final_dict(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "t": self.t,
            "t_frozen": self.t_frozen,
            "n_steps": self.n_steps,
            "n_rejected": self.n_rejected,
            "u": self.u.to_dict(),
        }


def _b_min_and_det(grid: SphereGrid, u: np.ndarray):
    b = covariant_hessian_plus_uI(grid, u)
    if grid.dim == 1:
        d = b[:, 0, 0]
        return d, d, d
    a, c, off = b[:, 0, 0], b[:, 1, 1], b[:, 0, 1]
    det = a * c - off * off
    disc = np.sqrt(0.25 * (a - c) ** 2 + off * off)
    lo = 0.5 * (a + c) - disc
    hi = 0.5 * (a + c) + disc
    return det, lo, hi


def rhs(grid: SphereGrid, u: np.ndarray, f: np.ndarray, p: float) -> np.ndarray:
    """Right-hand side ``-f u^p / det(b) + u`` (no convexity check)."""
    det, _, _ = _b_min_and_det(grid, u)
    return -f * u**p / det + u


@lru_cache(maxsize=None)
def _stencil_spectrum(grid: SphereGrid) -> np.ndarray | float:
    """Upper bound on the spectral radius of the discrete second-derivative stencils."""
    if grid.dim == 1:
        h = 2.0 * np.pi / grid.resolution
        return 4.0 / h**2
    h = np.pi / grid.resolution
    sin = np.repeat(np.sin(grid.theta), 2 * grid.resolution)
    # the longitude second derivative uses the fourth-order stencil (radius 16/3)
    return 4.0 / h**2 + (16.0 / 3.0) / (sin * h) ** 2


def _stage(grid: SphereGrid, u: np.ndarray, f: np.ndarray, p: float):
    """``(rhs, det b, min eig b)`` at ``u``, or None if ``u`` is not positive and convex."""
    if grid.dim == 1:
        inv_h2 = (grid.resolution / (2.0 * np.pi)) ** 2
        det = (np.concatenate((u[-1:], u[:-1])) + np.concatenate((u[1:], u[:1])) - 2.0 * u) * inv_h2 + u
        lo = det
    else:
        det, lo, _ = _b_min_and_det(grid, u)
    if u.min() <= 0 or lo.min() <= 0:
        return None
    return -f * u**p / det + u, det, lo


def _stable_dt(grid: SphereGrid, u: np.ndarray, f: np.ndarray, p: float, stage=None) -> float:
    """RK4 stability limit for the linearised curvature term at ``u``."""
    if stage is None:
        det, lo, _ = _b_min_and_det(grid, u)
    else:
        _, det, lo = stage
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = f * u**p / (det * lo)
    worst = np.max(coef * _stencil_spectrum(grid))
    if not np.isfinite(worst) or worst <= 0:
        return math.inf
    return _RK4_REAL_STABILITY / worst


def _rk4(grid, u, f, p, dt, first=None):
    if first is not None:
        k1 = first[0]
    else:
        st = _stage(grid, u, f, p)
        if st is None:
            return None
        k1 = st[0]
    k = [k1]
    for c in (0.5, 0.5, 1.0):
        st = _stage(grid, u + c * dt * k[-1], f, p)
        if st is None:
            return None
        k.append(st[0])
    return u + (dt / 6.0) * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3])


def step(state: FlowState, cfg: FlowConfig, t_end: float | None = None) -> FlowState:
    """Advance by one accepted RK4 step.

    A trial step is rejected when any stage or the result has ``u <= 0`` or
    ``min eig(b) < eps_b``; ``dt`` is then halved.  Below ``dt_min`` the
    state is returned with status failed.  Frozen, stationary and failed
    states are returned unchanged.
    """
    if state.status != RUNNING:
        return state
    return _step(state, cfg, cfg.check(state.u.grid), t_end)


def _step(state: FlowState, cfg: FlowConfig, f: np.ndarray, t_end: float | None) -> FlowState:
    grid = state.u.grid
    u = state.u.values
    # the accepted trial of the previous step already carries its stage data
    first = state.stage if state.stage is not None and state.stage[0] is u else None
    first = None if first is None else first[1]
    if first is None:
        first = _stage(grid, u, f, cfg.p)
    dt = min(state.dt, cfg.dt_max)
    if cfg.cfl is not None and first is not None:
        dt = min(dt, cfg.cfl * _stable_dt(grid, u, f, cfg.p, first))
    room = None if t_end is None else t_end - state.t
    rejected = 0
    while True:
        h = dt if room is None else min(dt, room)
        if dt < cfg.dt_min:
            return replace(
                state,
                status=FAILED,
                reason="convexity lost",
                n_rejected=state.n_rejected + rejected,
            )
        trial = _rk4(grid, u, f, cfg.p, h, first)
        if trial is not None and np.isfinite(trial).all():
            st = _stage(grid, trial, f, cfg.p)
            if st is not None and st[2].min() >= cfg.eps_b:
                break
        rejected += 1
        dt *= 0.5
    t_new = state.t + h
    if room is not None and h >= room:
        t_new = t_end
    new_u = state.u.with_values(trial)
    return replace(
        state,
        u=new_u,
        t=t_new,
        dt=min(dt * 1.2, cfg.dt_max) if rejected == 0 else dt,
        n_steps=state.n_steps + 1,
        n_rejected=state.n_rejected + rejected,
        stage=(new_u.values, st),
    )


def curvature_diagnostics(state: FlowState) -> Diagnostics:
    """Gauss curvature maximum, smallest principal curvature and C^0 bounds."""
    u = state.u
    cd = curvature_data(u)
    grad = gradient(u.grid, u.values)
    return Diagnostics(
        t=state.t,
        max_K=float(cd.K.max()),
        min_kappa=float(cd.kappa.min()),
        min_u=float(u.values.min()),
        max_u=float(u.values.max()),
        max_grad=float(np.linalg.norm(grad, axis=1).max()),
    )


def _record(state: FlowState, cfg: FlowConfig, with_ecc: bool) -> EnergyReport:
    rep = energy_report(state.u, cfg.f, cfg.p, t=state.t, with_ecc=with_ecc)
    if state.history and rep.t <= state.history[-1].t:
        return rep
    state.history.append(rep)
    state.J_sup = max(state.J_sup, rep.J)
    try:
        state.diagnostics.append(curvature_diagnostics(state))
    except ConvexityLost:
        pass
    return rep


def initial_state(u0: SupportField, cfg: FlowConfig) -> FlowState:
    cfg.check(u0.grid)
    return FlowState(u=u0, t=0.0, dt=cfg.dt_init)


def _converged(rep: EnergyReport, cfg: FlowConfig) -> bool:
    return rep.residual <= cfg.tol_residual and rep.dissipation <= cfg.tol_dissipation


def _advance(
    state: FlowState,
    cfg: FlowConfig,
    T: float,
    A0: float | None,
    with_ecc: bool,
) -> FlowState:
    """Shared time loop for the raw and the modified flow."""
    if T > cfg.T_max:
        raise InvalidArgument(f"horizon {T} exceeds T_max={cfg.T_max}")
    f = cfg.check(state.u.grid)
    next_sample = state.t + cfg.sample_dt
    if not state.history:
        _record(state, cfg, with_ecc)
    while state.t < T and state.status == RUNNING:
        new = _step(state, cfg, f, T)
        if new.status != RUNNING:
            log.info("flow stopped at t=%.6g: %s", new.t, new.reason)
            state = new
            break
        if A0 is not None:
            J = functional_J(new.u, f, cfg.p)
            if J >= A0:
                state.status = FROZEN
                state.t_frozen = state.t
                state.n_steps = new.n_steps
                break
            new.J_sup = max(new.J_sup, J)
        state = new
        if cfg.sample_dt <= 0 or state.t >= next_sample - 1e-12 or state.t >= T:
            rep = _record(state, cfg, with_ecc)
            next_sample = state.t + cfg.sample_dt
            if cfg.stop_on_converged and _converged(rep, cfg):
                state.status = CONVERGED
                break
    if state.status in (RUNNING, CONVERGED):
        last = state.history[-1] if state.history else _record(state, cfg, with_ecc)
        if last.t < state.t:
            last = _record(state, cfg, with_ecc)
        if _converged(last, cfg):
            state.status = CONVERGED
    if state.status == FROZEN:
        state.t = max(state.t, T)
    return state


def run_raw(
    u0: SupportField, cfg: FlowConfig, T: float, with_ecc: bool = True
) -> FlowState:
    """Integrate the unmodified flow on ``[0, T]``."""
    return _advance(initial_state(u0, cfg), cfg, T, None, with_ecc)


def run_modified(
    E0: Ellipsoid | SupportField,
    cfg: FlowConfig,
    params: AdmissibleParams,
    T: float,
    grid: SphereGrid | None = None,
    with_ecc: bool = False,
    require_admissible: bool = True,
) -> FlowState:
    """Threshold-controlled flow from an ellipsoid (or any support field)."""
    if isinstance(E0, Ellipsoid):
        if grid is None:
            raise InvalidArgument("a grid is required to sample an ellipsoid")
        if require_admissible:
            ok, why = in_admissible_class(E0, params)
            if not ok:
                raise InvalidArgument(f"initial ellipsoid not admissible: {why}")
        u0 = support_of_ellipsoid(E0, grid)
    else:
        u0 = E0
    state = initial_state(u0, cfg)
    J0 = functional_J(u0, cfg.f, cfg.p)
    if J0 >= params.A0:
        state.status = STATIONARY_INITIAL
        state.history.append(
            energy_report(u0, cfg.f, cfg.p, t=0.0, with_ecc=with_ecc)
        )
        state.J_sup = J0
        state.t = T
        return state
    return _advance(state, cfg, T, params.A0, with_ecc)


@dataclass
class MonotonicityReport:
    violations: list
    rates: list  # (t, discrete dJ/dt, dissipation, relative gap)

    @property
    def passed(self) -> bool:
        return not self.violations

    def rate_gap_at(self, t: float) -> tuple[float, float, float, float]:
        """Rate comparison entry nearest to time ``t``."""
        return min(self.rates, key=lambda r: abs(r[0] - t))


def monotonicity_check(state: FlowState, dt: float | None = None) -> MonotonicityReport:
    """Scan the J history for decreases beyond ``10 dt^2 max(1, |J|)``.

    Also pairs a centred difference of J with the recorded dissipation at
    each interior history point.
    """
    hist = state.history
    if len(hist) < 2:
        raise InvalidArgument("need at least two history entries")
    if dt is None:
        dt = max(b.t - a.t for a, b in zip(hist, hist[1:]))
    violations = []
    for a, b in zip(hist, hist[1:]):
        tol = 10.0 * dt * dt * max(1.0, abs(a.J))
        if b.J - a.J < -tol:
            violations.append((a.t, b.t, b.J - a.J))
    rates = []
    for a, mid, b in zip(hist, hist[1:], hist[2:]):
        # second-order difference on a possibly non-uniform time grid
        h1, h2 = mid.t - a.t, b.t - mid.t
        rate = (
            -h2 / (h1 * (h1 + h2)) * a.J
            + (h2 - h1) / (h1 * h2) * mid.J
            + h1 / (h2 * (h1 + h2)) * b.J
        )
        denom = max(abs(mid.dissipation), 1e-300)
        rates.append((mid.t, rate, mid.dissipation, abs(rate - mid.dissipation) / denom))
    return MonotonicityReport(violations, rates)
