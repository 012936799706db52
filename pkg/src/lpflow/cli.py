"""Command line harness: run configurations, run directories and plot data.

Subcommands
-----------
flow      integrate the raw or modified flow from an initial body
search    shooting search for an initial ellipsoid (n = 1 or 2)
scan      energy along the family B_1((1-d) e_1) of balls near the origin
homology  homology suites on the built-in complexes
report    write gnuplot-ready two-column files from a run directory

Exit codes: 0 success, 2 validation error, 3 numerical failure,
4 search did not reach the tolerance.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import homology as hom
from .convex_body import support_of_ellipsoid
from .ellipsoid import Ellipsoid
from .energy import default_params, functional_J, loglog_slope
from .errors import DegenerateInput, InvalidArgument, InvalidComplex, IterationLimit
from .flow import FAILED, FlowConfig, run_modified, run_raw
from .search import DEFAULT_HORIZONS, default_seed, limiting_initial
from .sphere_grid import make_grid

__all__ = ["RunConfig", "cli_run", "emit_plotdata", "main", "parse_f", "parse_init", "worker_count"]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_FAILED = 3
EXIT_NOT_FOUND = 4

KINDS = ("flow", "modified-flow", "search", "property-scan", "homology-suite")
WORKERS_ENV = "LPFLOW_WORKERS"
FLOW_KEYS = {f.name for f in fields(FlowConfig)} - {"p", "f", "mode"}
PARAM_KEYS = {"bar_e", "bar_v", "bar_d"}


def _g(x: float) -> str:
    return f"{x:.17g}"


def worker_count() -> int:
    """Worker processes for sweeps, from ``LPFLOW_WORKERS`` (default 1)."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise InvalidArgument(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise InvalidArgument(f"{WORKERS_ENV} must be at least 1")
    return n


# -- f and initial-body specifications ----------------------------------------
def parse_f(spec: str, grid):
    """Samples of f on ``grid`` from ``const:c``, ``cosine-bump:a`` or a file.

    ``cosine-bump:a`` is ``1 + a * x_last`` (a bump towards the last axis),
    which needs ``|a| < 1`` to stay positive.  A file holds one sample per
    grid node (``.npy`` or whitespace-separated text).
    """
    kind, _, arg = spec.partition(":")
    if kind == "const":
        c = _float(arg, "const")
        if c <= 0:
            raise InvalidArgument("const f must be positive")
        return np.full(grid.size, c)
    if kind == "cosine-bump":
        a = _float(arg, "cosine-bump")
        if abs(a) >= 1:
            raise InvalidArgument("cosine-bump amplitude must satisfy |a| < 1")
        return 1.0 + a * grid.nodes[:, -1]
    path = Path(spec)
    if not path.is_file():
        raise InvalidArgument(f"f spec {spec!r} is neither a builtin nor a file")
    vals = np.load(path) if path.suffix == ".npy" else np.loadtxt(path)
    vals = np.asarray(vals, dtype=float).ravel()
    if vals.shape != (grid.size,):
        raise InvalidArgument(f"f file has {vals.size} samples, grid has {grid.size}")
    if np.any(vals <= 0):
        raise InvalidArgument("f samples must be positive")
    return vals


def _float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise InvalidArgument(f"bad number {text!r} in {what} spec") from exc


def parse_init(spec: str, ambient: int) -> Ellipsoid:
    """Initial ellipsoid from ``ball:r``, ``ellipsoid:a1,...,ad[;angle[;c1,...,cd]]``
    (plane only for the angle) or a JSON file written by :meth:`Ellipsoid.to_json`.
    """
    kind, _, arg = spec.partition(":")
    if kind == "ball":
        r = _float(arg or "1", "ball")
        if r <= 0:
            raise InvalidArgument("ball radius must be positive")
        return Ellipsoid.ball(r, dim=ambient)
    if kind == "ellipsoid":
        parts = arg.split(";")
        semi = [_float(x, "ellipsoid") for x in parts[0].split(",")]
        if len(semi) != ambient:
            raise InvalidArgument(f"need {ambient} semi-axes, got {len(semi)}")
        if min(semi) <= 0:
            raise InvalidArgument("semi-axes must be positive")
        angle = _float(parts[1], "ellipsoid") if len(parts) > 1 else 0.0
        center = (
            [_float(x, "ellipsoid") for x in parts[2].split(",")]
            if len(parts) > 2
            else [0.0] * ambient
        )
        if len(center) != ambient:
            raise InvalidArgument("center has the wrong dimension")
        if ambient == 2:
            return Ellipsoid.from_angle(semi, angle, center)
        if angle:
            raise InvalidArgument("a rotation angle is only supported in the plane")
        return Ellipsoid(center, np.eye(ambient), semi)
    path = Path(spec)
    if path.is_file():
        E = Ellipsoid.from_json(path.read_text())
        if E.dim != ambient:
            raise InvalidArgument(f"ellipsoid file has dimension {E.dim}, need {ambient}")
        return E
    raise InvalidArgument(f"unknown init spec {spec!r}")


# -- run configuration -----------------------------------------------------------
@dataclass
class RunConfig:
    """Effective configuration of one experiment; written to ``config.json``."""

    kind: str = "flow"
    dim: int = 1
    resolution: int = 256
    p: float = -3.0
    f: str = "const:1"
    init: str = "ball:1"
    T: float = 1.0
    flow: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    out: str | None = None
    seed: int = 0
    horizons: list = field(default_factory=lambda: list(DEFAULT_HORIZONS))
    tol_search: float = 1e-2
    scan_d: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    suite: str = "paper"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidArgument(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown experiment kind {self.kind!r}")
        if self.dim not in (1, 2):
            raise InvalidArgument(f"dim must be 1 or 2, got {self.dim}")
        unknown = sorted(set(self.flow) - FLOW_KEYS)
        if unknown:
            raise InvalidArgument(f"unknown flow keys: {', '.join(unknown)}")
        unknown = sorted(set(self.params) - PARAM_KEYS)
        if unknown:
            raise InvalidArgument(f"unknown admissible-class keys: {', '.join(unknown)}")
        if self.kind == "homology-suite":
            if self.suite not in ("paper", "corpus"):
                raise InvalidArgument(f"unknown homology suite {self.suite!r}")
            return
        if self.kind in ("flow", "modified-flow", "search") and not self.p < -self.dim - 1:
            raise InvalidArgument(
                f"super-critical range requires p < {-self.dim - 1} for n={self.dim}, got p={self.p}"
            )
        if self.T <= 0 and self.kind in ("flow", "modified-flow"):
            raise InvalidArgument("T must be positive")
        grid = make_grid(self.dim, self.resolution)
        parse_f(self.f, grid)
        if self.kind in ("flow", "modified-flow"):
            parse_init(self.init, self.dim + 1)
        if self.kind == "property-scan" and not all(0 < d < 1 for d in self.scan_d):
            raise InvalidArgument("scan distances must lie in (0, 1)")
        self.flow_config()

    def flow_config(self) -> FlowConfig:
        grid = make_grid(self.dim, self.resolution)
        opts = dict(self.flow)
        opts.setdefault("T_max", max(self.T, max(self.horizons, default=0.0)))
        if self.kind in ("flow", "modified-flow"):
            # one series row per sample interval rather than per time step
            opts.setdefault("sample_dt", self.T / 500.0)
        mode = "modified" if self.kind in ("modified-flow", "search") else "raw"
        return FlowConfig(p=self.p, f=parse_f(self.f, grid), mode=mode, **opts)

    def admissible(self):
        grid = make_grid(self.dim, self.resolution)
        return default_params(parse_f(self.f, grid), self.p, grid, **self.params)


# -- experiments ----------------------------------------------------------------
def _prepare_out(cfg: RunConfig) -> Path | None:
    if cfg.out is None:
        return None
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    return out


def _series_csv(state) -> str:
    diag = {d.t: d for d in state.diagnostics}
    header = "t,J,dissipation,vol,ecc,origin_dist,residual,max_K,min_kappa"
    lines = [header]
    for rep in state.history:
        d = diag.get(rep.t)
        tail = (_g(d.max_K), _g(d.min_kappa)) if d else ("nan", "nan")
        lines.append(rep.csv_row() + "," + ",".join(tail))
    return "\n".join(lines) + "\n"


def run_flow(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    grid = make_grid(cfg.dim, cfg.resolution)
    fcfg = cfg.flow_config()
    E0 = parse_init(cfg.init, cfg.dim + 1)
    if cfg.kind == "modified-flow":
        state = run_modified(E0, fcfg, cfg.admissible(), cfg.T, grid=grid)
    else:
        u0 = support_of_ellipsoid(E0, grid, require_interior=True)
        state = run_raw(u0, fcfg, cfg.T, with_ecc=False)
    final = state.final_dict()
    final["J_sup"] = state.J_sup
    if state.history:
        final["report"] = state.history[-1].to_dict()
    if out is not None:
        (out / "series.csv").write_text(_series_csv(state))
        (out / "final.json").write_text(json.dumps(final, indent=2) + "\n")
    last = state.history[-1] if state.history else None
    print(f"status {state.status} t {_g(state.t)}" + (f" J {_g(last.J)}" if last else ""))
    if state.status == FAILED:
        print(f"flow failed: {state.reason}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def run_search(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    grid = make_grid(cfg.dim, cfg.resolution)
    seed = default_seed(cfg.dim + 1)
    result = limiting_initial(
        cfg.horizons,
        cfg.flow_config(),
        cfg.admissible(),
        grid,
        seed=seed,
        tol_search=cfg.tol_search,
        rng_seed=cfg.seed,
    )
    if out is not None:
        (out / "search.json").write_text(result.to_json() + "\n")
        (out / "traces.csv").write_text(result.traces_csv())
    print(result.to_json())
    if result.failing_horizon is not None:
        print(f"no initial ellipsoid found at horizon {result.failing_horizon}", file=sys.stderr)
        return EXIT_NOT_FOUND
    if not result.certified:
        print("search converged but the energy certificate failed", file=sys.stderr)
    return EXIT_OK


def _scan_point(args) -> tuple[float, float]:
    dim, resolution, p, fspec, d = args
    grid = make_grid(dim, resolution)
    center = np.zeros(dim + 1)
    center[0] = 1.0 - d
    u = support_of_ellipsoid(Ellipsoid.ball(1.0, center), grid)
    return d, functional_J(u, parse_f(fspec, grid), p)


def run_scan(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    jobs = [(cfg.dim, cfg.resolution, cfg.p, cfg.f, float(d)) for d in cfg.scan_d]
    workers = worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            table = list(pool.map(_scan_point, jobs))
    else:
        table = [_scan_point(j) for j in jobs]
    slope = loglog_slope(table)
    if out is not None:
        lines = ["d,J"] + [f"{_g(d)},{_g(J)}" for d, J in table]
        (out / "scan.csv").write_text("\n".join(lines) + "\n")
        (out / "final.json").write_text(json.dumps({"slope": slope}, indent=2) + "\n")
    for d, J in table:
        print(f"{_g(d)} {_g(J)}")
    print(f"slope {_g(slope)}")
    return EXIT_OK


def homology_suite(name: str) -> dict:
    """Homology profiles of the built-in complexes, keyed by name."""
    if name == "paper":
        complexes = {
            "eccentric_family_n1": hom.eccentric_family_complex(),
            "S1": hom.circle(),
            "S2": hom.sphere2(),
            "RP2": hom.rp2(),
            "suspension_RP2": hom.suspension(hom.rp2()),
            "S1xS2": hom.product(hom.circle(), hom.sphere2()),
        }
    else:
        rng = np.random.default_rng(0)
        complexes = {f"random_{k}": hom.random_complex(rng) for k in range(5)}
        complexes.update(S1=hom.circle(), S2=hom.sphere2(), RP2=hom.rp2())
    return {name: hom.homology(X).to_dict() for name, X in complexes.items()}


def run_homology(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    data = homology_suite(cfg.suite)
    if cfg.suite == "paper":
        data["n1_family_H1_is_Z"] = hom.verify_n1_eccentric_family()
    text = json.dumps(data, indent=2)
    if out is not None:
        (out / "homology.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


RUNNERS = {
    "flow": run_flow,
    "modified-flow": run_flow,
    "search": run_search,
    "property-scan": run_scan,
    "homology-suite": run_homology,
}


# -- plot data --------------------------------------------------------------------
def emit_plotdata(run_dir) -> list[Path]:
    """Write two-column ``.dat`` files for a flow or scan run directory.

    Flow runs give ``t_J.dat``, ``t_dissipation.dat`` and ``t_maxK.dat``; scan
    runs give ``logd_logJ.dat`` ending in a ``# slope`` comment line.

    Raises
    ------
    InvalidArgument
        Missing directory or artifacts.
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise InvalidArgument(f"{run_dir} is not a directory")
    written = []
    series = run_dir / "series.csv"
    scan = run_dir / "scan.csv"
    if series.is_file():
        data = np.genfromtxt(series, delimiter=",", names=True)
        data = np.atleast_1d(data)
        for col, name in (("J", "t_J.dat"), ("dissipation", "t_dissipation.dat"), ("max_K", "t_maxK.dat")):
            path = run_dir / name
            lines = [f"# t {col}"] + [f"{_g(t)} {_g(v)}" for t, v in zip(data["t"], data[col])]
            path.write_text("\n".join(lines) + "\n")
            written.append(path)
    if scan.is_file():
        data = np.atleast_1d(np.genfromtxt(scan, delimiter=",", names=True))
        x, y = np.log(data["d"]), np.log(data["J"])
        slope, intercept = np.polyfit(x, y, 1)
        path = run_dir / "logd_logJ.dat"
        lines = ["# log_d log_J"] + [f"{_g(a)} {_g(b)}" for a, b in zip(x, y)]
        lines.append(f"# slope {_g(slope)} intercept {_g(intercept)}")
        path.write_text("\n".join(lines) + "\n")
        written.append(path)
    if not written:
        raise InvalidArgument(f"no run artifacts (series.csv or scan.csv) in {run_dir}")
    return written


# -- argument parsing -----------------------------------------------------------------
def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, with_flow=True):
        sp.add_argument("--config", help="JSON run configuration; flags override it")
        sp.add_argument("--dim", type=int, help="sphere dimension n (1 or 2)")
        sp.add_argument("--resolution", type=int, help="grid points on S^1, or polar rings on S^2")
        sp.add_argument("--p", type=float, help="exponent, must satisfy p < -n-1")
        sp.add_argument("--f", dest="f", help="const:c, cosine-bump:a, or a .npy/text file of grid samples")
        sp.add_argument("--out", help="run directory for artifacts")
        sp.add_argument("--seed", type=int, help="random seed for search restarts")
        if with_flow:
            sp.add_argument("--dt", type=float, help="initial time step")
            sp.add_argument("--dt-max", type=float, help="largest accepted time step")
            sp.add_argument("--cfl", type=float, help="fraction of the RK4 stability limit; 0 disables")
            sp.add_argument("--sample-dt", type=float, help="time between recorded energy samples")
            sp.add_argument("--bar-e", type=float, help="eccentricity cap of the admissible class")
            sp.add_argument("--bar-v", type=float, help="volume bounds [bar_v, 1/bar_v] of the admissible class")
            sp.add_argument("--bar-d", type=float, help="origin-distance floor (recorded with the parameters; not a membership test)")

    sp = sub.add_parser("flow", help="integrate the flow")
    common(sp)
    sp.add_argument("--init", help="ball:r, ellipsoid:a1,..;angle;c1,.. or a JSON ellipsoid file")
    sp.add_argument("--T", type=float, help="final time")
    sp.add_argument("--mode", choices=("raw", "modified"), help="modified adds the A0 threshold controller")

    sp = sub.add_parser("search", help="search for an initial ellipsoid")
    common(sp)
    sp.add_argument("--horizons", type=_floats, help="comma-separated increasing horizons")
    sp.add_argument("--tol-search", type=float, help="objective target per horizon")

    sp = sub.add_parser("scan", help="energy of balls approaching the origin")
    common(sp, with_flow=False)
    sp.add_argument("--d", dest="scan_d", type=_floats, help="comma-separated distances d of the scanned balls")

    sp = sub.add_parser("homology", help="homology suite")
    sp.add_argument("--suite", choices=("paper", "corpus"), default="paper")
    sp.add_argument("--out", help="directory for homology.json")

    sp = sub.add_parser("report", help="emit plot data for a run directory")
    sp.add_argument("run_dir", help="directory written by flow, search or scan")
    return parser


def _config_from_args(args) -> RunConfig:
    kind = {
        "flow": "modified-flow" if getattr(args, "mode", None) == "modified" else "flow",
        "search": "search",
        "scan": "property-scan",
        "homology": "homology-suite",
    }[args.command]
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgument(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidArgument("config must be a JSON object")
    cfg = RunConfig.from_dict(data)
    if not data or getattr(args, "mode", None) is not None or args.command != "flow":
        cfg.kind = kind
    for key in ("dim", "resolution", "p", "f", "out", "seed", "init", "T", "horizons",
                "tol_search", "scan_d", "suite"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    flow_flags = {"dt": "dt_init", "dt_max": "dt_max", "cfl": "cfl", "sample_dt": "sample_dt"}
    for flag, key in flow_flags.items():
        val = getattr(args, flag, None)
        if val is not None:
            cfg.flow[key] = None if key == "cfl" and val == 0 else val
    if "dt_init" in cfg.flow and "dt_max" not in cfg.flow:
        cfg.flow["dt_max"] = max(cfg.flow["dt_init"], FlowConfig.dt_max)
    for key in PARAM_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg.params[key] = val
    if args.command == "search" and "resolution" not in data and args.resolution is None:
        cfg.resolution = 64
    return cfg


def cli_run(argv=None) -> int:
    """Parse ``argv``, run the experiment and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "report":
            for path in emit_plotdata(args.run_dir):
                print(path)
            return EXIT_OK
        cfg = _config_from_args(args)
        cfg.validate()
        return RUNNERS[cfg.kind](cfg)
    except (InvalidArgument, InvalidComplex, DegenerateInput, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, IterationLimit) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_FAILED


def main() -> None:
    sys.exit(cli_run())


if __name__ == "__main__":
    main()
