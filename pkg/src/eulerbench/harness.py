"""Runs, error norms, convergence slopes, max-CFL search, timing and reports."""
import csv
import json
import logging
import math
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import cases
from .core import GasModel
from .errors import DegenerateInput, NonPhysicalState, Unstable
from .limiting import LimiterConfig, SlopeLimiter, compute_averages
from .mesh import Boundary, build_uniform_mesh
from .schemes import SchemeConfig, SchemeKind, make_evaluator
from .time_integration import TimeConfig, integrate

log = logging.getLogger(__name__)

CSV_FIELDS = ("scheme", "k", "nx", "ny", "ndof", "cfl", "l2_rho_error", "slope",
              "steps", "seconds", "work_units", "stage_timings_json")

MAX_CFL_TOLERANCE = 1.0e-3


@dataclass(frozen=True)
class RunConfig:
    case: str
    scheme: str
    k: int
    nx: int
    ny: int = None
    cfl: float = 0.1
    limiter: bool = False
    epsilon: float = 1.0e-3
    limit_per_stage: bool = True
    dt_policy: str = None
    threads: int = 1
    t_final: float = None

    def __post_init__(self):
        if self.case not in ("vortex", "shock"):
            raise ValueError(f"unknown case {self.case!r}")
        object.__setattr__(self, "scheme", SchemeKind(self.scheme).value)
        if self.ny is None:
            object.__setattr__(self, "ny", self.nx)
        if self.dt_policy is None:
            # vortex: freeze dt from the initial state; shock: adapt every step
            object.__setattr__(self, "dt_policy", "fixed" if self.case == "vortex" else "adaptive")

    @property
    def scheme_config(self):
        lim = LimiterConfig(enabled=self.limiter, epsilon=self.epsilon,
                            per_stage=self.limit_per_stage)
        return SchemeConfig(self.scheme, self.k, lim)

    @property
    def ndof(self):
        return self.nx * self.ny * self.scheme_config.dofs_per_element


@dataclass
class RunResult:
    config: RunConfig
    q: np.ndarray
    averages: np.ndarray
    steps: int
    t: float
    seconds: float
    stage_timings: dict
    l2_rho_error: float = None
    residual_norm: float = None
    marked_total: int = 0
    mesh: object = field(default=None, repr=False)


def ndof(scheme, k, nx, ny=None):
    ny = nx if ny is None else ny
    per = 1 if SchemeKind(scheme) is SchemeKind.FV else (k + 1) ** 2
    return nx * ny * per


def matched_fv_cells(k, n_high_order):
    """FV cells per direction carrying the same NDoF as a P^k mesh of n x n elements."""
    return n_high_order * (k + 1)


def build_case(cfg):
    """Mesh, evaluator, limiter and initial field array for a run configuration."""
    gas = GasModel(1.4)
    if cfg.case == "vortex":
        params = cases.VortexParams()
        mesh = build_uniform_mesh(cfg.nx, cfg.ny, params.bounds, Boundary.PERIODIC)
        init = lambda x, y: cases.vortex_state(x, y, 0.0, params)
        t_final = params.t_final
    else:
        params = cases.ShockTubeParams()
        mesh = build_uniform_mesh(cfg.nx, cfg.ny, params.bounds, Boundary.TRANSMISSIVE)
        init = lambda x, y: cases.shock_init(x, y, params)
        t_final = params.t_final
    scfg = cfg.scheme_config
    ev = make_evaluator(scfg, mesh, gas, threads=cfg.threads)
    if scfg.kind is SchemeKind.FV:
        if cfg.case == "vortex":
            q0 = cases.element_averages(mesh, init, cfg.k + 3)[..., None]
        else:
            q0 = cases.sample_field(mesh, ev.ops.nodes, init)
    else:
        q0 = cases.sample_field(mesh, ev.ops.nodes, init)
    limiter = None
    if scfg.kind is not SchemeKind.FV and scfg.limiter.enabled:
        limiter = SlopeLimiter(scfg.limiter, ev)
    if cfg.t_final is not None:
        t_final = cfg.t_final
    return mesh, gas, ev, limiter, np.ascontiguousarray(q0), t_final


def element_mean_field(q, ev):
    """(4, ne) element averages from the solution-point values."""
    return compute_averages(q.reshape(4, ev.ne, ev.n_sp), ev.ops.weights2d)


def l2_density_error(rho, rho_exact, weights=None):
    """Weighted discrete L2 norm sqrt(sum w (rho - rho_exact)^2 / sum w).

    ``weights`` broadcasts against ``rho``: element volumes for per-element
    averages, or volume times solution-point quadrature weights for nodal
    values.  Without weights all samples count equally.
    """
    diff = np.asarray(rho, dtype=float) - np.asarray(rho_exact, dtype=float)
    if weights is None:
        return float(np.sqrt(np.mean(diff * diff)))
    w = np.broadcast_to(np.asarray(weights, dtype=float), diff.shape)
    return float(np.sqrt(np.sum(w * diff * diff) / np.sum(w)))


def exact_vortex_averages(mesh, k, t, params=cases.VortexParams()):
    """Element-averaged exact density with k+3 Gauss points per direction."""
    return cases.element_averages(
        mesh, lambda x, y: cases.vortex_primitives(x, y, t, params)[0], k + 3)


def vortex_density_error(q, ev, t, k, params=cases.VortexParams()):
    """L2 density error of a vortex solution at time ``t``.

    High-order fields are compared point by point with the exact density at
    the solution points, weighted by the solution-point quadrature, i.e. the
    quadrature approximation of the continuous L2 norm over the domain.  FV
    cell averages are compared with exact cell averages (k+3 Gauss points).
    """
    mesh = ev.mesh
    q = q.reshape(4, ev.ne, ev.n_sp)
    if ev.config.kind is SchemeKind.FV:
        exact = exact_vortex_averages(mesh, k, t, params)
        return l2_density_error(q[0, :, 0], exact, mesh.volume)
    exact = cases.sample_field(
        mesh, ev.ops.nodes, lambda x, y: cases.vortex_primitives(x, y, t, params)[0])
    return l2_density_error(q[0], exact, ev.ops.weights2d * mesh.volume)


def run_simulation(cfg, step_callback=None):
    """Execute one run; errors/residual norms are filled in per case."""
    mesh, gas, ev, limiter, q0, t_final = build_case(cfg)
    tcfg = TimeConfig(cfg.cfl, t_final, cfg.dt_policy)
    try:
        t0 = time.perf_counter()
        res = integrate(q0, ev.residual, mesh, gas, tcfg, limiter,
                        per_stage=cfg.limit_per_stage, step_callback=step_callback)
        seconds = time.perf_counter() - t0
        timings = dict(ev.timings)
        if limiter is not None:
            timings.update(limiter.timings)
        avg = element_mean_field(res.q, ev)
        out = RunResult(cfg, res.q, avg, res.steps, res.t, seconds, timings,
                        marked_total=limiter.total_marked if limiter else 0, mesh=mesh)
        if cfg.case == "vortex":
            out.l2_rho_error = vortex_density_error(res.q, ev, res.t, cfg.k)
        r = ev.residual(res.q)
        out.residual_norm = float(np.sqrt(np.mean(r * r)))
        return out
    finally:
        ev.close()


def convergence_slope(n1, e1, n2, e2):
    """Observed order log(E1/E2) / log(h1/h2) with h proportional to 1/n."""
    if e1 <= 0 or e2 <= 0 or e1 == e2 or n1 == n2:
        raise DegenerateInput(f"cannot fit a slope to (n={n1}, E={e1}), (n={n2}, E={e2})")
    return math.log(e1 / e2) / math.log(n2 / n1)


# -- max-CFL search -----------------------------------------------------------

def relative_change(a, b):
    return abs(a - b) / abs(b)


def accepts(metric_at_cfl, metric_at_half, tol=MAX_CFL_TOLERANCE):
    """True when halving the CFL changes the metric by less than ``tol`` (0.1 %)."""
    return relative_change(metric_at_cfl, metric_at_half) < tol


@dataclass
class CFLSearch:
    cfl: float
    evaluations: dict
    history: list


def find_max_cfl(metric_fn, start_cfl=None, scan_start=0.05, scan_factor=1.25,
                 scan_cap=2.0, floor=1.0e-3, tol=MAX_CFL_TOLERANCE, refine_steps=1):
    """Largest CFL whose metric changes by < ``tol`` when the CFL is halved.

    ``metric_fn(cfl)`` runs the experiment and returns the metric (solution
    error or residual norm); a NonPhysicalState or a non-finite value counts
    as a run that did not complete.  Without ``start_cfl`` an upward scan
    from ``scan_start`` picks the largest completing CFL as the start.  The
    search then halves until the criterion holds and bisects ``refine_steps``
    times between the last failing and the first passing value.
    """
    evaluations = {}
    history = []

    def metric(c):
        c = float(c)
        if c not in evaluations:
            try:
                val = float(metric_fn(c))
            except NonPhysicalState as err:
                log.info("cfl %.4g did not complete: %s", c, err)
                val = math.nan
            evaluations[c] = val
        return evaluations[c]

    def completes(c):
        return math.isfinite(metric(c))

    if start_cfl is None:
        c, start = scan_start, None
        while c <= scan_cap and completes(c):
            start = c
            c *= scan_factor
        if start is None:
            c = scan_start
            while c >= floor and not completes(c):
                c *= 0.5
            if c < floor:
                raise Unstable(f"no completing cfl above {floor}")
            start = c
    else:
        start = float(start_cfl)
        while not completes(start):
            start *= 0.5
            if start < floor:
                raise Unstable(f"no completing cfl above {floor}")

    def passes(c):
        ok = completes(c) and completes(0.5 * c) and accepts(metric(c), metric(0.5 * c), tol)
        history.append((c, ok))
        return ok

    c, failing = start, None
    while not passes(c):
        failing = c
        c *= 0.5
        if c < floor:
            raise Unstable(f"criterion not met above cfl {floor}")
    if failing is not None:
        lo, hi = c, failing
        for _ in range(refine_steps):
            mid = 0.5 * (lo + hi)
            if passes(mid):
                lo = mid
            else:
                hi = mid
        c = lo
    return CFLSearch(c, evaluations, history)


def vortex_error_metric(scheme, k, n, **kw):
    def fn(cfl):
        res = run_simulation(RunConfig("vortex", scheme, k, n, cfl=cfl, **kw))
        return res.l2_rho_error
    return fn


def shock_residual_metric(scheme, k, n, limiter=True, **kw):
    def fn(cfl):
        cfg = RunConfig("shock", scheme, k, n, cfl=cfl, limiter=limiter, **kw)
        return run_simulation(cfg).residual_norm
    return fn


# -- work units ---------------------------------------------------------------

CALIBRATION_GRID = 256
CALIBRATION_SWEEPS = 1000


@dataclass(frozen=True)
class WorkUnitCalibration:
    seconds: float
    machine: str
    grid: int = CALIBRATION_GRID
    sweeps: int = CALIBRATION_SWEEPS

    def work_units(self, wall_seconds):
        return wall_seconds / self.seconds


def _calibration_kernel(grid, sweeps):
    # five-point Jacobi sweeps on a fixed field: 6 flops per interior point per sweep
    a = np.fromfunction(lambda i, j: np.sin(0.01 * i) * np.cos(0.02 * j), (grid, grid))
    for _ in range(sweeps):
        a[1:-1, 1:-1] = 0.2 * (a[1:-1, 1:-1] + a[:-2, 1:-1] + a[2:, 1:-1]
                               + a[1:-1, :-2] + a[1:-1, 2:])
    return float(a.sum())


def calibrate_work_unit(grid=CALIBRATION_GRID, sweeps=CALIBRATION_SWEEPS, repeats=3):
    """Median wall time of the reference stencil workload."""
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        _calibration_kernel(grid, sweeps)
        times.append(time.perf_counter() - t0)
    machine = f"{platform.machine()} {platform.processor() or platform.system()}".strip()
    return WorkUnitCalibration(statistics.median(times), machine, grid, sweeps)


# -- benchmark matrix and reports -----------------------------------------------

@dataclass
class ErrorRecord:
    scheme: str
    k: int
    nx: int
    ny: int
    ndof: int
    cfl: float
    l2_rho_error: float = None
    slope: float = None
    steps: int = 0
    seconds: float = 0.0
    work_units: float = 0.0
    stage_timings: dict = field(default_factory=dict)

    def as_row(self):
        def num(v):
            return "" if v is None else repr(float(v))
        return {
            "scheme": self.scheme, "k": str(self.k), "nx": str(self.nx), "ny": str(self.ny),
            "ndof": str(self.ndof), "cfl": num(self.cfl),
            "l2_rho_error": num(self.l2_rho_error), "slope": num(self.slope),
            "steps": str(self.steps), "seconds": num(self.seconds),
            "work_units": num(self.work_units),
            "stage_timings_json": json.dumps(self.stage_timings, sort_keys=True),
        }

    @classmethod
    def from_row(cls, row):
        def num(v):
            return None if v == "" else float(v)
        return cls(row["scheme"], int(row["k"]), int(row["nx"]), int(row["ny"]),
                   int(row["ndof"]), num(row["cfl"]), num(row["l2_rho_error"]),
                   num(row["slope"]), int(row["steps"]), num(row["seconds"]),
                   num(row["work_units"]), json.loads(row["stage_timings_json"]))


def check_matched_ndof(records):
    """Raise when a cross-scheme comparison set mixes NDoF values."""
    values = {r.ndof for r in records}
    if len(values) > 1:
        raise DegenerateInput(f"rows carry different NDoF values: {sorted(values)}")
    return values.pop() if values else None


def run_benchmark_matrix(run_configs, calibration=None, dry_run=False):
    """Run each config (serially) and return ErrorRecords with slopes filled in.

    Slopes are fitted between consecutive meshes of the same (scheme, k).
    With ``dry_run`` nothing is executed; records carry only the layout.
    """
    records = []
    for cfg in run_configs:
        rec = ErrorRecord(cfg.scheme, cfg.k, cfg.nx, cfg.ny, cfg.ndof, cfg.cfl)
        if not dry_run:
            res = run_simulation(cfg)
            rec.l2_rho_error = res.l2_rho_error
            rec.steps = res.steps
            rec.seconds = res.seconds
            rec.stage_timings = res.stage_timings
            if calibration is not None:
                rec.work_units = calibration.work_units(res.seconds)
        records.append(rec)
    fill_slopes(records)
    return records


def fill_slopes(records):
    last = {}
    for rec in records:
        key = (rec.scheme, rec.k)
        prev = last.get(key)
        if prev is not None and prev.l2_rho_error and rec.l2_rho_error and prev.nx != rec.nx:
            rec.slope = convergence_slope(prev.nx, prev.l2_rho_error, rec.nx, rec.l2_rho_error)
        last[key] = rec
    return records


def write_csv(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for rec in records:
            w.writerow(rec.as_row())
    return path


def read_csv(path):
    with Path(path).open(newline="") as fh:
        return [ErrorRecord.from_row(row) for row in csv.DictReader(fh)]


def emit_report(records, out_dir, calibration=None):
    """Write ``records.csv`` plus one plot-data file per figure; returns the paths.

    * error_vs_work_P{k}.dat: error against work units, one block per scheme
    * work_vs_ndof_P{k}.dat: total work units against NDoF per scheme
    * stage_timings.dat: seconds per stage for each run
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [write_csv(records, out / "records.csv")]
    for k in sorted({r.k for r in records}):
        rows = [r for r in records if r.k == k]
        p = out / f"error_vs_work_P{k}.dat"
        with p.open("w") as fh:
            fh.write("# scheme work_units l2_rho_error\n")
            for r in rows:
                if r.l2_rho_error is not None:
                    fh.write(f"{r.scheme} {r.work_units!r} {r.l2_rho_error!r}\n")
        paths.append(p)
        p = out / f"work_vs_ndof_P{k}.dat"
        with p.open("w") as fh:
            fh.write("# scheme ndof work_units seconds\n")
            for r in rows:
                fh.write(f"{r.scheme} {r.ndof} {r.work_units!r} {r.seconds!r}\n")
        paths.append(p)
    p = out / "stage_timings.dat"
    with p.open("w") as fh:
        fh.write("# scheme k nx stage seconds\n")
        for r in records:
            for stage, sec in r.stage_timings.items():
                fh.write(f"{r.scheme} {r.k} {r.nx} {stage} {sec!r}\n")
    paths.append(p)
    if calibration is not None:
        p = out / "calibration.json"
        p.write_text(json.dumps(asdict(calibration), indent=2, sort_keys=True))
        paths.append(p)
    return paths


def vortex_matrix(schemes, orders, meshes, cfls, threads=1):
    """Run configs for the vortex tables; FV meshes are scaled to matched NDoF.

    ``cfls`` maps (scheme, k) to the CFL number.
    """
    configs = []
    for k in orders:
        for scheme in schemes:
            for n in meshes:
                nx = matched_fv_cells(k, n) if SchemeKind(scheme) is SchemeKind.FV else n
                configs.append(RunConfig("vortex", scheme, k, nx, cfl=cfls[(scheme, k)],
                                         threads=threads))
    return configs


# Maximum CFL numbers reported for the smooth problem (P1 / P2 at the coarsest mesh).
TABLE1_CFL = {
    ("cpr", 1): 0.24, ("ndg", 1): 0.24, ("sd", 1): 0.3, ("dg", 1): 0.24, ("fv", 1): 0.4,
    ("cpr", 2): 0.14, ("ndg", 2): 0.14, ("sd", 2): 0.2, ("dg", 2): 0.14, ("fv", 2): 0.4,
}

# Maximum CFL numbers for the discontinuous problem at the smaller NDoF.
TABLE4_CFL = {
    ("cpr", 1): 0.2, ("ndg", 1): 0.2, ("sd", 1): 0.3, ("dg", 1): 0.22, ("fv", 1): 0.58,
    ("cpr", 2): 0.1, ("ndg", 2): 0.1, ("sd", 2): 0.18, ("dg", 2): 0.08, ("fv", 2): 0.54,
}
