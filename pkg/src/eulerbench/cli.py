"""Command-line entry point: ``run``, ``bench``, ``find-cfl`` and ``calibrate``."""
import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import cases, harness
from .errors import EulerBenchError
from .schemes import SchemeKind

log = logging.getLogger("eulerbench")

COMMANDS = ("run", "bench", "find-cfl", "calibrate")
# keys that do not change the numeric outputs (threads: results are bitwise
# independent of the thread count)
_NOT_HASHED = {"command", "config", "out", "verbose", "threads"}


class UsageError(Exception):
    """Bad flags or config-file contents (exit status 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _mesh(text):
    parts = [p for p in str(text).split(",") if p]
    try:
        dims = [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"mesh must be N or NX,NY, got {text!r}")
    if len(dims) == 1:
        dims *= 2
    if len(dims) != 2 or min(dims) < 2:
        raise argparse.ArgumentTypeError(f"mesh must be N or NX,NY with N >= 2, got {text!r}")
    return tuple(dims)


def _cfl(text):
    if str(text) == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cfl must be a positive number or 'auto', got {text!r}")
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"cfl must be positive, got {text!r}")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _csv_list(kind):
    def parse(text):
        try:
            return tuple(kind(p) for p in str(text).split(",") if p)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc))
    return parse


def _flag(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser():
    schemes = [s.value for s in SchemeKind]
    parser = _Parser(prog="eulerbench",
                     description="Multi-scheme 2D Euler solver and benchmark harness.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--case", choices=("vortex", "shock"), default="vortex")
    parser.add_argument("--scheme", choices=schemes)
    parser.add_argument("--k", type=int, default=1, help="polynomial degree (FV: MUSCL order - 1)")
    parser.add_argument("--mesh", type=_mesh, default=None, help="N or NX,NY elements")
    parser.add_argument("--cfl", type=_cfl, default=None,
                        help="CFL number or 'auto' (run the max-CFL search first); "
                             "run defaults to the tabulated value for the case")
    parser.add_argument("--limiter", type=_flag, default=None,
                        help="on/off (default: on for shock, off for vortex)")
    parser.add_argument("--epsilon", type=float, default=1.0e-3, help="trouble threshold")
    parser.add_argument("--limit-per-step", action="store_true",
                        help="limit after full RK steps instead of every stage")
    parser.add_argument("--dt-policy", choices=("fixed", "adaptive"), default=None)
    parser.add_argument("--t-final", type=float, default=None)
    parser.add_argument("--metric", choices=("solution", "residual"), default=None,
                        help="find-cfl metric (default: solution for vortex, residual for shock)")
    parser.add_argument("--schemes", type=_csv_list(str), default=None, help="bench: scheme list")
    parser.add_argument("--orders", type=_csv_list(int), default=None, help="bench: degrees")
    parser.add_argument("--meshes", type=_csv_list(int), default=None,
                        help="bench: high-order meshes; FV is scaled to matched NDoF")
    parser.add_argument("--dry-run", action="store_true", help="bench: list the matrix only")
    parser.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    parser.add_argument("--config", default=None, help="flat key=value file; flags win")
    parser.add_argument("--out", default="out")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def read_config_file(path):
    """Parse ``key = value`` lines ('#' comments) into a dict of strings."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _config_argv(values, parser):
    """Turn config entries into argv tokens placed before the real flags."""
    known = {a.dest: a for a in parser._actions if a.option_strings}
    argv = []
    for key, value in values.items():
        action = known.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        opt = action.option_strings[-1]
        if action.nargs == 0:
            if _flag(value):
                argv.append(opt)
        else:
            argv += [opt, value]
    return argv


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        extra = _config_argv(read_config_file(args.config), parser)
        rest = list(argv)
        rest.remove(args.command)
        # command first, then config values, then flags: later tokens win
        args = parser.parse_args([args.command] + extra + rest)
    _fill_defaults(args)
    _validate(args)
    return args


def _fill_defaults(args):
    if args.limiter is None:
        args.limiter = args.case == "shock"
    if args.metric is None:
        args.metric = "solution" if args.case == "vortex" else "residual"
    if args.mesh is None and args.command in ("run", "find-cfl"):
        args.mesh = (20, 20)


def _validate(args):
    if args.command in ("run", "find-cfl") and args.scheme is None:
        raise UsageError(f"{args.command} requires --scheme")
    if args.scheme == "fv" and args.k not in (1, 2):
        raise UsageError("fv supports --k 1 or 2")
    if args.scheme not in (None, "fv") and not 1 <= args.k <= 3:
        raise UsageError("high-order schemes support --k 1..3")
    if args.cfl is None and args.command == "run":
        table = harness.TABLE1_CFL if args.case == "vortex" else harness.TABLE4_CFL
        args.cfl = table[(args.scheme, min(args.k, 2))]
    if args.epsilon <= 0:
        raise UsageError("--epsilon must be positive")


def effective_config(args):
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        cfg[key] = value
    return cfg


def config_hash(cfg):
    payload = {k: v for k, v in cfg.items() if k not in _NOT_HASHED}
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def output_dir(args):
    cfg = effective_config(args)
    path = Path(args.out) / f"{args.command}-{config_hash(cfg)}"
    path.mkdir(parents=True, exist_ok=True)
    with (path / "effective_config.txt").open("w") as fh:
        for key, value in cfg.items():
            if value is not None:
                fh.write(f"{key} = {value}\n")
    return path


def _run_config(args, cfl):
    nx, ny = args.mesh
    return harness.RunConfig(args.case, args.scheme, args.k, nx, ny, cfl=cfl,
                             limiter=args.limiter, epsilon=args.epsilon,
                             limit_per_stage=not args.limit_per_step,
                             dt_policy=args.dt_policy, threads=args.threads,
                             t_final=args.t_final)


def _search(args):
    nx, ny = args.mesh

    def metric(cfl):
        res = harness.run_simulation(_run_config(args, cfl))
        return res.l2_rho_error if args.metric == "solution" else res.residual_norm

    start = args.cfl if isinstance(args.cfl, float) else None
    return harness.find_max_cfl(metric, start_cfl=start)


def cmd_run(args):
    out = output_dir(args)
    cfl = args.cfl
    if cfl == "auto":
        cfl = _search(args).cfl
        log.info("cfl chosen by search: %r", cfl)
    res = harness.run_simulation(_run_config(args, cfl))
    cfg = res.config
    rec = harness.ErrorRecord(cfg.scheme, cfg.k, cfg.nx, cfg.ny, cfg.ndof, cfl,
                              res.l2_rho_error, None, res.steps, res.seconds,
                              0.0, res.stage_timings)
    harness.write_csv([rec], out / "records.csv")
    np.save(out / "field.npy", res.q)
    np.savetxt(out / "averages.dat", res.averages.T, fmt="%.17g",
               header="rho rho_u rho_v E (element averages, element id j*nx+i)")
    if args.case == "shock":
        for axis in ("x", "y"):
            coord, rho = cases.extract_centerline(res.averages[0], res.mesh, axis)
            np.savetxt(out / f"centerline_{axis}.dat", np.column_stack([coord, rho]),
                       fmt="%.17g", header=f"{axis} rho")
    summary = {"l2_rho_error": res.l2_rho_error, "residual_norm": res.residual_norm,
               "steps": res.steps, "t": res.t, "cfl": cfl, "marked_total": res.marked_total}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"{cfg.scheme} P{cfg.k} {cfg.nx}x{cfg.ny} cfl={cfl:g} steps={res.steps} "
          f"l2_rho_error={res.l2_rho_error} -> {out}")
    return 0


def cmd_find_cfl(args):
    out = output_dir(args)
    result = _search(args)
    payload = {"cfl": result.cfl, "metric": args.metric,
               "evaluations": [[c, v] for c, v in sorted(result.evaluations.items())],
               "history": [[c, ok] for c, ok in result.history]}
    (out / "cfl_search.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"max cfl {result.cfl:.4g} ({args.metric} metric) -> {out}")
    return 0


def cmd_bench(args):
    if args.case != "vortex":
        raise UsageError("bench runs the vortex convergence matrix (--case vortex)")
    schemes = args.schemes or tuple(s.value for s in SchemeKind)
    orders = args.orders or (1, 2)
    meshes = args.meshes or (20, 30, 40, 50, 60)
    for s in schemes:
        SchemeKind(s)
    if isinstance(args.cfl, float):
        cfls = {(s, k): args.cfl for s in schemes for k in orders}
    else:
        cfls = harness.TABLE1_CFL
    out = output_dir(args)
    configs = harness.vortex_matrix(schemes, orders, meshes, cfls, threads=args.threads)
    calibration = None if args.dry_run else harness.calibrate_work_unit()
    records = harness.run_benchmark_matrix(configs, calibration, dry_run=args.dry_run)
    paths = harness.emit_report(records, out, calibration)
    print(f"{len(records)} records -> {paths[0]}")
    return 0


def cmd_calibrate(args):
    out = output_dir(args)
    cal = harness.calibrate_work_unit()
    (out / "calibration.json").write_text(json.dumps(asdict(cal), indent=2, sort_keys=True) + "\n")
    print(f"work unit = {cal.seconds:.6g} s on {cal.machine} -> {out}")
    return 0


_DISPATCH = {"run": cmd_run, "bench": cmd_bench, "find-cfl": cmd_find_cfl,
             "calibrate": cmd_calibrate}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        build_parser().print_help(sys.stderr)
        print(f"eulerbench: usage error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _DISPATCH[args.command](args)
    except UsageError as exc:
        print(f"eulerbench: usage error: {exc}", file=sys.stderr)
        return 2
    except (EulerBenchError, ValueError) as exc:
        print(f"eulerbench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
