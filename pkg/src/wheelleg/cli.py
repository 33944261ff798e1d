"""Command-line front end: validate configs, run scenarios, sweep grids.

Exit codes: 0 success, 1 validation failed, 2 config error,
3 funnel violation (run aborted), 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import sys
from pathlib import Path

import yaml

from . import __version__
from .funnel import FunnelParams, FunnelViolation
from .scenario import ConfigError, ScenarioConfig, load_config
from .sim import (extract_metrics, run_scenario, validate_scenario,
                  write_metrics_json)

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_FUNNEL_VIOLATION = 3
EXIT_IO_ERROR = 4


def _apply_overrides(cfg: ScenarioConfig, args) -> None:
    if getattr(args, "dt", None) is not None:
        cfg.run.dt = args.dt
    if getattr(args, "duration", None) is not None:
        cfg.run.duration = args.duration
    if getattr(args, "sensor_mode", None) is not None:
        cfg.run.sensor_mode = args.sensor_mode
    cfg.validate()


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
        report = validate_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    print(f"scenario: {cfg.name} (controller {cfg.controller}, mode {cfg.mode})")
    print(f"omega = {report.omega.omega:.6g}  "
          f"(f_ref_rate={cfg.rate_estimate():.6g}, "
          f"l_psi={report.omega.l_psi:.6g}, rho6={report.omega.rho6:.6g}, "
          f"b_f={report.omega.b_f:.6g})")
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"  [{status}] {check.name}  (slack {check.slack:.6g})")
    print(f"varpi candidate = {report.varpi_candidate:.6g} N")
    if not report.ok:
        print("validation FAILED: " + ", ".join(report.failed()))
        return EXIT_VALIDATION_FAILED
    print("validation passed")
    return EXIT_OK


def _write_manifest(cfg: ScenarioConfig, out_dir: Path, files: list[str]) -> None:
    manifest = {
        "config_path": cfg.source_path,
        "config_hash": cfg.config_hash,
        "run_id": f"{cfg.name}-{cfg.config_hash}",
        "tool_version": __version__,
        "outputs": files,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _print_metrics_table(name: str, metrics) -> None:
    print(f"{'Name':<24} {'E-Force (N)':>22} {'Range (N)':>10} "
          f"{'Angle Range (deg)':>18} {'Events':>7}")
    worst = int(metrics.e_range.argmax())
    eforce = f"{metrics.e_min[worst]:.1f} ~ {metrics.e_max[worst]:.1f}"
    print(f"{name:<24} {eforce:>22} {metrics.e_range[worst]:>10.1f} "
          f"{metrics.angle_range:>18.3f} {metrics.event_count:>7d}")


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        _apply_overrides(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    try:
        traj = run_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except FunnelViolation as exc:
        diagnostic = {
            "error": str(exc), "t": exc.t, "leg": exc.leg,
            "tracking_error": exc.error, "envelope": exc.envelope,
            "config_hash": cfg.config_hash,
        }
        try:
            with open(out_dir / "violation.json", "w") as fh:
                json.dump(diagnostic, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError:
            pass
        print(f"funnel violation: {exc}", file=sys.stderr)
        return EXIT_FUNNEL_VIOLATION

    metrics = extract_metrics(traj)
    csv_path = out_dir / f"{cfg.name}.csv"
    metrics_path = out_dir / f"{cfg.name}_metrics.json"
    try:
        traj.write_csv(csv_path)
        write_metrics_json(metrics, metrics_path)
        _write_manifest(cfg, out_dir, [csv_path.name, metrics_path.name])
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    _print_metrics_table(cfg.name, metrics)
    print(f"wrote {csv_path} and {metrics_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        grid_doc = yaml.safe_load(Path(args.gridfile).read_bytes())
    except (OSError, yaml.YAMLError) as exc:
        print(f"cannot read grid file: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if not isinstance(grid_doc, dict) or "base_config" not in grid_doc:
        print("grid file must be a mapping with a base_config key",
              file=sys.stderr)
        return EXIT_CONFIG_ERROR

    base_path = Path(args.gridfile).parent / grid_doc["base_config"]
    grid = grid_doc.get("grid", {})
    a_values = [float(v) for v in grid.get("a", [])]
    b_values = [float(v) for v in grid.get("b", [])]
    xi_values = [float(v) for v in grid.get("xi", [])]
    psi0 = grid_doc.get("psi0_constraint")

    try:
        base_cfg = load_config(base_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    a_values = a_values or [base_cfg.funnel.a]
    b_values = b_values or [base_cfg.funnel.b]
    xi_values = xi_values or [base_cfg.funnel.xi]
    cells = [(a, b, xi) for a, b, xi
             in itertools.product(a_values, b_values, xi_values)
             if psi0 is None or abs((a + xi) - float(psi0)) < 1e-9]
    if not cells:
        print("sweep grid is empty (psi0 constraint removed every cell?)",
              file=sys.stderr)
        return EXIT_CONFIG_ERROR

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR

    rows = []
    header = ["a", "b", "xi", "e_min", "e_max", "e_range", "angle_range",
              "events", "min_event_gap", "varpi_measured"]
    print(" ".join(f"{h:>12}" for h in header))
    for a, b, xi in cells:
        cfg = load_config(base_path)
        _apply_overrides(cfg, args)
        cfg.funnel = FunnelParams(a, b, xi)
        cfg.name = f"{base_cfg.name}_a{a:g}_b{b:g}_xi{xi:g}"
        try:
            traj = run_scenario(cfg)
        except ConfigError as exc:
            print(f"config error in cell (a={a}, b={b}, xi={xi}): {exc}",
                  file=sys.stderr)
            return EXIT_CONFIG_ERROR
        except FunnelViolation as exc:
            print(f"funnel violation in cell (a={a}, b={b}, xi={xi}): {exc}",
                  file=sys.stderr)
            return EXIT_FUNNEL_VIOLATION
        m = extract_metrics(traj)
        worst = int(m.e_range.argmax())
        row = [a, b, xi, float(m.e_min[worst]), float(m.e_max[worst]),
               float(m.e_range[worst]), m.angle_range, m.event_count,
               m.min_event_gap, m.varpi_measured]
        rows.append(row)
        print(" ".join(f"{v:>12.4g}" if isinstance(v, float) else f"{v:>12}"
                       for v in row))

    table_path = out_dir / "sweep_metrics.csv"
    try:
        with open(table_path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                                  for v in row) + "\n")
    except OSError as exc:
        print(f"cannot write sweep table: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR
    print(f"wrote {table_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wheelleg",
        description="Wheel-legged robot force control and posture simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dt", type=float, default=None,
                        help="override integration step (s)")
    common.add_argument("--duration", type=float, default=None,
                        help="override run duration (s)")
    common.add_argument("--sensor-mode", dest="sensor_mode", default=None,
                        choices=["truth", "sampled-20hz"],
                        help="override posture sensor mode")

    p = sub.add_parser("validate", parents=[common],
                       help="check theorem hypotheses for a scenario config")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", parents=[common],
                       help="run one scenario, write CSV + metrics + manifest")
    p.add_argument("config")
    p.add_argument("-o", "--out", default="out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common],
                       help="run a funnel-parameter grid over a base scenario")
    p.add_argument("gridfile")
    p.add_argument("-o", "--out", default="out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
