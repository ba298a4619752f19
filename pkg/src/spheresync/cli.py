"""Command-line experiment runner.

Verbs: ``run``, ``check-schedule``, ``sweep``. Exit codes for ``run``: 0 all
requested monitors pass, 1 a monitor did not pass (``not_applicable``
included), 2 config error, 3 integration failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from .config import ConfigError, ScenarioConfig, load_config, read_config_text
from .errors import IntegrationError
from .graph import GraphSchedule, is_uniformly_connected
from .integrator import integrate_lifted, integrate_rotations, integrate_sphere

log = logging.getLogger("spheresync")

EXIT_OK, EXIT_MONITOR, EXIT_CONFIG, EXIT_INTEGRATION = 0, 1, 2, 3


def output_root() -> Path:
    return Path(os.environ.get("SPHERESYNC_OUT", "runs"))


def integrate(cfg: ScenarioConfig):
    fn = {"sphere": integrate_sphere, "lifted": integrate_lifted,
          "rotations": integrate_rotations}[cfg.system]
    return fn(cfg.initial, cfg.schedule, cfg.weights, cfg.integration)


def run_monitors(cfg: ScenarioConfig, traj) -> list:
    out = []
    for spec in cfg.monitors:
        name = spec["name"]
        kw = {k: v for k, v in spec.items() if k != "name"}
        if name == "consensus":
            out.append(an.monitor_consensus(traj, **kw))
        elif name == "hemisphere_invariance":
            center = kw.get("center", None if cfg.ball is None else cfg.ball[0])
            radius = kw.get("radius", None if cfg.ball is None else cfg.ball[1])
            if center is None or radius is None:
                raise ConfigError("hemisphere_invariance needs a cap initializer or center/radius")
            out.append(an.monitor_hemisphere_invariance(traj, center, float(radius)))
        elif name == "max_norm_lyapunov":
            out.append(an.monitor_max_norm_lyapunov(traj, **kw))
        elif name == "pairwise_lyapunov":
            out.append(an.monitor_pairwise_lyapunov(traj, **kw))
        elif name == "ratio_bound":
            alpha = kw.get("alpha", cfg.weights.global_upper)
            if alpha is None:
                raise ConfigError("ratio_bound needs alpha (weights declare no upper bound)")
            out.append(an.monitor_ratio_bound(traj, float(alpha)))
        elif name == "hull_invariance":
            out.append(an.monitor_hull_invariance(traj, **kw))
        elif name == "point_convergence":
            out.append(an.monitor_point_convergence(traj, **kw))
        elif name == "origin_attraction":
            out.append(an.monitor_origin_attraction(traj, cfg.weights, **kw))
        elif name == "circle_closed_form":
            out.append(an.monitor_circle_closed_form(traj, cfg.weights, cfg.schedule, **kw))
    return out


def metrics_csv(traj, series) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    diag = sorted(traj.diagnostics)
    w.writerow(["time"] + diag + [s.name for s in series])
    for k, t in enumerate(traj.times):
        row = [repr(float(t))] + [repr(float(traj.diagnostics[d][k])) for d in diag]
        row += [repr(float(s.values[k])) for s in series]
        w.writerow(row)
    return buf.getvalue()


def execute(cfg: ScenarioConfig, out_dir: Path) -> tuple[int, dict]:
    """Integrate, monitor and write artifacts. Returns ``(exit_code, summary)``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "name": cfg.name,
        "config_sha256": cfg.sha256,
        "seed": cfg.seed,
        "resolved_config": cfg.resolved,
        "defaults_applied": cfg.defaults_applied,
        "version": __version__,
    }
    try:
        traj = integrate(cfg)
    except IntegrationError as exc:
        manifest["failure"] = {"kind": "IntegrationError", "message": str(exc)}
        _write_json(out_dir / "manifest.json", manifest)
        return EXIT_INTEGRATION, manifest
    (out_dir / "trajectory.csv").write_text(traj.to_csv())
    if traj.failure is not None:
        manifest["failure"] = traj.failure
        _write_json(out_dir / "manifest.json", manifest)
        return EXIT_INTEGRATION, manifest
    series = run_monitors(cfg, traj)
    (out_dir / "metrics.csv").write_text(metrics_csv(traj, series))
    (out_dir / "verdicts.json").write_text(an.verdicts_json(series) + "\n")
    manifest["outputs"] = ["trajectory.csv", "metrics.csv", "verdicts.json"]
    manifest["verdicts"] = [s.report() for s in series]
    manifest["terminal_diameter"] = float(traj.diagnostics["diameter"][-1])
    _write_json(out_dir / "manifest.json", manifest)
    code = EXIT_OK if all(s.passed for s in series) else EXIT_MONITOR
    return code, manifest


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(an._jsonable(obj), indent=2, sort_keys=True) + "\n")


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, seed=args.seed, dt=args.dt)
        out = Path(args.out) if args.out else output_root() / cfg.name
        code, summary = execute(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        for v in summary.get("verdicts", []):
            print(f"{v['monitor']}: {v['verdict']}")
        if "failure" in summary:
            print(f"integration failure: {summary['failure']}", file=sys.stderr)
        print(f"artifacts: {out}")
    return code


def cmd_check_schedule(args) -> int:
    try:
        text, _ = read_config_text(args.schedule)
        schedule = GraphSchedule.from_json(text)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"schedule error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = is_uniformly_connected(schedule, args.mode, args.horizon)
    if not args.quiet:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK if report.connected else EXIT_MONITOR


def _parse_override(text: str):
    key, _, value = text.partition("=")
    if not key or not _:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _parse_seeds(text: str) -> list[int]:
    if ":" in text:
        a, b = text.split(":")
        return list(range(int(a), int(b)))
    return [int(s) for s in text.split(",") if s]


def _sweep_one(job):
    config, seed, dt, overrides, out_dir = job
    logging.getLogger("spheresync").setLevel(logging.ERROR)
    cfg = load_config(config, seed=seed, dt=dt, overrides=overrides)
    code, summary = execute(cfg, Path(out_dir))
    diam = None
    metrics = Path(out_dir) / "metrics.csv"
    if metrics.exists():
        rows = list(csv.DictReader(metrics.open()))
        diam = [(float(r["time"]), float(r["diameter"])) for r in rows]
    return seed, code, summary.get("verdicts", []), diam


def cmd_sweep(args) -> int:
    try:
        overrides = dict(_parse_override(s) for s in args.set or [])
        seeds = _parse_seeds(args.seeds)
        probe = load_config(args.config, seed=seeds[0] if seeds else None, dt=args.dt,
                            overrides=overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    root = Path(args.out) if args.out else output_root() / f"{probe.name}_sweep"
    jobs = [(args.config, s, args.dt, overrides, str(root / f"seed_{s:04d}")) for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]

    report = {
        "config": str(args.config),
        "overrides": overrides,
        "runs": [{"seed": s, "exit_code": c, "verdicts": v} for s, c, v, _ in results],
        "evidence": "sampling evidence over a seeded batch, not a proof",
    }
    if args.epsilons:
        items = []
        for eps in (float(e) for e in args.epsilons.split(",")):
            hits = []
            for _, _, _, diam in results:
                if not diam:
                    hits.append(None)
                    continue
                t = np.array([p[0] for p in diam])
                dv = np.array([p[1] for p in diam])
                above = np.flatnonzero(dv > eps)
                if above.size == 0:
                    hits.append(float(t[0]))
                elif above[-1] == len(dv) - 1:
                    hits.append(None)
                else:
                    hits.append(float(t[above[-1] + 1]))
            T = None if any(h is None for h in hits) else max(hits)
            items.append({"epsilon": eps, "T": T, "unconverged_runs": sum(h is None for h in hits)})
        report["uniform_time"] = items
    root.mkdir(parents=True, exist_ok=True)
    _write_json(root / "batch_report.json", report)
    if not args.quiet:
        print(json.dumps(an._jsonable(report), indent=2, sort_keys=True))
    codes = [c for _, c, _, _ in results]
    return max(codes) if codes else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spheresync", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="artifact directory (default $SPHERESYNC_OUT/<name>)")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("run", help="integrate one scenario and run its monitors")
    p.add_argument("config", help="scenario JSON path or bundled scenario name")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check-schedule", help="certify uniform connectivity of a schedule")
    p.add_argument("schedule")
    p.add_argument("--mode", choices=["strong", "quasi_strong"], default="quasi_strong")
    p.add_argument("--horizon", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_check_schedule)

    p = sub.add_parser("sweep", help="run a scenario over many seeds")
    p.add_argument("config")
    p.add_argument("--seeds", default="0:8", help="range a:b or list a,b,c")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config entry, dotted keys, JSON values")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--epsilons", default=None, help="comma list; report uniform T(eps)")
    p.add_argument("--dt", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
