"""Command-line entry points: run, batch, serve, replay, plan.

Exit codes for `run`: 0 when the trial succeeds (reached, five or fewer wall
contacts), 2 when the trial runs but fails, 1 on configuration errors. Log
files land in --out (default $VESSELSIM_LOG_DIR or ./runs). All outputs are
byte-deterministic for a given config, including across batch parallelism.
"""

from __future__ import annotations

import argparse
import asyncio
import dataclasses
import json
import os
import sys
from pathlib import Path

from .config import (
    BatchConfig,
    RunConfig,
    load_batch_config,
    load_run_config,
    to_dict,
)
from .errors import ConfigError, VesselSimError
from .metrics import aggregate_report, report_to_csv, report_to_json, score_trials
from .phantom import export_pgm, grid_to_pgm
from .planner import plan_to_json
from .simulate import build_scene, run_batch, run_trial
from .triallog import dump_jsonl


def _default_out() -> Path:
    return Path(os.environ.get("VESSELSIM_LOG_DIR", "runs"))


def _load_run(args) -> RunConfig:
    if args.config is None:
        cfg = RunConfig()
        if args.set:
            from .config import apply_overrides, from_dict, validate_run_config

            data = apply_overrides(to_dict(cfg), args.set)
            cfg = validate_run_config(from_dict(RunConfig, data))
        return cfg
    return load_run_config(args.config, args.set)


def cmd_run(args) -> int:
    try:
        cfg = _load_run(args)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        log = run_trial(cfg)
    except VesselSimError as exc:
        print(f"trial failed to start: {exc}", file=sys.stderr)
        return 2
    h = log.config_hash[:12]
    log_path = out / f"trial_{h}_s{cfg.seed}.jsonl"
    log_path.write_text(dump_jsonl(log))
    metrics = score_trials([log], cfg.sim.debounce_ticks)[0]
    metrics_path = out / f"trial_{h}_s{cfg.seed}.metrics.json"
    metrics_path.write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")
    print(f"status={log.status} ticks={len(log.records)} CT={metrics.ct_s:.2f}s "
          f"PL={metrics.pl_cm:.2f}cm CC={metrics.cc} success={metrics.success}")
    print(f"log: {log_path}")
    print(f"metrics: {metrics_path}")
    return 0 if metrics.success else 2


def cmd_batch(args) -> int:
    try:
        batch = (
            load_batch_config(args.config, args.set)
            if args.config
            else BatchConfig()
        )
        if args.parallelism is not None:
            batch = dataclasses.replace(batch, parallelism=args.parallelism)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    (out / "logs").mkdir(parents=True, exist_ok=True)

    cells = []
    names = []
    for cond in batch.conditions:
        for tier in batch.tiers:
            cfg = dataclasses.replace(
                batch.base,
                policy=cond,
                task=dataclasses.replace(batch.base.task, tier=tier, start=None, goal=None),
            )
            cells.append(cfg)
            names.append((cond.id, tier))
    results = run_batch(cells, seeds=list(batch.seeds), parallelism=batch.parallelism)

    n_seeds = len(batch.seeds)
    logs_by_condition: dict[str, list] = {c.id: [] for c in batch.conditions}
    labels_by_condition: dict[str, list] = {c.id: [] for c in batch.conditions}
    failures = []
    n_logs = 0
    for res in results:
        cond_id, tier = names[res.index // n_seeds]
        seed = batch.seeds[res.index % n_seeds]
        if not res.ok:
            failures.append(
                {"condition": cond_id, "tier": tier, "seed": seed, "error": res.error}
            )
            continue
        log_path = out / "logs" / f"trial_{cond_id}_{tier}_s{seed}.jsonl"
        log_path.write_text(dump_jsonl(res.log))
        n_logs += 1
        logs_by_condition[cond_id].append(res.log)
        labels_by_condition[cond_id].append({"tier": tier, "seed": seed})

    # smoothness normalization pools every trial in the report; conditions with
    # zero finished trials are listed in the manifest only
    scored_conditions = [c.id for c in batch.conditions if logs_by_condition[c.id]]
    flat_logs = [lg for cid in scored_conditions for lg in logs_by_condition[cid]]
    flat_metrics = score_trials(flat_logs, batch.base.sim.debounce_ticks)
    it = iter(flat_metrics)
    metrics_by_condition = {
        cid: [next(it) for _ in logs_by_condition[cid]] for cid in scored_conditions
    }
    report = aggregate_report(metrics_by_condition)
    for cid in scored_conditions:
        for entry, label in zip(report.trials[cid], labels_by_condition[cid]):
            entry.update(label)
    (out / "report.csv").write_text(report_to_csv(report))
    (out / "report.json").write_text(report_to_json(report) + "\n")
    manifest = {"v": 1, "cells": len(results), "logs": n_logs, "failures": failures}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"{n_logs} logs, {len(failures)} failures -> {out}")
    return 0 if not failures else 2


def cmd_plan(args) -> int:
    try:
        cfg = _load_run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = build_scene(cfg)
    (out / "occupancy.pgm").write_bytes(grid_to_pgm(scene.grid))
    (out / "distance.pgm").write_bytes(export_pgm(scene.field.dist))
    (out / "costmap.pgm").write_bytes(
        export_pgm(scene.costmap.cost, blocked=~(scene.costmap.cost < float("inf")))
    )
    (out / "plan.json").write_text(plan_to_json(scene.plan) + "\n")
    print(f"arc={scene.path.arc_length:.2f}mm waypoints={len(scene.path)} -> {out}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve_forever

    try:
        cfg = _load_run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    static_dir = Path(args.static) if args.static else None
    if static_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend"
        static_dir = bundled if (bundled / "index.html").is_file() else None
    print(f"serving on ws://{args.host}:{args.port} (static: {static_dir})")
    try:
        asyncio.run(
            serve_forever(
                cfg,
                host=args.host,
                port=args.port,
                log_dir=Path(args.out),
                static_dir=static_dir,
            )
        )
    except KeyboardInterrupt:
        pass
    return 0


def cmd_replay(args) -> int:
    from .service import replay_forever

    print(f"replaying {args.log} at {args.speed}x on ws://{args.host}:{args.port}")
    try:
        asyncio.run(
            replay_forever(
                Path(args.log),
                host=args.host,
                port=args.port,
                speed=args.speed,
            )
        )
    except KeyboardInterrupt:
        pass
    except VesselSimError as exc:
        print(f"replay error: {exc}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vesselsim",
        description="Shared-control millirobot navigation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument(
            "--config", default=None, required=config_required,
            help="JSON config file (defaults used when omitted)",
        )
        p.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="dotted-path override, e.g. --set sim.dt=0.02",
        )
        p.add_argument("--out", default=str(_default_out()), help="output directory")

    p_run = sub.add_parser("run", help="run one synthetic-operator trial")
    common(p_run)
    p_run.add_argument("--seed", type=int, default=None, help="trial seed override")
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="run a condition x tier x seed grid")
    common(p_batch)
    p_batch.add_argument("--parallelism", type=int, default=None)
    p_batch.set_defaults(func=cmd_batch)

    p_plan = sub.add_parser("plan", help="export phantom heatmaps and the plan")
    common(p_plan)
    p_plan.set_defaults(func=cmd_plan)

    p_serve = sub.add_parser("serve", help="live teleoperation WebSocket service")
    common(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--static", default=None, help="static asset directory for the console")
    p_serve.set_defaults(func=cmd_serve)

    p_replay = sub.add_parser("replay", help="re-broadcast a recorded trial log")
    p_replay.add_argument("log", help="path to a .jsonl trial log")
    p_replay.add_argument("--host", default="127.0.0.1")
    p_replay.add_argument("--port", type=int, default=8765)
    p_replay.add_argument("--speed", type=float, default=1.0)
    p_replay.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
