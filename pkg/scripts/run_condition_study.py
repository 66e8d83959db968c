#!/usr/bin/env python3
"""Condition study: policy grid x task tiers x seeds, scored into a report.

Mirrors the study structure (4 control conditions x 3 tiers x N seeds) with
synthetic operators and writes report.csv / report.json plus per-trial logs.

    python3 scripts/run_condition_study.py --seeds 8 --out runs/study
    python3 scripts/run_condition_study.py --seeds 50 --conditions fixed discrete context
"""

import argparse
import dataclasses
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from vesselsim.cli import main as cli_main
from vesselsim.config import BatchConfig, PolicyConfig, to_dict


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=8, help="seeds per condition-tier cell")
    parser.add_argument(
        "--conditions",
        nargs="+",
        default=["manual", "fixed", "discrete", "context"],
        choices=["manual", "fixed", "discrete", "context", "external"],
    )
    parser.add_argument("--tiers", nargs="+", default=["easy", "medium", "hard"])
    parser.add_argument("--parallelism", type=int, default=1)
    parser.add_argument("--out", default="runs/study")
    args = parser.parse_args(argv)

    batch = BatchConfig(
        conditions=tuple(PolicyConfig(id=c) for c in args.conditions),
        tiers=tuple(args.tiers),
        seeds=tuple(range(args.seeds)),
        parallelism=args.parallelism,
    )
    cfg_path = Path(args.out) / "batch_config.json"
    cfg_path.parent.mkdir(parents=True, exist_ok=True)
    import json

    cfg_path.write_text(json.dumps(to_dict(batch), indent=2))
    t0 = time.monotonic()
    code = cli_main(["batch", "--config", str(cfg_path), "--out", args.out])
    print(f"total {time.monotonic() - t0:.1f}s; report at {args.out}/report.csv")
    return code


if __name__ == "__main__":
    sys.exit(run())
