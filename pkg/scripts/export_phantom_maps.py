#!/usr/bin/env python3
"""Export phantom heatmaps and centerline plans for all three task tiers.

Writes occupancy / distance-field / costmap PGMs plus plan JSONs, one set per
tier, for visual inspection of the navigation fields.

    python3 scripts/export_phantom_maps.py --out runs/maps --seed 7
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from vesselsim.cli import main as cli_main


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/maps")
    parser.add_argument("--seed", type=int, default=7, help="phantom generator seed")
    args = parser.parse_args(argv)
    for tier in ("easy", "medium", "hard"):
        code = cli_main(
            [
                "plan",
                "--out",
                str(Path(args.out) / tier),
                "--set",
                f"task.tier={tier}",
                "--set",
                f"phantom.seed={args.seed}",
            ]
        )
        if code != 0:
            return code
    print(f"maps for all tiers under {args.out}/")
    return 0


if __name__ == "__main__":
    sys.exit(run())
