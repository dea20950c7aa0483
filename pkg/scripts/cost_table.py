#!/usr/bin/env python3
"""Side-by-side cost report: stacked-perception head configurations against
the conventional two-tower parallel head, at matched channel width.

Usage:
  python scripts/cost_table.py [--C 16] [--H 8] [--W 8] [--classes 80] [--anchors 1]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from unihead import profiler  # noqa: E402
from unihead.config import HeadConfig  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--C", type=int, default=16)
    ap.add_argument("--H", type=int, default=8)
    ap.add_argument("--W", type=int, default=8)
    ap.add_argument("--classes", type=int, default=80)
    ap.add_argument("--anchors", type=int, default=1)
    args = ap.parse_args()

    rows = []
    for n in (1, 2, 3, 4):
        cfg = HeadConfig(C=args.C, n_dp=1, n_dat=n, n_cit=n,
                         num_classes=args.classes, num_anchors=args.anchors)
        rep = profiler.count(cfg, args.H, args.W)
        rows.append((f"stacked (1,{n},{n})", rep.total_macs, rep.total_params))

    base = profiler.parallel_head_baseline(args.C, n_convs=4, A=args.anchors,
                                           num_classes=args.classes,
                                           H=args.H, W=args.W)
    rows.append(("parallel 2x4 convs", base.total_macs, base.total_params))

    name_w = max(len(r[0]) for r in rows)
    print(f"{'head':<{name_w}}  {'MACs':>14}  {'params':>10}")
    for name, macs, params in rows:
        print(f"{name:<{name_w}}  {macs:>14,}  {params:>10,}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
