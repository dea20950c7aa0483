#!/usr/bin/env python3
"""Record (or re-record) the golden regression corpus.

Usage:
  python scripts/make_goldens.py             # writes ./goldens (or $UNIHEAD_GOLDEN_DIR)
  python scripts/make_goldens.py --root DIR
  python scripts/make_goldens.py --verify    # replay instead of recording
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from unihead import goldens  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--root", type=Path, default=None)
    ap.add_argument("--verify", action="store_true",
                    help="replay the existing corpus instead of recording")
    args = ap.parse_args()
    root = args.root or goldens.default_root()

    if args.verify:
        results = goldens.replay_all(root)
        for r in results:
            print(r.summary())
        return 0 if all(r.passed for r in results) else 1

    for case_dir in goldens.record_all(root):
        print(f"recorded {case_dir}")
    print(f"{len(goldens.expected_case_ids())} cases under {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
