"""Versioned regression corpus.

One directory per case: config.json, input.uht, cls.uht, box.uht, cost.json,
manifest.json. The grid crosses the stacking configurations (1, n, n) for
n in 1..4 with stripe widths 1/3/5; widths 1 and 3 run at 12x12 and width 5
at 10x10 so the divisibility precondition holds. Replay compares SHA-256
digests of the UHT payloads (recorded from double-precision runs) and the
cost report; elementwise diffs are computed only on mismatch.
"""

from __future__ import annotations

import json
import os
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, profiler
from .config import HeadConfig
from .head import Head, build_head
from .inputs import synthetic_input
from .numkit import tensorio

ENV_ROOT = "UNIHEAD_GOLDEN_DIR"
STACKS = (1, 2, 3, 4)
WIDTHS = (1, 3, 5)
CASE_FILES = ("config.json", "input.uht", "cls.uht", "box.uht",
              "cost.json", "manifest.json")


class GoldensError(RuntimeError):
    """Corpus harness failure (missing files), distinct from a value mismatch."""


def default_root() -> Path:
    return Path(os.environ.get(ENV_ROOT, "goldens"))


def expected_case_ids() -> list[str]:
    return [f"s{n}_w{w}" for n in STACKS for w in WIDTHS]


def case_setup(case_id: str) -> tuple[HeadConfig, int, int, int]:
    """(config, H, W, input seed) for one grid cell."""
    stem, width = case_id.split("_w")
    n = int(stem[1:])
    w = int(width)
    side = 10 if w == 5 else 12
    cfg = HeadConfig(C=8, n_dp=1, n_dat=n, n_cit=n, stripe_width=w,
                     num_classes=3, num_anchors=1, precision="f64",
                     seed=2000 + 10 * n + w)
    return cfg, side, side, 9000 + 10 * n + w


def record_case(root, case_id: str) -> Path:
    cfg, H, W, in_seed = case_setup(case_id)
    case_dir = Path(root) / case_id
    case_dir.mkdir(parents=True, exist_ok=True)

    x = synthetic_input(H, W, cfg.C, in_seed)
    head, _ = build_head(cfg)
    out = head.forward(x)
    cost = profiler.count(head, H, W)

    (case_dir / "config.json").write_text(cfg.to_json())
    blobs = {"input.uht": tensorio.tensor_bytes(x),
             "cls.uht": tensorio.tensor_bytes(out.cls_logits),
             "box.uht": tensorio.tensor_bytes(out.box_deltas)}
    for name, blob in blobs.items():
        (case_dir / name).write_bytes(blob)
    (case_dir / "cost.json").write_text(cost.to_json())

    manifest = {
        "case_id": case_id,
        "spatial": {"H": H, "W": W},
        "input_seed": in_seed,
        "digests": {name: tensorio.payload_digest(blob)
                    for name, blob in blobs.items()},
        "tool_version": __version__,
        "recorded_on": {"python": platform.python_version(),
                        "numpy": np.__version__,
                        "machine": platform.machine()},
    }
    (case_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return case_dir


def record_all(root) -> list[Path]:
    return [record_case(root, cid) for cid in expected_case_ids()]


@dataclass
class ReplayResult:
    case_id: str
    passed: bool
    mismatches: list[dict] = field(default_factory=list)

    def summary(self) -> str:
        if self.passed:
            return f"{self.case_id}: pass"
        parts = []
        for m in self.mismatches:
            where = (f" max_abs_diff={m['max_abs_diff']:.3e} at {m['argmax']}"
                     if "max_abs_diff" in m else "")
            parts.append(f"{m['artifact']}{where}")
        return f"{self.case_id}: MISMATCH [{'; '.join(parts)}]"


def _diff_entry(artifact: str, expected: str, got: str,
                ref: np.ndarray | None, new: np.ndarray | None) -> dict:
    entry = {"artifact": artifact, "expected_digest": expected, "got_digest": got}
    if ref is not None and new is not None and ref.shape == new.shape:
        diff = np.abs(ref - new)
        pos = np.unravel_index(int(diff.argmax()), diff.shape)
        entry["max_abs_diff"] = float(diff.max())
        entry["argmax"] = [int(p) for p in pos]
    return entry


def replay(case_dir, head: Head | None = None) -> ReplayResult:
    """Rerun forward + count for one case and compare against the recording.

    A prebuilt head may be supplied (e.g. with perturbed parameters); by
    default the head is rebuilt from the recorded config seed.
    """
    case_dir = Path(case_dir)
    missing = [f for f in CASE_FILES if not (case_dir / f).exists()]
    if missing:
        raise GoldensError(f"case {case_dir.name}: missing files {missing}")

    manifest = json.loads((case_dir / "manifest.json").read_text())
    cfg = HeadConfig.from_file(case_dir / "config.json")
    x = tensorio.read_tensor(case_dir / "input.uht")
    if head is None:
        head, _ = build_head(cfg)
    out = head.forward(x)
    H, W = manifest["spatial"]["H"], manifest["spatial"]["W"]
    cost = profiler.count(head, H, W)

    result = ReplayResult(case_dir.name, passed=True)
    produced = {"cls.uht": out.cls_logits, "box.uht": out.box_deltas}
    for name, arr in produced.items():
        blob = tensorio.tensor_bytes(arr)
        got = tensorio.payload_digest(blob)
        want = manifest["digests"][name]
        if got != want:
            stored = tensorio.read_tensor(case_dir / name)
            layer = "cls_logits" if name == "cls.uht" else "box_deltas"
            result.mismatches.append(_diff_entry(layer, want, got, stored, arr))
    stored_cost = json.loads((case_dir / "cost.json").read_text())
    if stored_cost != cost.to_dict():
        result.mismatches.append({"artifact": "cost_report",
                                  "expected_digest": "-", "got_digest": "-"})
    result.passed = not result.mismatches
    return result


def replay_all(root) -> list[ReplayResult]:
    root = Path(root)
    ids = expected_case_ids()
    missing = [cid for cid in ids if not (root / cid).is_dir()]
    if missing:
        raise GoldensError(f"golden corpus incomplete: missing cases {missing}")
    return [replay(root / cid) for cid in ids]
