"""Command-line front end.

Subcommands: forward | flops | gradcheck | oracle | params.
Exit codes: 0 success; 1 failed gradient/oracle checks; 2 config error;
3 shape error; 4 I/O error; 5 closed-form mismatch in the cost report.
Runs that produce file outputs write a run manifest alongside them.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, checks, profiler
from .config import HeadConfig
from .errors import ConfigError, ShapeError
from .head import build_head
from .inputs import DISTRIBUTION, synthetic_input
from .numkit import tensorio

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SHAPE = 3
EXIT_IO = 4
EXIT_CLOSED_FORM = 5


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--json", action="store_true", help="machine-parsable output")
    sp.add_argument("--seed", type=int, default=0, help="seed for synthetic data / trials")
    sp.add_argument("--threads", type=int, default=1,
                    help="trial-level parallelism where determinism allows")
    sp.add_argument("--precision", choices=("f32", "f64"), default=None,
                    help="override config precision")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unihead")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    fw = sub.add_parser("forward", help="run the head on a tensor file or synthetic input")
    fw.add_argument("--config", type=Path, default=None)
    fw.add_argument("--input", type=Path, default=None, help="UHT feature map")
    fw.add_argument("--synthetic", default=None, metavar="HxWxC")
    fw.add_argument("--out", type=Path, required=True)
    _add_common(fw)

    fl = sub.add_parser("flops", help="per-layer MAC/parameter report with closed-form checks")
    fl.add_argument("--config", type=Path, default=None)
    fl.add_argument("--H", type=int, required=True)
    fl.add_argument("--W", type=int, required=True)
    fl.add_argument("--out", type=Path, default=None)
    _add_common(fl)

    gc = sub.add_parser("gradcheck", help="analytic vs central-difference gradients")
    gc.add_argument("--module", default="all",
                    choices=("all",) + checks.GRADCHECK_MODULES)
    gc.add_argument("--trials", type=int, default=10)
    gc.add_argument("--h", type=float, default=1e-5)
    gc.add_argument("--tol", type=float, default=1e-6)
    gc.add_argument("--out", type=Path, default=None)
    _add_common(gc)

    orc = sub.add_parser("oracle", help="brute-force oracle comparisons")
    orc.add_argument("--check", default="all", choices=("all",) + checks.ORACLE_CHECKS)
    orc.add_argument("--trials", type=int, default=20)
    orc.add_argument("--out", type=Path, default=None)
    _add_common(orc)

    pr = sub.add_parser("params", help="build a head and dump its parameter store")
    pr.add_argument("--config", type=Path, default=None)
    pr.add_argument("--out", type=Path, required=True)
    _add_common(pr)
    return p


def _load_config(args) -> HeadConfig:
    cfg = HeadConfig.from_file(args.config) if args.config else HeadConfig()
    if args.precision:
        cfg.precision = args.precision
        cfg.validate()
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    return cfg


def _write_manifest(out_dir: Path, command: str, cfg_path, input_spec,
                    outputs: list[str], name: str = "manifest.json") -> None:
    manifest = {
        "command": command,
        "config": str(cfg_path) if cfg_path else "default",
        "input": input_spec,
        "outputs": outputs,
        "exit_status": 0,
        "tool_version": __version__,
    }
    (out_dir / name).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _parse_synthetic(spec: str) -> tuple[int, int, int]:
    parts = spec.lower().split("x")
    if len(parts) != 3:
        raise ConfigError(f"--synthetic expects HxWxC, got {spec!r}")
    try:
        h, w, c = (int(v) for v in parts)
    except ValueError as exc:
        raise ConfigError(f"--synthetic expects integers, got {spec!r}") from exc
    if min(h, w, c) < 1:
        raise ConfigError(f"--synthetic dims must be positive, got {spec!r}")
    return h, w, c


def cmd_forward(args) -> int:
    cfg = _load_config(args)
    if (args.input is None) == (args.synthetic is None):
        raise ConfigError("exactly one of --input / --synthetic is required")
    if args.input is not None:
        x = tensorio.read_tensor(args.input)
        if x.ndim != 3:
            raise ShapeError(f"input tensor must be rank 3, got rank {x.ndim}")
        input_spec = {"file": str(args.input)}
    else:
        H, W, C = _parse_synthetic(args.synthetic)
        x = synthetic_input(H, W, C, args.seed)
        input_spec = {"synthetic": {"H": H, "W": W, "C": C, "seed": args.seed,
                                    "distribution": DISTRIBUTION}}
    head, _ = build_head(cfg)
    out = head.forward(x)

    args.out.mkdir(parents=True, exist_ok=True)
    tensorio.write_tensor(args.out / "cls.uht", out.cls_logits)
    tensorio.write_tensor(args.out / "box.uht", out.box_deltas)
    _write_manifest(args.out, "forward", args.config, input_spec,
                    ["cls.uht", "box.uht"])
    if args.json:
        print(json.dumps({"cls": str(args.out / "cls.uht"),
                          "box": str(args.out / "box.uht"),
                          "cls_shape": list(out.cls_logits.shape),
                          "box_shape": list(out.box_deltas.shape)}))
    else:
        print(f"wrote {args.out}/cls.uht {out.cls_logits.shape} and "
              f"{args.out}/box.uht {out.box_deltas.shape}")
    return EXIT_OK


def cmd_flops(args) -> int:
    cfg = _load_config(args)
    head, _ = build_head(cfg)
    report = profiler.count(head, args.H, args.W)
    print(report.to_json() if args.json else report.table())
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "cost.json").write_text(report.to_json())
        _write_manifest(args.out, "flops", args.config,
                        {"H": args.H, "W": args.W}, ["cost.json"])
    if not report.all_checks_pass():
        failures = [c.formula_name for c in report.closed_form_checks if not c.match]
        print(f"closed-form mismatches: {failures}", file=sys.stderr)
        return EXIT_CLOSED_FORM
    return EXIT_OK


def _emit_reports(args, command: str, reports) -> int:
    lines = [r.to_json() for r in reports]
    for line in lines:
        print(line)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "reports.jsonl").write_text("\n".join(lines) + "\n")
        _write_manifest(args.out, command, getattr(args, "config", None),
                        {"trials": args.trials, "seed": args.seed}, ["reports.jsonl"])
    failed = [r for r in reports if not r.passed]
    if failed:
        print(f"{len(failed)}/{len(reports)} checks failed", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.precision == "f32":
        raise ConfigError("gradcheck requires the double-precision build path")
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    reports = checks.run_gradchecks(args.module, args.trials, h=args.h,
                                    tol=args.tol, seed=args.seed,
                                    threads=args.threads)
    return _emit_reports(args, "gradcheck", reports)


def cmd_oracle(args) -> int:
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    reports = checks.run_oracle_checks(args.check, args.trials, seed=args.seed,
                                       threads=args.threads)
    return _emit_reports(args, "oracle", reports)


def cmd_params(args) -> int:
    cfg = _load_config(args)
    _, store = build_head(cfg)
    store.save(args.out)
    # manifest.json in this directory is the parameter index; the run record
    # goes next to it under its own name
    _write_manifest(args.out, "params", args.config, None,
                    [n + ".uht" for n in store.names()], name="run_manifest.json")
    if args.json:
        print(json.dumps({"total_params": store.total_params(),
                          "names": store.names()}))
    else:
        print(f"wrote {len(store.names())} parameter tensors "
              f"({store.total_params()} scalars) to {args.out}")
    return EXIT_OK


_COMMANDS = {"forward": cmd_forward, "flops": cmd_flops,
             "gradcheck": cmd_gradcheck, "oracle": cmd_oracle,
             "params": cmd_params}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ShapeError as exc:
        print(f"shape error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
