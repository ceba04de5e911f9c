"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure
inside a solver or scenario.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import fileformats
from .config import ConfigError, load_config
from .scenario import OUTPUT_ROOT_ENV, ScenarioError, run, sweep_lambda, write_sweep

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; usage problems map to 1 here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ergosearch", description="Flow-aware multi-agent search simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("config")
    r.add_argument("--seed", type=int, help="override the target seed")
    r.add_argument("--out", help=f"output directory (default: ${OUTPUT_ROOT_ENV}/<name> or runs/<name>)")
    r.add_argument("--mode", choices=("dynamic", "static"), help="override the planning mode")

    s = sub.add_parser("sweep", help="velocity-ratio sweep, both modes")
    s.add_argument("config")
    s.add_argument("--lambdas", type=_floats, required=True)
    s.add_argument("--horizons", type=_floats, required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output directory for sweep.csv and sweep.png")

    d = sub.add_parser("render", help="raster image of a saved field snapshot")
    d.add_argument("field")
    fmt = d.add_mutually_exclusive_group()
    fmt.add_argument("--png", action="store_true", help="false-color PNG (default)")
    fmt.add_argument("--pgm", action="store_true", help="8-bit grayscale PGM")
    d.add_argument("-o", "--output", help="image path (default: next to the field file)")

    v = sub.add_parser("validate", help="parse a config and check its invariants")
    v.add_argument("config")
    return p


def _out_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.mode:
        cfg = cfg.with_mode(args.mode)
    res = run(cfg, out_dir=args.out)
    s = res.summary
    print(f"{cfg.name} [{cfg.run.mode}] eta={s['eta']:.4f} kappa={s['kappa']:.4f} -> {res.output}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    rows = sweep_lambda(cfg, args.lambdas, args.horizons, jobs=args.jobs)
    out = Path(args.out) if args.out else _out_root() / f"{cfg.name}_sweep"
    out.mkdir(parents=True, exist_ok=True)
    write_sweep(out / "sweep.csv", rows)
    from .report import sweep_figure

    sweep_figure(rows, out / "sweep.png")
    print(f"{len(rows)} rows -> {out / 'sweep.csv'}")
    return EXIT_OK


def _cmd_render(args) -> int:
    src = Path(args.field)
    hdr, values = fileformats.read_field(src)
    fluid = None
    for cand in (src.parent / "mask.bin", src.parent.parent / "mask.bin"):
        if cand.exists():
            fluid = fileformats.read_mask(cand, hdr.nx, hdr.ny) == 0
            break
    if args.pgm:
        dest = Path(args.output) if args.output else src.with_suffix(".pgm")
        fileformats.write_pgm(dest, values, fluid)
    else:
        from .report import field_figure

        dest = Path(args.output) if args.output else src.with_suffix(".png")
        x0, y0 = hdr.origin
        extent = (x0, x0 + hdr.nx * hdr.h, y0, y0 + hdr.ny * hdr.h)
        field_figure(values, dest, extent=extent, mask=fluid, title=f"t = {hdr.times[0]:g} s")
    print(dest)
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    info = {
        "name": cfg.name,
        "mode": cfg.run.mode,
        "agents": cfg.agents.count,
        "m0_components": len(cfg.m0),
        "phases": [list(p) for p in cfg.mission.phases],
        "diffusion_m2_per_s": cfg.transport.diffusion,
    }
    print(json.dumps(info))
    return EXIT_OK


_COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "render": _cmd_render, "validate": _cmd_validate}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioError, fileformats.FileFormatError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
