"""Command-line interface.

Every subcommand exits 0 on success. Failures print a single line
``error: <kind>: <message>`` on stderr and exit nonzero (2 for bad
arguments or configuration, 1 for everything else).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ArrayConfig, ConfigError, PECoord, check_config, load_config, parse_array
from .dataflow import build_schedule, effective_repair_capacity, register_file_trace, trace_csv
from .detection import (DetectionConfig, coverage_csv_header, coverage_csv_row,
                        detection_coverage, scan_array)
from .emulator import (ArrayState, array_conv, diff_coords, golden_conv, hyca_recover,
                       load_tensor, random_stuck_mask)
from .faults import CLUSTERED, RANDOM, FaultMap, FaultModelParams, gen_faults, per_from_ber
from .harness import PAPER_TRIALS, load_plan, run_plan, write_report
from .perf import (NETWORK_FILES, aggregate_trials, load_network, network_cycles, network_name,
                   normalized_performance, perf_csv_header, perf_csv_row)
from .repair import SCHEMES, repair, run_trials


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _array_cfg(args, default="32x32") -> ArrayConfig:
    base = load_config(args.config) if getattr(args, "config", None) else ArrayConfig()
    if getattr(args, "array", None):
        rows, cols = parse_array(args.array)
        base = base.replace(rows=rows, cols=cols)
    elif not getattr(args, "config", None):
        rows, cols = parse_array(default)
        base = base.replace(rows=rows, cols=cols)
    return check_config(base)


def _add_array(p, default="32x32"):
    p.add_argument("--array", help=f"ROWSxCOLS (default {default})")
    p.add_argument("--config", help="key=value array configuration file")


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- subcommands ------------------------------------------------------------------

def cmd_inject(args) -> int:
    cfg = _array_cfg(args)
    if (args.per is None) == (args.ber is None):
        raise UsageError("give exactly one of --per or --ber")
    per = args.per if args.per is not None else per_from_ber(args.ber, cfg.pe_bits)
    params = FaultModelParams(args.model, per, args.sigma, args.cluster_size, not args.no_dppu)
    _write(gen_faults(cfg, params, args.seed).dumps(), args.out)
    return 0


def cmd_repair(args) -> int:
    fm = FaultMap.load(args.faults)
    if args.array or args.config:
        cfg = _array_cfg(args)
        if (cfg.rows, cfg.cols) != (fm.rows, fm.cols):
            raise ConfigError(f"fault map is {fm.rows}x{fm.cols}, array is {cfg.rows}x{cfg.cols}")
    else:
        cfg = check_config(ArrayConfig(rows=fm.rows, cols=fm.cols))
    plan = repair(args.scheme, cfg, fm, args.dppu_capacity)
    _write(plan.dumps(), args.out)
    return 0


def cmd_schedule(args) -> int:
    cfg = _array_cfg(args)
    if args.structure:
        cfg = cfg.replace(dppu_structure=args.structure)
    try:
        c, k = (int(v) for v in args.layer.split(","))
    except ValueError:
        raise UsageError(f"--layer expects C,K, got {args.layer!r}") from None
    s = build_schedule(cfg, (c, k), args.faults)
    print(f"structure={cfg.dppu_structure}")
    print(f"repair_capacity={effective_repair_capacity(cfg)}")
    print(f"t_iteration={s.t_iteration}")
    print(f"t_2d_write={s.t_2d_write}")
    print(f"t_dppu_write={s.t_dppu_write}")
    print(f"idle={s.idle}")
    print(f"dppu_busy_cycles={s.dppu_busy_cycles}")
    if args.trace:
        start, stop = (int(v) for v in args.trace.split(":"))
        sys.stdout.write(trace_csv(register_file_trace(cfg, start, stop)))
    return 0


def _emulation_faults(args, cfg: ArrayConfig, rng) -> list:
    if args.faults == "auto":
        n = args.n_faults or int(rng.integers(1, min(8, cfg.n_pes) + 1))
        if not 1 <= n <= cfg.n_pes:
            raise UsageError(f"--n-faults must be in [1, {cfg.n_pes}]")
        picks = rng.choice(cfg.n_pes, size=n, replace=False)
        return sorted(PECoord(int(i) // cfg.cols, int(i) % cfg.cols) for i in picks)
    fm = FaultMap.load(args.faults)
    if (fm.rows, fm.cols) != (cfg.rows, cfg.cols):
        raise ConfigError(f"fault map is {fm.rows}x{fm.cols}, array is {cfg.rows}x{cfg.cols}")
    return list(fm.ordered())


def _emulation_tensors(args, rng):
    if args.input or args.weights:
        if not (args.input and args.weights):
            raise UsageError("--input and --weights go together")
        return load_tensor(args.input), load_tensor(args.weights, as_weights=True)
    c, h, w = (int(v) for v in args.shape.split(","))
    inp = rng.integers(-128, 128, size=(c, h, w), dtype=np.int8)
    weights = rng.integers(-128, 128, size=(args.out_channels, c, args.kernel, args.kernel),
                           dtype=np.int8)
    return inp, weights


def cmd_emulate(args) -> int:
    cfg = _array_cfg(args, default="8x8")
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 3]))
    faulty = _emulation_faults(args, cfg, rng)
    masks = {pe: random_stuck_mask(rng, args.stuck_bits) for pe in faulty}
    inp, weights = _emulation_tensors(args, rng)
    golden = golden_conv(inp, weights, args.stride)
    res = array_conv(inp, weights, cfg, masks, args.stride)
    print(f"array={cfg.rows}x{cfg.cols} faulty_pes={len(faulty)} outputs={golden.size}")
    print(f"corrupted_outputs={len(diff_coords(res.output, golden))}")
    final = res.output
    if args.recover:
        final = hyca_recover(res.output, res.attribution, faulty, inp, weights, args.stride)
    mismatches = diff_coords(final, golden)
    if args.dump_diff:
        print("m,oy,ox,got,expected")
        for m, y, x in mismatches:
            print(f"{m},{y},{x},{final[m, y, x]},{golden[m, y, x]}")
    if args.recover:
        exact = not mismatches
        print(f"BIT-EXACT: {str(exact).lower()}")
        if not exact:
            print(f"error: emulation: {len(mismatches)} outputs differ after recovery",
                  file=sys.stderr)
            return 1
    return 0


def _network_args(values) -> list:
    if not values or values == ["all"]:
        return list(NETWORK_FILES)
    return values


def cmd_detect(args) -> int:
    if args.scan:
        cfg = _array_cfg(args, default="8x8")
        det = DetectionConfig.for_array(cfg, window_offset=args.window_offset)
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 3]))
        n = min(args.n_faults, cfg.n_pes)
        picks = rng.choice(cfg.n_pes, size=n, replace=False)
        faulty = sorted(PECoord(int(i) // cfg.cols, int(i) % cfg.cols) for i in picks)
        masks = {pe: random_stuck_mask(rng, args.stuck_bits) for pe in faulty}
        c, h, w = (int(v) for v in args.shape.split(","))
        inp = rng.integers(-128, 128, size=(c, h, w), dtype=np.int8)
        weights = rng.integers(-128, 128, size=(cfg.cols, c, 3, 3), dtype=np.int8)
        res = scan_array(cfg, det, ArrayState(cfg, inp, weights, masks))
        print(f"scan_cycles={res.scan_cycles}")
        print(f"injected={' '.join(str(p) for p in faulty)}")
        print(f"detected={' '.join(str(p) for p in sorted(res.detected))}")
        print(f"fpt={' '.join(str(p) for p in res.fpt_after)}")
        if res.overflow:
            print(f"fpt_overflow={' '.join(str(p) for p in res.overflow)}")
        return 0
    arrays = [parse_array(a) for a in args.arrays.split(",")]
    lines = [coverage_csv_header()]
    for rows, cols in arrays:
        cfg = check_config(ArrayConfig(rows=rows, cols=cols))
        for n in _network_args(args.network):
            lines.append(coverage_csv_row(
                detection_coverage(cfg, load_network(n), network_name(n))))
    _write("\n".join(lines) + "\n", args.out)
    return 0


def cmd_perf(args) -> int:
    cfg = _array_cfg(args)
    names = _network_args(args.network)
    if args.per is None:
        lines = ["network,layer,cycles"]
        for n in names:
            rep = network_cycles(load_network(n), cfg.rows, args.cols or cfg.cols, network_name(n))
            layers = load_network(n)
            lines += [f"{rep.network},{l.name},{c}" for l, c in zip(layers, rep.layer_cycles)]
            lines.append(f"{rep.network},total,{rep.total_cycles}")
        _write("\n".join(lines) + "\n", args.out)
        return 0
    params = FaultModelParams(args.model, args.per)
    outcomes = run_trials(cfg, params, args.trials, args.seed, SCHEMES, workers=args.workers)
    lines = [perf_csv_header()]
    for n in names:
        net = load_network(n)
        reps = {s: aggregate_trials(net, cfg.rows, cfg.cols, (o[s] for o in outcomes))
                for s in SCHEMES}
        ratios = normalized_performance(reps)
        lines += [perf_csv_row(network_name(n), s, args.per, reps[s], ratios[s]) for s in SCHEMES]
    _write("\n".join(lines) + "\n", args.out)
    return 0


def cmd_sweep(args) -> int:
    plan = load_plan(args.plan)
    from dataclasses import replace
    if args.paper_scale:
        plan = replace(plan, trials=PAPER_TRIALS)
    if args.trials is not None:
        plan = replace(plan, trials=args.trials)
    if args.workers is not None:
        plan = replace(plan, workers=args.workers)
    report = run_plan(plan)
    out = write_report(plan, report, args.out)
    print(f"wrote {len(report.files)} CSV files and manifest.txt under {out}")
    for f in report.failures:
        print(f"failed cell: {f}", file=sys.stderr)
    return 1 if report.failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hycasim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"hycasim {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("inject", help="draw a fault map")
    _add_array(s)
    s.add_argument("--model", choices=(RANDOM, CLUSTERED), default=RANDOM)
    s.add_argument("--per", type=float)
    s.add_argument("--ber", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sigma", type=float, default=2.0)
    s.add_argument("--cluster-size", type=float, default=4.0)
    s.add_argument("--no-dppu", action="store_true", help="leave the DPPU fault-free")
    s.add_argument("--out")
    s.set_defaults(func=cmd_inject)

    s = sub.add_parser("repair", help="assign spares for a fault map")
    _add_array(s)
    s.add_argument("--scheme", choices=SCHEMES, required=True)
    s.add_argument("--faults", required=True)
    s.add_argument("--dppu-capacity", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_repair)

    s = sub.add_parser("schedule", help="output-port schedule of one conv iteration")
    _add_array(s)
    s.add_argument("--layer", required=True, help="C,K of the conv layer")
    s.add_argument("--faults", type=int, default=0, help="number of repaired faults")
    s.add_argument("--structure", choices=("grouped", "unified"))
    s.add_argument("--trace", help="START:STOP cycles of Ping-Pong register-file trace")
    s.set_defaults(func=cmd_schedule)

    s = sub.add_parser("emulate", help="bit-accurate conv on a faulty array")
    _add_array(s, "8x8")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--faults", default="auto", help="'auto' or a fault map file")
    s.add_argument("--n-faults", type=int)
    s.add_argument("--stuck-bits", type=int, default=1)
    s.add_argument("--input")
    s.add_argument("--weights")
    s.add_argument("--shape", default="4,6,6", help="C,H,W of a random input")
    s.add_argument("--out-channels", type=int, default=4)
    s.add_argument("--kernel", type=int, default=3)
    s.add_argument("--stride", type=int, default=1)
    s.add_argument("--recover", action="store_true")
    s.add_argument("--dump-diff", action="store_true")
    s.set_defaults(func=cmd_emulate)

    s = sub.add_parser("detect", help="detection coverage, or an emulated scan with --scan")
    _add_array(s, "8x8")
    s.add_argument("--arrays", default="16x16,32x32,64x64,128x128")
    s.add_argument("--network", action="append")
    s.add_argument("--scan", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-faults", type=int, default=1)
    s.add_argument("--stuck-bits", type=int, default=1)
    s.add_argument("--window-offset", type=int, default=0)
    s.add_argument("--shape", default="4,10,10")
    s.add_argument("--out")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("perf", help="cycle model, or normalized performance with --per")
    _add_array(s)
    s.add_argument("--network", action="append")
    s.add_argument("--cols", type=int, help="surviving columns")
    s.add_argument("--per", type=float)
    s.add_argument("--model", choices=(RANDOM, CLUSTERED), default=RANDOM)
    s.add_argument("--trials", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_perf)

    s = sub.add_parser("sweep", help="run an experiment plan")
    s.add_argument("--plan", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--paper-scale", action="store_true", help="10000 trials per point")
    s.add_argument("--trials", type=int)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
