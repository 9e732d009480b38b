"""Command-line entry point: simulate scenarios, analyze logs, self-test.

Exit codes: 0 success, 1 check failure, 2 configuration error (message names
the offending key), 3 I/O error, 4 numeric overflow. Every simulation writes
a manifest sufficient to reproduce the run bit-exactly; no environment
variables are consulted.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace

from . import __version__
from .analysis import export_report, relative_timing_error
from .config import NodeRole, parse_scenario
from .engine import NodeLog, PulseRecord, run_scenario
from .errors import ConfigError, PsOverflowError
from .timebase import TimeSpan

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_OVERFLOW = 4


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_logs(result, config, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    all_events = []
    for name, log in result.logs.items():
        with open(os.path.join(out_dir, f"log_{name}.csv"), "w") as fh:
            fh.write("pulse_idx,emit_true_ps,tag_local_ps,valid\n")
            for p in log.pulses:
                fh.write(f"{p.pulse_idx},{p.emit_true_ps},{p.tag_local_ps},{int(p.valid)}\n")
        with open(os.path.join(out_dir, f"diag_{name}.csv"), "w") as fh:
            fh.write("t_ps,efc_volts,phase_error_ps\n")
            for t, v, ph in log.diagnostics:
                fh.write(f"{t},{v:.9f},{ph}\n")
        for t, event, detail in log.events:
            all_events.append((t, name, event, detail))
    all_events.sort(key=lambda r: (r[0], r[2], r[1]))
    with open(os.path.join(out_dir, "events.csv"), "w") as fh:
        fh.write("t_ps,node,event,detail\n")
        for t, node, event, detail in all_events:
            fh.write(f"{t},{node},{event},{detail}\n")


def _write_manifest(config, config_path, result, out_dir, runtime_s) -> None:
    inputs = {os.path.basename(config_path): _sha256(config_path)}
    inputs[os.path.basename(config.trajectory_path)] = _sha256(config.trajectory_path)
    seen = set()
    for node in config.nodes:
        if node.profile.name not in seen:
            seen.add(node.profile.name)
    manifest = {
        "tool": "gnssdo-sim",
        "version": __version__,
        "rng": "numpy PCG64 via SeedSequence([master, slot, purpose, sub])",
        "master_seed": config.master_seed,
        "stream_seeds": result.seeds,
        "input_hashes": inputs,
        "duration_s": config.duration.ps / 1e12,
        "step_ms": config.step.ps / 1e9,
        "measurement_pulse_interval_ms": config.pulse_interval.ps / 1e9,
        "calibration_window_s": [
            config.calibration_window[0].ps / 1e12,
            config.calibration_window[1].ps / 1e12,
        ],
        "nodes": {n.name: n.role.value for n in config.nodes},
        "emitter": config.emitter.name,
        "wall_clock_runtime_s": round(runtime_s, 3),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_simulate(args) -> int:
    try:
        config = parse_scenario(args.config)
        if args.seed is not None:
            config = replace(config, master_seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        t0 = time.monotonic()
        result = run_scenario(config)
        runtime = time.monotonic() - t0
        _write_logs(result, config, args.out)
        _write_manifest(config, args.config, result, args.out, runtime)
    except PsOverflowError as exc:
        print(f"numeric overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(result.logs)} node logs to {args.out} ({runtime:.1f} s simulated run)")
    return EXIT_OK


def _read_node_log(path: str, name: str, role: NodeRole) -> NodeLog:
    log = NodeLog(name=name, role=role)
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "pulse_idx,emit_true_ps,tag_local_ps,valid":
            raise ConfigError(os.path.basename(path), f"unexpected header {header!r}")
        for line in fh:
            idx, emit, tag, valid = line.strip().split(",")
            log.pulses.append(PulseRecord(int(idx), int(emit), int(tag), valid == "1"))
    return log


def _read_saturations(log_dir: str) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    path = os.path.join(log_dir, "events.csv")
    if not os.path.exists(path):
        return out
    with open(path) as fh:
        fh.readline()
        for line in fh:
            t, node, event, _detail = line.strip().split(",", 3)
            if event == "efc_saturation":
                out.setdefault(node, []).append(int(t) / 1e12)
    return out


def cmd_analyze(args) -> int:
    try:
        manifest_path = os.path.join(args.logs, "manifest.json")
        if not os.path.exists(manifest_path):
            raise ConfigError("manifest.json", f"not found in {args.logs}")
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        nodes = manifest["nodes"]
        emitter = manifest["emitter"]
        if args.calibration_window:
            lo, hi = (float(x) for x in args.calibration_window.split(":"))
        else:
            lo, hi = manifest["calibration_window_s"]
        window = (TimeSpan.from_s(lo), TimeSpan.from_s(hi))

        logs = {}
        for name, role in nodes.items():
            path = os.path.join(args.logs, f"log_{name}.csv")
            if not os.path.exists(path):
                raise ConfigError(f"log_{name}.csv", "log file missing for configured node")
            logs[name] = _read_node_log(path, name, NodeRole(role))

        if args.pairs == "all":
            pairs = [(emitter, n) for n in nodes if n != emitter]
        else:
            pairs = []
            for chunk in args.pairs.split(","):
                a, _, b = chunk.partition(":")
                if not b:
                    raise ConfigError("--pairs", f"bad pair {chunk!r}, want a:b")
                for n in (a, b):
                    if n not in logs:
                        raise ConfigError("--pairs", f"unknown node {n!r}")
                pairs.append((a, b))

        counts = {len(logs[n].pulses) for n in logs}
        if len(counts) != 1:
            raise ConfigError("logs", f"pulse counts differ across logs: {sorted(counts)}")

        saturations = _read_saturations(args.logs)
        series_list = []
        overlay = {}
        for a, b in pairs:
            series = relative_timing_error(logs[a], logs[b], window)
            series_list.append(series)
            overlay[series.pair] = sorted(saturations.get(a, []) + saturations.get(b, []))
        written = export_report(series_list, args.out, args.format, overlay)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(written)} report files to {args.out}")
    return EXIT_OK


def cmd_selftest(_args) -> int:
    from .selftest import run_checks

    t0 = time.monotonic()
    results = run_checks()
    elapsed = time.monotonic() - t0
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: {r.detail}")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed in {elapsed:.1f} s")
    return EXIT_OK if not failed else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnssdo-sim",
        description="Multi-node simulator of GNSS-disciplined oscillators on moving vehicles",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and write node logs")
    sim.add_argument("--config", required=True, help="scenario .cfg file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override the master seed")
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="pairwise relative timing error from logs")
    ana.add_argument("--logs", required=True, help="directory produced by simulate")
    ana.add_argument("--out", required=True, help="report output directory")
    ana.add_argument("--pairs", default="all", help="'all' (emitter vs rest) or a:b,c:d")
    ana.add_argument(
        "--calibration-window", default=None, metavar="START:END",
        help="seconds, defaults to the scenario's stationary window",
    )
    ana.add_argument("--format", choices=("csv", "svg", "both"), default="both")
    ana.set_defaults(func=cmd_analyze)

    st = sub.add_parser("selftest", help="fast built-in property checks")
    st.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
