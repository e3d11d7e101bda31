"""Command-line entry: run scenarios, size powertrains, inspect logs."""

import argparse
import json
import sys
from collections import Counter

from .scenario import ScenarioError, load_scenario
from .sizing import (
    InfeasibleConfigurationError,
    build_sizing_report,
    format_report,
    load_sizing_config,
)
from .wire import FrameDecoder, SchemaError, load_dialect
from .wire.tlog import read_tlog

USAGE_ERROR = 2


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename or exc}", file=sys.stderr)
        return USAGE_ERROR
    except (ScenarioError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hexsim",
        description="Deterministic hexacopter flight-stack simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario, optionally serving a GCS")
    p_run.add_argument("--scenario", required=True, help="scenario YAML file")
    p_run.add_argument("--seed", type=int, help="override the scenario seed")
    p_run.add_argument("--serve", metavar="HOST:PORT",
                       help="serve the GCS endpoints and pace to wall clock")
    p_run.add_argument("--headless", action="store_true",
                       help="run as fast as possible (default unless --serve)")
    p_run.add_argument("--tlog", help="write the telemetry log here")
    p_run.add_argument("--truth-csv", help="write the truth trace as CSV")
    p_run.add_argument("--ui-dir", help="static UI files to serve at /")
    p_run.set_defaults(func=cmd_run)

    p_size = sub.add_parser("size", help="powertrain sizing report")
    p_size.add_argument("--config", required=True, help="key-value config file")
    p_size.add_argument("--json", help="also write the report as JSON here")
    p_size.set_defaults(func=cmd_size)

    p_replay = sub.add_parser("replay", help="decode and summarize a tlog")
    p_replay.add_argument("--tlog", required=True)
    p_replay.add_argument("--dialect", help="dialect file (default: built-in)")
    p_replay.set_defaults(func=cmd_replay)

    p_schema = sub.add_parser("schema-check", help="validate a dialect file")
    p_schema.add_argument("--dialect", help="dialect file (default: built-in)")
    p_schema.set_defaults(func=cmd_schema_check)
    return parser


def cmd_run(args) -> int:
    from .runtime import SimSession

    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
        scenario.validate()
    session = SimSession(scenario)

    server = None
    if args.serve:
        from .server import GcsServer

        host, _, port = args.serve.partition(":")
        server = GcsServer(session, host=host or "127.0.0.1",
                           http_port=int(port or 0), ui_dir=args.ui_dir)
        server.start()
        print(f"http/ws : http://{server.http_addr[0]}:{server.http_addr[1]} "
              f"(frames at /ws, dialect at /dialect.xml)")
        print(f"tcp     : {server.tcp_addr[0]}:{server.tcp_addr[1]}")

    try:
        log = session.run(pace_to_wall=bool(args.serve) and not args.headless)
    finally:
        if server is not None:
            server.stop()

    if args.tlog:
        with open(args.tlog, "wb") as fh:
            fh.write(log.tlog_bytes)
    if args.truth_csv:
        with open(args.truth_csv, "w", encoding="utf-8") as fh:
            fh.write(log.truth_csv())
    print(f"scenario {log.scenario_name}: {log.duration_s:.1f} s simulated, "
          f"{log.frames_emitted} frames, final mode {log.final_mode}, "
          f"failsafe {log.failsafe}")
    for t_s, text in log.events:
        print(f"  [{t_s:8.2f}] {text}")
    return 0


def cmd_size(args) -> int:
    spec, env = load_sizing_config(args.config)
    try:
        report = build_sizing_report(spec, env)
    except InfeasibleConfigurationError as exc:
        print(f"infeasible configuration: {exc}", file=sys.stderr)
        return 1
    print(format_report(report))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report.as_dict(), fh, indent=2)
            fh.write("\n")
    return 0


def replay_stats(tlog_path, registry) -> dict:
    """Decode every record of a tlog; returns counts and link stats."""
    records = read_tlog(tlog_path)
    decoder = FrameDecoder(registry)
    per_message = Counter()
    decoded = 0
    for _ts, raw in records:
        for frame in decoder.feed(raw):
            decoded += 1
            schema = registry.by_id.get(frame.msg_id)
            per_message[schema.name if schema else f"id{frame.msg_id}"] += 1
    decoder.flush()
    return {
        "records": len(records),
        "decoded": decoded,
        "bad_crc": decoder.stats.frames_bad_crc,
        "dropped": decoder.stats.frames_dropped,
        "per_message": dict(per_message),
        "first_us": records[0][0] if records else None,
        "last_us": records[-1][0] if records else None,
    }


def cmd_replay(args) -> int:
    registry = load_dialect(args.dialect)
    stats = replay_stats(args.tlog, registry)
    span = 0.0
    if stats["records"]:
        span = (stats["last_us"] - stats["first_us"]) / 1e6
    print(f"{stats['records']} records, {stats['decoded']} frames decoded, "
          f"{stats['bad_crc']} bad CRC, {stats['dropped']} dropped, "
          f"{span:.1f} s span")
    for name, count in sorted(stats["per_message"].items(),
                              key=lambda kv: -kv[1]):
        print(f"  {name:16s} {count}")
    if stats["decoded"] != stats["records"]:
        print("warning: some records failed to decode", file=sys.stderr)
        return 1
    return 0


def cmd_schema_check(args) -> int:
    registry = load_dialect(args.dialect)
    print(f"dialect {registry.dialect_name or '(unnamed)'}: "
          f"{len(registry)} messages")
    for msg_id in sorted(registry.by_id):
        schema = registry.by_id[msg_id]
        print(f"  {msg_id:3d} {schema.name:16s} payload {schema.payload_len:3d} B"
              f"  crc_extra 0x{schema.crc_extra:02X}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
