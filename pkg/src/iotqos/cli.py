"""Command line driver: ``iotqos run|validate|calibrate|compare``."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .errors import QosError
from .scenario import (Mode, calibrate, compare, load_config, read_csv, run_scenario,
                       save_config)

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="iotqos", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="simulate a scenario and write the metrics CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--mode", choices=[m.value for m in Mode])
    run.add_argument("--out", required=True, help="metrics CSV path")
    run.add_argument("--audit", help="audit log path (JSON lines)")
    run.add_argument("--seed", type=int)

    val = sub.add_parser("validate", help="check a scenario config")
    val.add_argument("--config", required=True)

    cal = sub.add_parser("calibrate", help="solve the stage-1 radio bandwidth")
    cal.add_argument("--config", required=True)
    cal.add_argument("--target-rtt", type=float, required=True)
    cal.add_argument("--out", required=True)

    cmp_ = sub.add_parser("compare", help="per-window table and stage verdicts")
    cmp_.add_argument("--baseline", required=True)
    cmp_.add_argument("--adaptive", required=True)
    cmp_.add_argument("--target-rtt", type=float, default=0.5)
    return p


def cli_main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"OK: {len(cfg.nodes)} nodes, {len(cfg.links)} links, "
                  f"{len(cfg.resources)} resources, mode {cfg.mode.value}")
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config)
            if args.mode:
                cfg = dataclasses.replace(cfg, mode=Mode(args.mode))
            if args.seed is not None:
                cfg = dataclasses.replace(cfg, seed=args.seed)
            log = run_scenario(cfg)
            log.write_csv(args.out)
            if args.audit:
                log.audit.write(args.audit)
            print(f"{log.requests} requests, {log.responses} responses, "
                  f"{log.failed} failed; {len(log.windows)} windows -> {args.out}")
            return EXIT_OK
        if args.command == "calibrate":
            cfg = calibrate(args.target_rtt, load_config(args.config))
            save_config(cfg, args.out)
            print(f"radio_bandwidth_bps = {cfg.radio_bandwidth_bps:.3f} -> {args.out}")
            return EXIT_OK
        if args.command == "compare":
            table, verdicts = compare(read_csv(args.baseline), read_csv(args.adaptive),
                                      target_rtt=args.target_rtt)
            print(table)
            ok = all(v.passed for v in verdicts)
            print("verdict:", "PASS" if ok else "FAIL")
            return EXIT_OK if ok else EXIT_CHECK
    except (QosError, OSError, KeyError, ValueError) as exc:
        print(f"iotqos {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
