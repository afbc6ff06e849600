"""Command line entry point.

    shadowpatch run <config.json>      start the composed system
    shadowpatch workload ...           drive deterministic traffic at a target
    shadowpatch demo [--dir DIR]       run the end-to-end repair scenario
"""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
import threading
from pathlib import Path

from . import config as config_mod
from .compose import Stack
from .config import ConfigError
from .demo import run_demo
from .workload import HttpDriver, gen_workload


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        config = config_mod.load(args.config)
        stack = Stack(config)
        stack.start()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"startup error: {e}", file=sys.stderr)
        return 2
    print(stack.ready_message, flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        stack.stop()
    return 0


def _cmd_workload(args: argparse.Namespace) -> int:
    requests = gen_workload(args.seed, args.n, args.fail_fraction)
    if args.dry_run:
        for r in requests:
            print(f"{r.method} {r.path}?id={r.param('id')}")
        return 0
    driver = HttpDriver(args.target)
    statuses: dict[int, int] = {}
    for r in requests:
        result = driver.send(r)
        statuses[result.response.status] = statuses.get(result.response.status, 0) + 1
    driver.close()
    print(f"sent {args.n} requests to {args.target}")
    for status in sorted(statuses):
        print(f"  {status}: {statuses[status]}")
    return 0


def _cmd_demo(args: argparse.Namespace) -> int:
    directory = Path(args.dir) if args.dir else Path(tempfile.mkdtemp(prefix="shadowpatch-demo-"))
    report = run_demo(
        directory,
        seed=args.seed,
        n=args.n,
        fail_fraction=args.fail_fraction,
        budget_ms=args.budget_ms,
        verbose=True,
    )
    print(report.summary())
    ok = report.candidates >= 1 and len(report.reported_ids) >= 2
    print("demo: " + ("PASS" if ok else "FAIL"))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowpatch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="start the composed system from a config file")
    p_run.add_argument("config")
    p_run.set_defaults(fn=_cmd_run)

    p_wl = sub.add_parser("workload", help="send a deterministic workload")
    p_wl.add_argument("--seed", type=int, default=7)
    p_wl.add_argument("--n", type=int, default=400)
    p_wl.add_argument("--fail-fraction", type=float, default=0.05)
    p_wl.add_argument("--target", default="http://127.0.0.1:8080")
    p_wl.add_argument("--dry-run", action="store_true", help="print requests instead of sending")
    p_wl.set_defaults(fn=_cmd_workload)

    p_demo = sub.add_parser("demo", help="run the end-to-end repair scenario")
    p_demo.add_argument("--dir", help="working directory (default: temp dir)")
    p_demo.add_argument("--seed", type=int, default=7)
    p_demo.add_argument("--n", type=int, default=400)
    p_demo.add_argument("--fail-fraction", type=float, default=0.05)
    p_demo.add_argument("--budget-ms", type=float, default=5000)
    p_demo.set_defaults(fn=_cmd_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
