"""Command-line client for the session service.

All work happens behind the HTTP API: with --server the commands talk to a
running service, otherwise they spin up the app in-process and use it the
same way. Exit codes: 0 success, 2 task timeout, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

import httpx

from .controller import ControllerGains
from .haptics import HapticConfig
from .link import CHANNEL_PROFILES

EXIT_OK = 0
EXIT_TIMEOUT = 2
EXIT_CONFIG = 3


class CliParser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; 2 means timeout here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> CliParser:
    p = CliParser(prog="teleosim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scripted scenario")
    run.add_argument("--scenario", required=True)
    run.add_argument("--variant", required=True, choices=["basic", "fg", "fc", "fgc"])
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--channel", default="inperson", choices=sorted(CHANNEL_PROFILES))
    run.add_argument("--config", help="JSON file with gains/haptics/channel overrides")
    run.add_argument("--log", help="write the session log (JSON lines) here")
    run.add_argument("--server", help="base URL of a running service")

    rep = sub.add_parser("replay", help="re-simulate a recorded log and verify")
    rep.add_argument("--log", required=True)
    rep.add_argument("--server")

    rpt = sub.add_parser("report", help="aggregate logs per variant")
    rpt.add_argument("logs", nargs="+")
    rpt.add_argument("--csv", help="also write the CSV here")
    rpt.add_argument("--server")

    srv = sub.add_parser("serve", help="host the live session service")
    srv.add_argument("--bind", default="127.0.0.1:8000")
    srv.add_argument("--scenario", default="place")
    srv.add_argument("--variant", default="fgc", choices=["basic", "fg", "fc", "fgc"])
    srv.add_argument("--channel", default="inperson", choices=sorted(CHANNEL_PROFILES))
    srv.add_argument("--seed", type=int, default=0)
    srv.add_argument("--time-scale", type=float, default=1.0)
    srv.add_argument("--config")
    srv.add_argument("--frontend", help="directory of built UI assets to serve at /")

    return p


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"bad config file: {exc}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _settings_from_config(args, doc: dict, live: bool = False):
    from .service.live import ServiceSettings

    try:
        return ServiceSettings(
            scenario=getattr(args, "scenario", "place"),
            variant=getattr(args, "variant", "fgc"),
            channel=getattr(args, "channel", "inperson"),
            seed=getattr(args, "seed", 0),
            time_scale=getattr(args, "time_scale", 1.0),
            live_enabled=live,
            frontend_dir=getattr(args, "frontend", None),
            gains=ControllerGains.from_json(doc.get("gains", {})),
            haptics=HapticConfig.from_json(doc.get("haptics", {})),
        )
    except ValueError as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _client(args, config_doc: dict) -> httpx.Client:
    if getattr(args, "server", None):
        return httpx.Client(base_url=args.server, timeout=120.0)
    from fastapi.testclient import TestClient

    from .service.app import create_app

    app = create_app(_settings_from_config(args, config_doc))
    return TestClient(app)


def _fail_on_error(resp: httpx.Response) -> None:
    if resp.status_code >= 400:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        print(f"error: {detail}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def cmd_run(args) -> int:
    doc = _load_config(args.config)
    body = {
        "scenario": args.scenario,
        "variant": args.variant,
        "seed": args.seed,
        "channel": args.channel,
        "include_log": bool(args.log),
    }
    if "channel" in doc:
        body["channel_config"] = doc["channel"]
    with _client(args, doc) as client:
        resp = client.post("/api/runs", json=body)
        _fail_on_error(resp)
        payload = resp.json()
    m = payload["metrics"]
    took = "-" if m["completion_time"] is None else f"{m['completion_time']:.2f}s"
    print(
        f"{m['scenario']} [{m['variant']}] seed={m['seed']}: {m['status']}"
        f" time={took} estops={m['estop_count']} peak={m['peak_force']:.2f}N"
    )
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write(payload["log"])
        print(f"log written to {args.log}")
    return EXIT_OK if m["status"] == "success" else EXIT_TIMEOUT


def cmd_replay(args) -> int:
    try:
        with open(args.log, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"cannot read log: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    with _client(args, {}) as client:
        resp = client.post("/api/replay", json={"log": text})
        _fail_on_error(resp)
        payload = resp.json()
    if payload["match"]:
        print("replay matches the recorded log")
        return EXIT_OK
    print(f"replay DIVERGED at line {payload['first_divergence']}")
    return EXIT_TIMEOUT


def cmd_report(args) -> int:
    texts = []
    for path in args.logs:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                texts.append(fh.read())
        except OSError as exc:
            print(f"cannot read log: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    with _client(args, {}) as client:
        resp = client.post("/api/report", json={"logs": texts})
        _fail_on_error(resp)
        payload = resp.json()
    print(payload["table"])
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(payload["csv"])
        print(f"csv written to {args.csv}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    host, _, port = args.bind.rpartition(":")
    if not host or not port.isdigit():
        print(f"bad --bind {args.bind!r}; expected host:port", file=sys.stderr)
        return EXIT_CONFIG
    doc = _load_config(args.config)
    try:
        from .scenarios import get_scenario

        get_scenario(args.scenario)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    app = create_app(_settings_from_config(args, doc, live=True))
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "run": cmd_run,
        "replay": cmd_replay,
        "report": cmd_report,
        "serve": cmd_serve,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
