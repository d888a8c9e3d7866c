"""Command line entry points: serve, replay, oracle."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from classdeck import checks, service
from classdeck.config import load_config
from classdeck.errors import EngineError


def _cmd_serve(args) -> int:
    service.serve(args.config, args.addr, speed=args.speed, tcp_port=args.tcp_port)
    return 0


def _cmd_replay(args) -> int:
    config = load_config(args.config)
    script = service.read_script(args.script) if args.script else []
    replayer = service.run_replay(config, speed=args.speed, script=script)
    replayer.run()
    engine = replayer.engine
    print(f"replayed {replayer.delivered} utterances, {len(engine.envelopes)} envelopes")
    problems = engine.verify_integrity()
    if problems:
        for p in problems:
            print(f"integrity: {p}", file=sys.stderr)
        return 1
    if args.export:
        try:
            exported = engine.export_deck()
        except EngineError as exc:
            print(f"no export written: {exc}", file=sys.stderr)
            return 0
        out = Path(args.export)
        out.write_text(exported["text"], encoding="utf-8")
        sidecar = out.with_suffix(out.suffix + ".provenance.json")
        sidecar.write_text(json.dumps(exported["provenance"], indent=2), encoding="utf-8")
        print(f"exported deck to {out} (+ {sidecar.name})")
    if args.persist:
        service.persist_session(engine, args.persist)
        print(f"persisted session log to {args.persist}")
    return 0


def _cmd_oracle(args) -> int:
    names = list(checks.ALL_CHECKS) if args.check == "all" else [args.check]
    failed = 0
    for name in names:
        result = checks.ALL_CHECKS[name]()
        status = "PASS" if result.passed else "FAIL"
        print(f"[{status}] {result.name}: {result.details} ({result.elapsed_s:.1f}s)")
        failed += 0 if result.passed else 1
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="classdeck")
    sub = parser.add_subparsers(dest="command", required=True)

    serve_p = sub.add_parser("serve", help="serve a session over the wire protocol")
    serve_p.add_argument("--config", required=True)
    serve_p.add_argument("--addr", default="127.0.0.1:8765")
    serve_p.add_argument("--speed", type=float, default=1.0)
    serve_p.add_argument("--tcp-port", type=int, default=None,
                         help="also serve newline-delimited JSON over TCP")
    serve_p.set_defaults(func=_cmd_serve)

    replay_p = sub.add_parser("replay", help="replay a recorded session headlessly")
    replay_p.add_argument("--config", required=True)
    replay_p.add_argument("--speed", type=float, default=1.0,
                          help="wall-clock multiplier; 0 runs unpaced")
    replay_p.add_argument("--script", default=None,
                          help="JSONL command script delivered at timestamps")
    replay_p.add_argument("--export", default=None, help="write the final deck here")
    replay_p.add_argument("--persist", default=None, help="write the session input log here")
    replay_p.set_defaults(func=_cmd_replay)

    oracle_p = sub.add_parser("oracle", help="run a brute-force verification check")
    oracle_p.add_argument("check", choices=["all", *checks.ALL_CHECKS])
    oracle_p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
