"""Command line entry point.

    ehresmann run <config> [--seed N] [--tol T] [--steps S] [--format text|structured] [--out PATH]
    ehresmann check <config>

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 usage or parse
error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import sys

from ehresmann.config import (
    BUNDLED,
    ConfigError,
    canonical_json,
    parse_config_text,
    build_setup,
    resolve_config,
    run_config,
    text_report,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ehresmann", description="Connection, curvature and transport checks "
                                              "driven by a TOML config.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="execute the task list of a config")
    run.add_argument("config", help=f"path to a TOML file or a bundled name ({', '.join(BUNDLED)})")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--tol", type=float, help="override every verdict tolerance")
    run.add_argument("--steps", type=int, help="override integration steps")
    run.add_argument("--format", choices=("text", "structured"), default="text")
    run.add_argument("--out", help="write the report here instead of stdout")
    chk = sub.add_parser("check", help="validate a config without running it")
    chk.add_argument("config")
    return p


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        label, text = resolve_config(args.config)
        cfg = parse_config_text(text)
        if args.command == "check":
            build_setup(cfg)
            print(f"{label}: ok ({len(cfg.get('task', {}))} tasks)")
            return 0
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed", "seed must be non-negative")
        if args.steps is not None and args.steps < 2:
            raise ConfigError("--steps", "steps must be >= 2")
        report = run_config(cfg, seed=args.seed, tol=args.tol, steps=args.steps)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.format == "structured":
        _emit(canonical_json(report.as_tree()), args.out)
    else:
        _emit(text_report(report, label), args.out)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
