"""Command line entry point: ``folverify run`` and ``folverify checks --list``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config

log = logging.getLogger("folverify")

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _parser():
    ap = argparse.ArgumentParser(prog="folverify", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="build the local model and run the verification checks")
    run.add_argument("--config", metavar="PATH", help="INI file with [model] [grids] [flows] [run] sections")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config key (section.key or a unique key name); repeatable")
    run.add_argument("--out", metavar="DIR", default="folverify-out", help="output directory")
    run.add_argument("--format", choices=("json", "text", "csv"), default="json")
    run.add_argument("-q", "--quiet", action="store_true")
    chk = sub.add_parser("checks", help="inspect the check registry")
    chk.add_argument("--list", action="store_true", help="print check ids and what they verify")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
                        format="%(message)s")
    # imported late so that `checks --list` and config errors stay quick
    from . import verifier

    if args.command == "checks":
        for cid, c in verifier.REGISTRY.items():
            print(f"{cid:36s} {c.anchor}")
        return EXIT_OK

    try:
        cfg = load_config(args.config, args.overrides)
        cfg.selected(verifier.REGISTRY)
    except ConfigError as exc:
        print(f"folverify: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    from .report import emit_report

    def progress(rec):
        log.info("%-13s %-36s %s", rec.status.upper(), rec.id,
                 "" if rec.margin is None else f"margin={rec.margin:.3e}")

    report = verifier.run_verify(cfg, progress=progress)
    try:
        paths = emit_report(report, args.out, args.format)
    except OSError as exc:
        print(f"folverify: {exc}", file=sys.stderr)
        return EXIT_ERROR
    s = report.summary
    log.info("%d pass, %d fail, %d informational, %d skipped -> %s", s["pass"], s["fail"], s["informational"],
             s["skipped"], paths[0].parent if paths else args.out)
    if report.build_failed:
        return EXIT_ERROR
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
