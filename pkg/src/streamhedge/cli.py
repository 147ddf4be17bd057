"""Command-line entry point.

Subcommands:

* ``simulate`` -- run a preset or config end to end; writes stream.jsonl,
  report.txt and regret.csv into the output directory.
* ``detect``   -- stream detection over stdin or a file of JSONL lines,
  one record out per line in, errors reported inline without stopping.
* ``verify``   -- the reduced-scale invariant battery; nonzero exit on
  any failure.
* ``serve``    -- run a live detection session behind the HTTP service.
* ``show-config`` -- print a preset's config file text.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, PRESET_NAMES, load_config, preset_config, preset_text
from .pipeline import DetectSession, simulate
from .records import record_to_json

__all__ = ["main"]


def _resolve_config(args):
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset_config(args.preset)
    else:
        raise ConfigError("one of --config or --preset is required")
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    if getattr(args, "mode", None) is not None:
        cfg.mode = args.mode
    cfg.validate()
    return cfg


def _write_report(path: Path, report: dict) -> None:
    lines = []
    lines.append(f"mode              : {report['mode']}")
    lines.append(f"steps (T)         : {report['T']}")
    lines.append(f"dimension         : {report['dim']}")
    lines.append(f"seed              : {report['seed']}")
    if "total_errors" in report:
        lines.append(f"total errors      : {report['total_errors']}")
        lines.append(f"false alarms      : {report['false_alarms']}")
        lines.append(f"detection misses  : {report['detection_misses']}")
        lines.append(f"feedback queries  : {report['query_count']}")
        lines.append(f"best static tau   : {report['static_tau']:.6g}")
        lines.append(f"static tau errors : {report['static_total_errors']}")
    lines.append(f"K (max ||h||/2)   : {report['K']:.6g}")
    lines.append(f"M (max ||mu||/2)  : {report['M']:.6g}")
    lines.append(f"H (curvature)     : {report['H']:.6g}")
    lines.append(f"Dmax (KL diam)    : {report['Dmax']:.6g}")
    lines.append(f"bound violations  : {report['bound_violations']}")
    path.write_text("\n".join(lines) + "\n")


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    result = simulate(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "stream.jsonl", "w") as fh:
        for rec in result.records:
            fh.write(record_to_json(rec))
            fh.write("\n")
    _write_report(out / "report.txt", result.report)
    with open(out / "regret.csv", "w") as fh:
        fh.write("t,regret,bound\n")
        ledger = result.ledger
        for i in range(len(ledger.regret)):
            fh.write(f"{i + 1},{float(ledger.regret[i])!r},{float(ledger.bound[i])!r}\n")
    print(f"wrote {out}/stream.jsonl, report.txt, regret.csv")
    if "total_errors" in result.report:
        print(
            f"total errors {result.report['total_errors']} "
            f"(static threshold {result.report['static_total_errors']}); "
            f"bound violations {result.report['bound_violations']}"
        )
    return 0


def cmd_detect(args) -> int:
    cfg = _resolve_config(args)
    session = DetectSession(cfg)
    in_stream = open(args.input) if args.input else sys.stdin
    out_stream = sys.stdout
    lineno = 0
    try:
        for line in in_stream:
            lineno += 1
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
                z = np.asarray(data["z"], dtype=np.float64)
                y = data.get("y")
                if y is not None:
                    y = int(y)
                    if y not in (-1, 1):
                        raise ValueError("y must be -1 or +1")
                rec = session.step(z, y_feedback=y)
            except Exception as exc:  # malformed line: report, keep going
                out_stream.write(
                    json.dumps({"line": lineno, "error": str(exc)}) + "\n"
                )
                out_stream.flush()
                continue
            out_stream.write(record_to_json(rec) + "\n")
            out_stream.flush()
    finally:
        if args.input:
            in_stream.close()
    return 0


def cmd_verify(args) -> int:
    from .verify import run_battery

    failures = run_battery()
    if failures:
        print(f"{failures} check(s) FAILED")
        return 1
    print("all checks passed")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    cfg = _resolve_config(args)
    host, _, port = args.serve.partition(":")
    serve(cfg, host or "127.0.0.1", int(port or "8750"))
    return 0


def cmd_show_config(args) -> int:
    sys.stdout.write(preset_text(args.preset))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamhedge",
        description="Streaming anomaly detection: belief filtering plus a "
        "feedback-hedged threshold.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_out=True):
        p.add_argument("--config", help="path to a run config file")
        p.add_argument("--preset", choices=PRESET_NAMES, help="built-in experiment")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument(
            "--mode",
            choices=("full", "label", "arbitrary", "service"),
            help="override the feedback mode",
        )
        if with_out:
            p.add_argument("--out", help="output directory")

    p_sim = sub.add_parser("simulate", help="run a full experiment")
    add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_det = sub.add_parser("detect", help="stream detection over JSONL input")
    add_common(p_det, with_out=False)
    p_det.add_argument("--input", help="input path (default: stdin)")
    p_det.set_defaults(func=cmd_detect)

    p_ver = sub.add_parser("verify", help="run the invariant battery")
    p_ver.set_defaults(func=cmd_verify)

    p_srv = sub.add_parser("serve", help="serve a live detection session")
    add_common(p_srv, with_out=False)
    p_srv.add_argument(
        "--serve", default="127.0.0.1:8750", metavar="ADDR", help="host:port"
    )
    p_srv.set_defaults(func=cmd_serve)

    p_show = sub.add_parser("show-config", help="print a preset config file")
    p_show.add_argument("--preset", choices=PRESET_NAMES, required=True)
    p_show.set_defaults(func=cmd_show_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
