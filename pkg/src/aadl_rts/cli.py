"""Command line: validate, run, check, eval and the example gallery.

Exit status is 0 on success, 1 when a check is violated or a run faults,
and 2 on usage, parse or validation errors.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .checker import SuiteError, check_suite, load_suite
from .director import ConfigError, Director, RunAborted, load_scenario
from .expr import EvalError, ExprSyntaxError
from .model import ModelError, load_model
from .rts import InitializationError
from .temporal import (TRACE_FORMAT, TRACE_VERSION, HorizonError, Trace,
                       TraceFormatError, eval as trace_eval)
from .values import Time, to_json

GALLERY = ("ab_deferred", "pacemaker", "pipeline")
GALLERY_HORIZON = {"ab_deferred": 60_000_000, "pacemaker": 10_000_000_000,
                   "pipeline": 200_000_000}


def gallery_file(name: str, suffix: str) -> Path:
    if name not in GALLERY:
        raise ConfigError(f"no gallery example {name!r}; have {', '.join(GALLERY)}")
    return Path(str(resources.files("aadl_rts").joinpath("gallery", name + suffix)))


def _resolve(ref: str, suffix: str) -> Path:
    """``gallery:<name>`` names a shipped example file."""
    if ref.startswith("gallery:"):
        return gallery_file(ref[len("gallery:"):], suffix)
    return Path(ref)


def _seed(text):
    v = int(text, 0)
    if not -2**63 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _positive(text):
    v = int(text, 0)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aadl-rts", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version",
                    version=f"aadl-rts {__version__} (trace format {TRACE_FORMAT} v{TRACE_VERSION})")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and check a model")
    p.add_argument("model")

    p = sub.add_parser("run", help="simulate a model to the horizon and write its trace")
    p.add_argument("--model", required=True, help="model JSON, or gallery:<name>")
    p.add_argument("--scenario", help="JSON Lines injections, or gallery:<name>")
    p.add_argument("--horizon-ns", type=_positive, required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--trace", required=True)
    p.add_argument("--no-timed", action="store_true", help="reject Timed dispatch")

    p = sub.add_parser("check", help="evaluate a property suite over a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--props", required=True,
                   help="suite JSON, builtin:<rules|director|timeouts|all> or gallery:<name>")
    p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = sub.add_parser("eval", help="evaluate an expression at one world of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--expr", required=True)
    p.add_argument("--at-ns", type=int, required=True)
    p.add_argument("--micro", type=int, default=0)

    p = sub.add_parser("gallery", help="list or copy the shipped examples")
    p.add_argument("name", nargs="?", choices=GALLERY)
    p.add_argument("--out", help="directory to copy the example files into")
    return ap


def _err(msg):
    print(f"aadl-rts: {msg}", file=sys.stderr)


def cmd_validate(args):
    m = load_model(args.model)
    print(f"{args.model}: ok ({len(m.threads)} threads, {len(m.connections)} connections)")
    return 0


def cmd_run(args):
    model = load_model(_resolve(args.model, ".json"))
    scenario, digest = (), None
    if args.scenario:
        scenario, digest = load_scenario(_resolve(args.scenario, ".scenario.jsonl"), model)
    with open(args.trace, "w", encoding="utf-8", newline="\n") as sink:
        d = Director(model, scenario=scenario, seed=args.seed, horizon_ns=args.horizon_ns,
                     timed_enabled=not args.no_timed, sink=sink, scenario_hash=digest)
        try:
            d.run()
        except (RunAborted, InitializationError) as e:
            _err(f"run aborted: {e}")
            return 1
    for f in d.faults:
        _err(str(f))
    print(f"trace written to {args.trace} ({len(d.trace.entries)} entries, sealed at "
          f"{tuple(d.trace.seal)})")
    return 1 if d.faults else 0


def cmd_check(args):
    trace = Trace.load(args.trace)
    props = args.props
    suite = load_suite(str(_resolve(props, ".props.json")) if props.startswith("gallery:") else props)
    report = check_suite(trace, suite)
    if args.json:
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        print(report.format_text())
    return 0 if report.passed else 1


def cmd_eval(args):
    trace = Trace.load(args.trace)
    v = trace_eval(trace, args.expr, Time(args.at_ns, args.micro))
    print(json.dumps(to_json(v)))
    return 0


def cmd_gallery(args):
    if args.name is None:
        for n in GALLERY:
            print(f"{n}  (horizon {GALLERY_HORIZON[n]} ns)")
        return 0
    if args.out is None:
        for suffix in (".json", ".scenario.jsonl", ".props.json"):
            print(gallery_file(args.name, suffix))
        return 0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for suffix in (".json", ".scenario.jsonl", ".props.json"):
        shutil.copy(gallery_file(args.name, suffix), out / (args.name + suffix))
    print(f"copied {args.name} to {out}")
    return 0


COMMANDS = {"validate": cmd_validate, "run": cmd_run, "check": cmd_check,
            "eval": cmd_eval, "gallery": cmd_gallery}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ModelError as e:
        _err(f"invalid model: {e}")
    except (ConfigError, SuiteError, TraceFormatError, ExprSyntaxError, EvalError,
            HorizonError) as e:
        _err(str(e))
    except OSError as e:
        _err(f"{e.filename or ''}: {e.strerror or e}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
