"""Command-line entry point.

Exit codes: 0 all checks pass, 1 at least one fails, 2 config or input
error, 3 inconclusive checks only.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import __version__, catalog
from .acceptance import CHECKS, run_suite
from .pipelines import INPUT_ERRORS, PIPELINES, ConfigError, resolve_config
from .report import Report, ReportError, emit, plain

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_INCONCLUSIVE = 0, 1, 2, 3


def _common(p, config=True):
    if config:
        p.add_argument("--config", metavar="PATH", help="JSON config (may name a catalog entry)")
    p.add_argument("--out", metavar="DIR", help="directory for the report files")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--tol", type=float, help="override the check tolerance")
    p.add_argument("--h", type=float, help="override the mesh size")
    p.add_argument("--degree", type=int, help="override the polynomial degree")
    p.add_argument("--seed", type=int, default=0, help="seed for randomised checks")
    p.add_argument("--serial", action="store_true",
                   help="reproducible output: sequential reductions, no wall times in reports")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pshlab",
        description="Numerical checks for weighted Bergman kernels, plurisubharmonic "
                    "variation and potential theory.")
    p.add_argument("--version", action="version", version=f"pshlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "psh-scan": "discrete-Laplacian scan of log K_t(z, z) over a parameter grid",
        "bergman": "weighted Bergman kernel on the diagonal",
        "prekopa": "marginal convexity and the minimum principle",
        "lelong": "Lelong numbers, integrability index and attenuation",
        "green": "Green potentials, energies and energy scans",
        "robin": "Robin function, convexity scan and harmonic center",
    }
    for name, h in helps.items():
        _common(sub.add_parser(name, help=h))
    va = sub.add_parser("verify-all", help="run the acceptance suite")
    _common(va, config=False)
    va.add_argument("--suite", choices=("desk",), default="desk")
    va.add_argument("--only", nargs="+", choices=sorted(CHECKS), help="run a subset of checks")
    cat = sub.add_parser("catalog", help="list or show shipped families")
    csub = cat.add_subparsers(dest="action", required=True, metavar="action")
    csub.add_parser("list", help="list entries")
    sh = csub.add_parser("show", help="show one entry")
    sh.add_argument("name")
    return p


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON in {path}: {e}") from None
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None


def _finish(rep: Report, args, t0) -> int:
    rep.provenance.setdefault("seed", args.seed)
    rep.provenance["version"] = __version__
    if not args.serial:
        rep.provenance["wall_time_s"] = round(time.perf_counter() - t0, 3)
    for c in rep.checks:
        loc = f"  [{c.locator}]" if c.locator else ""
        print(f"{c.verdict.upper():13s} {c.id}: {c.name}{loc}")
    if args.out:
        try:
            for path in emit(rep, args.out, args.format):
                print(f"wrote {path}")
        except ReportError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG
    return rep.exit_code()


def _run_command(args) -> int:
    t0 = time.perf_counter()
    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    raw = _load_json(args.config)
    overrides = {"tol": args.tol, "h": args.h, "degree": args.degree}
    cfg = resolve_config(args.command, raw, overrides)
    try:
        rep = PIPELINES[args.command](cfg)
    except INPUT_ERRORS:
        raise
    except Exception as e:  # numerical breakdown is a failed run, not bad input
        rep = Report(args.command)
        rep.add("run", f"{args.command} pipeline", "fail", f"error: {type(e).__name__}",
                {"error": str(e)})
    rep.provenance["config"] = plain(cfg)
    return _finish(rep, args, t0)


def _verify_all(args) -> int:
    t0 = time.perf_counter()
    for k in ("tol", "h", "degree"):
        if getattr(args, k) is not None:
            raise ConfigError(f"--{k} does not apply to verify-all (tolerances are fixed per check)")

    def progress(c):
        print(f"  {c.id} {c.verdict:12s} {c.name}", flush=True)

    print(f"verify-all --suite {args.suite} --seed {args.seed}")
    rep = run_suite(args.seed, args.only, timed=not args.serial, progress=progress)
    print("\nsummary")
    return _finish(rep, args, t0)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else 0
    try:
        if args.command == "catalog":
            if args.action == "list":
                for e in catalog.entries():
                    print(f"{e.name:18s} {e.command:9s} {e.title}")
                return EXIT_PASS
            print(catalog.show(args.name))
            return EXIT_PASS
        if args.command == "verify-all":
            return _verify_all(args)
        return _run_command(args)
    except INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def run(argv=None) -> int:
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
