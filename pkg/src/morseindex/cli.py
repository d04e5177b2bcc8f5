"""Command-line driver.

Exit status: 0 verified, 1 usage error, 2 endpoint conjugate (indices
undefined), 3 numerical failure or a failed check.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import conjugate as conj
from . import presets
from .core import load_system, validate
from .errors import EndpointConjugateError, MorseIndexError, NumericalFailure, RejectedInputError
from .specflow import axiom_suite
from .verify import (EXIT_ENDPOINT, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, RunConfig, dumps,
                     emit_trace, random_suite, spectral_report, verify)

log = logging.getLogger("morseindex")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _nonneg_float(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="morseindex", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def system_args(sp):
        g = sp.add_mutually_exclusive_group(required=True)
        g.add_argument("--system", type=Path, help="system JSON file")
        g.add_argument("--preset", help=f"built-in system name[:params] ({', '.join(presets.PRESETS)})")

    def common(sp):
        sp.add_argument("--ode-steps", type=_positive(int), default=2000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=Path, help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    def contour(sp):
        sp.add_argument("--contour-height", type=_positive(float), default=0.25)

    def galerkin(sp):
        sp.add_argument("--galerkin-N", type=_positive(int), default=64, dest="galerkin_N")
        sp.add_argument("--delta", type=_nonneg_float, default=0.0)
        sp.add_argument("--method", choices=("inertia", "crossing", "both"), default="both")

    sp = sub.add_parser("verify", help="compute both indices and all diagnostics")
    system_args(sp), common(sp), contour(sp), galerkin(sp)
    sp.add_argument("--trace-dir", type=Path, help="write contour/scan/inertia CSVs and report.json")
    sp.add_argument("--axioms", action="store_true", help="also run the finite-dimensional axiom suite")

    sp = sub.add_parser("conjugate-index", help="winding of det b_z and the real conjugate instants")
    system_args(sp), common(sp), contour(sp)
    sp.add_argument("--emit-trace", type=Path, help="write the winding trace CSV here")

    sp = sub.add_parser("spectral-index", help="Galerkin inertia and/or crossing-form spectral flow")
    system_args(sp), common(sp), galerkin(sp)

    sp = sub.add_parser("random-suite", help="verify seeded random trig-polynomial systems")
    common(sp), contour(sp), galerkin(sp)
    sp.add_argument("--count", type=int, default=50)
    sp.add_argument("--max-n", type=int, default=4)
    sp.add_argument("--perturb", type=float, help="also verify S + eps I and compare indices")
    sp.add_argument("--workers", type=_positive(int), default=1)

    sp = sub.add_parser("axioms", help="uniqueness axioms of spectral flow on random matrix paths")
    common(sp)
    sp.add_argument("--count", type=_positive(int), default=20)

    sp = sub.add_parser("emit-presets", help="write every built-in preset as a system JSON file")
    sp.add_argument("--out", type=Path, required=True, help="output directory")
    return p


def _load(args):
    if args.system is not None:
        system = load_system(args.system)
    else:
        system = presets.preset(args.preset)
    checked = validate(system)
    for d in checked.defects:
        log.warning("%s", d)
    return checked.system


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], obj


def _render(obj, fmt, table=None) -> str:
    if fmt == "json":
        return dumps(obj)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if table:
        keys = sorted({k for row in table for k, _ in _flatten(row)})
        w.writerow(keys)
        for row in table:
            flat = dict(_flatten(row))
            w.writerow([flat.get(k, "") for k in keys])
    else:
        w.writerow(["key", "value"])
        for k, v in _flatten(obj):
            w.writerow([k, v])
    return buf.getvalue()


def _write(args, text):
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)


def _config(args, **extra) -> RunConfig:
    return RunConfig(
        contour_height=getattr(args, "contour_height", 0.25),
        ode_steps=args.ode_steps,
        galerkin_N=getattr(args, "galerkin_N", 64),
        delta=getattr(args, "delta", 0.0),
        method=getattr(args, "method", "both"),
        seed=args.seed,
        **extra,
    )


def _cmd_verify(args):
    report = verify(_load(args), _config(args, axioms=args.axioms))
    if args.trace_dir is not None:
        emit_trace(report, args.trace_dir)
    _write(args, _render(report.to_json(), args.format))
    return report.exit_code


def _cmd_conjugate(args):
    system = _load(args)
    report = conj.conjugate_index(system, args.contour_height, args.ode_steps)
    if args.emit_trace is not None:
        report.trace.write_csv(args.emit_trace)
    out = {"system_digest": system.digest(), "seed": args.seed, **report.to_json()}
    _write(args, _render(out, args.format))
    return EXIT_OK


def _cmd_spectral(args):
    system = _load(args)
    cfg = _config(args)
    rep = spectral_report(system, cfg)
    out = {"system_digest": system.digest(), "seed": args.seed, **rep.to_json()}
    _write(args, _render(out, args.format))
    both = rep.mu_spec_inertia is not None and rep.mu_spec_crossing is not None
    return EXIT_NUMERICAL if both and rep.mu_spec_inertia != rep.mu_spec_crossing else EXIT_OK


def _cmd_random(args):
    cfg = replace(_config(args), clutching_check=False, offaxis_samples=50, symplectic_samples=5)
    try:
        summary = random_suite(args.count, args.max_n, args.seed, cfg, perturb=args.perturb,
                               workers=args.workers)
    except ValueError as exc:
        raise RejectedInputError(str(exc)) from None
    _write(args, _render(summary, args.format, table=summary["cases"] if args.format == "csv" else None))
    ok = summary["theorem_fail"] == 0 and all(c["status"] == "verified" for c in summary["cases"])
    return EXIT_OK if ok else EXIT_NUMERICAL


def _cmd_axioms(args):
    res = axiom_suite(args.count, args.seed)
    _write(args, _render({"seed": args.seed, "count": args.count, "axioms": res}, args.format))
    return EXIT_OK if all(v["pass"] for v in res.values()) else EXIT_NUMERICAL


def _cmd_presets(args):
    args.out.mkdir(parents=True, exist_ok=True)
    for name in presets.PRESETS:
        system = presets.preset(name)
        (args.out / f"{name}.json").write_text(dumps(system.to_json()))
    return EXIT_OK


_COMMANDS = {
    "verify": _cmd_verify,
    "conjugate-index": _cmd_conjugate,
    "spectral-index": _cmd_spectral,
    "random-suite": _cmd_random,
    "axioms": _cmd_axioms,
    "emit-presets": _cmd_presets,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (RejectedInputError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"morseindex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EndpointConjugateError as exc:
        print(f"morseindex: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except (NumericalFailure, MorseIndexError) as exc:
        print(f"morseindex: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"morseindex: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
