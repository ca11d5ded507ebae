"""Command-line entry point: ``su21bq <command> [options]``.

Exit codes: 0 certified (or success), 1 refuted, 2 inconclusive, 64 malformed
input, 65 matrices outside SU(2,1), 70 internal error.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .certifier import DEFAULT_BUDGET, certify, enumerate_omega
from .charvar import CharacterPoint, InconsistentCharacterError, character_of
from .dynamics import deltoid_csv, nielsen_move, propagate_ball, sharkfin_csv
from .farey import fibonacci, region_word
from .su21_core import (
    MEMBERSHIP_TOL,
    InvalidInputError,
    NotSU21Error,
    classify,
    require_su21,
    resultant_f,
    su21_inverse,
)

EXIT_OK = 0
EXIT_USAGE = 64
EXIT_NOT_SU21 = 65
EXIT_INTERNAL = 70
ENV_PREFIX = "SU21BQ_"


@dataclass
class InputDocument:
    generators: tuple[np.ndarray, np.ndarray] | None
    character: CharacterPoint
    options: dict
    raw: dict


def _complex(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v):
        return complex(v[0], v[1])
    raise InvalidInputError(f"not a number or [re, im] pair: {v!r}")


def _matrix(rows) -> np.ndarray:
    if not isinstance(rows, list) or len(rows) != 3 or any(not isinstance(r, list) or len(r) != 3 for r in rows):
        raise InvalidInputError("matrices must be 3 x 3 nested lists")
    return np.array([[_complex(v) for v in r] for r in rows], dtype=np.complex128)


def parse_input(text: str, tol: float = MEMBERSHIP_TOL) -> InputDocument:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidInputError("input must be a JSON object")
    has_gen, has_char = "generators" in doc, "character" in doc
    if has_gen == has_char:
        raise InvalidInputError("give exactly one of 'generators' and 'character'")
    options = doc.get("options", {})
    if not isinstance(options, dict):
        raise InvalidInputError("'options' must be an object")
    if has_gen:
        g = doc["generators"]
        if not isinstance(g, dict) or set(g) != {"A", "B"}:
            raise InvalidInputError("'generators' needs exactly the keys A and B")
        A = require_su21(_matrix(g["A"]), tol)
        B = require_su21(_matrix(g["B"]), tol)
        return InputDocument((A, B), character_of(A, B), options, doc)
    ch = doc["character"]
    if not isinstance(ch, dict) or not {"x", "y", "z", "t"} <= set(ch):
        raise InvalidInputError("'character' needs x, y, z, t")
    try:
        vals = [_complex(ch[k]) for k in "xyzt"]
        c = _complex(ch["c"]) if "c" in ch else None
        point = CharacterPoint.from_traces(*vals, c=c)
    except InconsistentCharacterError as exc:
        raise InvalidInputError(str(exc)) from exc
    return InputDocument(None, point, options, doc)


def _env(name: str, cast, default):
    raw = os.environ.get(ENV_PREFIX + name)
    return default if raw is None else cast(raw)


def _flag(text: str) -> bool:
    return text.strip().lower() not in ("", "0", "false", "no")


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", default=_env("INPUT", str, "-"), help="input JSON file, '-' for stdin")
    common.add_argument("--K", type=_positive_float, default=_env("K", float, None), help="trace bound (default M(c))")
    common.add_argument("--budget", type=_positive_int, default=_env("BUDGET", int, DEFAULT_BUDGET))
    common.add_argument("--tol", type=_positive_float, default=_env("TOL", float, MEMBERSHIP_TOL),
                        help="SU(2,1) membership tolerance")
    common.add_argument("--threads", type=_positive_int, default=_env("THREADS", int, 1))
    common.add_argument("--dot", default=_env("DOT", str, None), help="write a DOT graph here")
    common.add_argument("--cache-dir", default=_env("CACHE_DIR", str, None))
    common.add_argument("--no-cache", action="store_true", default=_env("NO_CACHE", _flag, False))
    common.add_argument("--seed", type=int, default=_env("SEED", int, 0))

    p = _Parser(prog="su21bq", description="Bowditch checks for SU(2,1) characters of the free group F2.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("classify", parents=[common], help="classify both generators and their commutator")
    sub.add_parser("certify", parents=[common], help="Bowditch verdict as JSON")
    en = sub.add_parser("enumerate", parents=[common], help="region table as CSV")
    en.add_argument("--depth", type=int, default=None, help="ball of regions of generation <= depth")
    orb = sub.add_parser("orbit", parents=[common], help="apply Nielsen moves S, I, R")
    orb.add_argument("moves", nargs="?", default="")
    fig = sub.add_parser("emit-figures", parents=[common], help="CSV data for the deltoid or the shark fin")
    fig.add_argument("which", choices=["deltoid", "sharkfin"])
    fig.add_argument("--samples", type=_positive_int, default=360)
    fig.add_argument("--P", type=float, default=6.0)
    fig.add_argument("--r-min", type=_positive_float, default=0.5)
    fig.add_argument("--r-max", type=_positive_float, default=2.0)
    fig.add_argument("--nr", type=_positive_int, default=61)
    fig.add_argument("--ns", type=_positive_int, default=121)
    return p


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc


def _element(A) -> dict:
    cls = classify(A)
    return {
        "kind": cls.kind.value,
        "trace": [cls.trace.real, cls.trace.imag],
        "f": cls.f_value,
        "eigenvalues": [[e.real, e.imag] for e in cls.eigenvalues],
    }


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def cmd_classify(doc: InputDocument, args) -> tuple[str, int]:
    if doc.generators is None:
        raise InvalidInputError("classify needs generators")
    A, B = doc.generators
    comm = A @ B @ su21_inverse(A) @ su21_inverse(B)
    report = {
        "A": _element(A),
        "B": _element(B),
        "commutator": _element(comm),
        "character": doc.character.to_json(),
    }
    return _dumps(report), EXIT_OK


def cmd_certify(doc: InputDocument, args) -> tuple[str, int]:
    v = certify(doc.character, args.K, args.budget, args.threads)
    if args.dot and v.attractor is not None:
        Path(args.dot).write_text(v.attractor.to_dot())
    return v.dumps() + "\n", v.exit_code


def _csv(rows, header) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(str(c) if isinstance(c, (int, str)) else repr(float(c)) for c in row) + "\n")
    return buf.getvalue()


def cmd_enumerate(doc: InputDocument, args) -> tuple[str, int]:
    if args.depth is not None:
        if args.depth < 0:
            raise InvalidInputError("depth must be non-negative")
        regions = propagate_ball(doc.character, args.depth)
        if args.K is not None:
            regions = {s: tr for s, tr in regions.items() if abs(tr) <= args.K}
    else:
        rs = enumerate_omega(doc.character, K=args.K, budget=args.budget)
        if not rs.exhausted:
            print(f"su21bq: search truncated after {rs.stats.visited} regions", file=sys.stderr)
        regions = rs.members
    rows = []
    for s in sorted(regions, key=lambda s: (fibonacci(s), s)):
        tr = regions[s]
        rows.append((s[0], s[1], region_word(s), fibonacci(s), tr.real, tr.imag, abs(tr), resultant_f(tr)))
    if args.dot:
        from .farey import add, adjacent, ball_to_dot, triangle

        tris = {triangle(u, v, w) for u in regions for v in regions if u < v and adjacent(u, v)
                for w in (add(u, v, 1), add(u, v, -1)) if w in regions}
        Path(args.dot).write_text(ball_to_dot(sorted(tris, key=sorted)))
    return _csv(rows, ["p", "q", "word", "weight", "trace_re", "trace_im", "abs_trace", "f"]), EXIT_OK


def cmd_orbit(doc: InputDocument, args) -> tuple[str, int]:
    bad = set(args.moves) - set("SIR")
    if bad:
        raise InvalidInputError(f"moves must be over S, I, R; got {''.join(sorted(bad))}")
    point = doc.character
    lines = [json.dumps({"move": None, "character": point.to_json()}, sort_keys=True)]
    for mv in args.moves:
        point = nielsen_move(point, mv)
        lines.append(json.dumps({"move": mv, "character": point.to_json()}, sort_keys=True))
    return "\n".join(lines) + "\n", EXIT_OK


def cmd_emit_figures(args) -> tuple[str, int]:
    if args.which == "deltoid":
        return deltoid_csv(args.samples), EXIT_OK
    if args.r_min >= args.r_max:
        raise InvalidInputError("need r-min < r-max")
    r = np.linspace(args.r_min, args.r_max, args.nr)
    s = np.linspace(0.0, 2 * np.pi, args.ns)
    return sharkfin_csv(args.P, r, s), EXIT_OK


COMMANDS = {"classify": cmd_classify, "certify": cmd_certify, "enumerate": cmd_enumerate, "orbit": cmd_orbit}
CACHED = {"certify", "enumerate"}


def input_hash(command: str, text: str, args) -> str:
    try:
        canon = json.dumps(json.loads(text), sort_keys=True, separators=(",", ":"))
    except json.JSONDecodeError:
        canon = text
    opts = {k: getattr(args, k, None) for k in ("K", "budget", "tol", "depth", "moves")}
    blob = json.dumps([command, canon, opts, __version__], sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _cache_path(args, key: str) -> Path | None:
    if args.no_cache or not args.cache_dir or args.dot:
        return None
    return Path(args.cache_dir) / f"{key}.json"


def run(argv: list[str] | None = None) -> tuple[str, int]:
    args = build_parser().parse_args(argv)
    if args.command == "emit-figures":
        return cmd_emit_figures(args)
    text = _read(args.input)
    key = input_hash(args.command, text, args)
    cache = _cache_path(args, key) if args.command in CACHED else None
    if cache is not None and cache.exists():
        rec = json.loads(cache.read_text())
        return rec["output"], rec["exit_code"]
    doc = parse_input(text, args.tol)
    out, code = COMMANDS[args.command](doc, args)
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        record = {
            "input_hash": key,
            "command": args.command,
            "output": out,
            "exit_code": code,
            "version": __version__,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
        cache.write_text(json.dumps(record, sort_keys=True))
    return out, code


def main(argv: list[str] | None = None) -> int:
    try:
        out, code = run(argv)
    except InvalidInputError as exc:
        print(f"su21bq: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotSU21Error as exc:
        print(f"su21bq: {exc}", file=sys.stderr)
        return EXIT_NOT_SU21
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - the exit code contract covers anything unexpected
        print(f"su21bq: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    sys.stdout.write(out)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
