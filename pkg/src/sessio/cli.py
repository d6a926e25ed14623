"""Command-line front end: check, equiv, dual, run, lts."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from . import fidelity as fd
from . import semantics as sm
from .bisim import DEFAULT_BUDGET, DEFAULT_SEQ_DEPTH, Bisimilar, NotBisimilar, bisimilar
from .parser import ParseError, parse_program, parse_type
from .syntax import Program
from .typecheck import PLAIN, QUOTIENT, Options, check_program
from .types import TypeLanguageError, dual, is_endpoint, show_type

EXIT_OK, EXIT_NO, EXIT_INPUT, EXIT_IO, EXIT_UNKNOWN, EXIT_RUNTIME = 0, 1, 2, 3, 4, 5


class _Out:
    def __init__(self, fmt: str):
        self.machine = fmt == "machine"
        self.color = (not self.machine and os.environ.get("SESSIO_COLOR", "1") != "0"
                      and sys.stdout.isatty())

    def paint(self, text: str, good: bool) -> str:
        if not self.color:
            return text
        return f"\x1b[{32 if good else 31}m{text}\x1b[0m"

    def human(self, text: str) -> None:
        if not self.machine:
            print(text)

    def result(self, text: str, good: bool, **fields) -> None:
        if self.machine:
            print(json.dumps({"result": text, **fields}, sort_keys=True))
        else:
            print(self.paint(text, good))


def _positive(s: str) -> int:
    n = int(s)
    if n <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return n


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=(PLAIN, QUOTIENT), default=PLAIN)
    p.add_argument("--un-self-loop", action="store_true",
                   help="un inputs and outputs keep their type after use")
    p.add_argument("--bisim-budget", type=_positive, default=DEFAULT_BUDGET)
    p.add_argument("--seq-depth", type=_positive, default=DEFAULT_SEQ_DEPTH)
    p.add_argument("--format", choices=("human", "machine"), default="human")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sessio", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("check", help="typecheck a program")
    p.add_argument("file")
    _common(p)

    p = sub.add_parser("equiv", help="decide type bisimilarity")
    p.add_argument("type1")
    p.add_argument("type2")
    p.add_argument("--defs", help="program file whose typealias declarations are in scope")
    _common(p)

    p = sub.add_parser("dual", help="print the dual of an endpoint type")
    p.add_argument("type")
    p.add_argument("--defs", help="program file whose typealias declarations are in scope")
    p.add_argument("--format", choices=("human", "machine"), default="human")

    for name, helptext in (("run", "execute main with a seeded scheduler"),
                           ("lts", "print the one-step transitions of main")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("file")
        p.add_argument("--repl-budget", type=_positive, default=sm.DEFAULT_REPL_BUDGET)
        _common(p)
        if name == "run":
            p.add_argument("--steps", type=_positive, default=100)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--fidelity", action="store_true",
                           help="re-typecheck the residual after every step")
    return ap


class _InputError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def _load(path: str) -> Program:
    try:
        with open(path, encoding="utf-8") as fh:
            src = fh.read()
    except OSError as e:
        raise _InputError(f"{path}: {e.strerror}", EXIT_IO)
    try:
        return parse_program(src)
    except ParseError as e:
        raise _InputError(f"{path}:{e}", EXIT_INPUT)


def _type(text: str, defs: Optional[str]):
    aliases = _load(defs).aliases if defs else None
    try:
        t = parse_type(text, aliases=aliases)
    except ParseError as e:
        raise _InputError(f"type {text!r}: {e}", EXIT_INPUT)
    if not is_endpoint(t):
        raise _InputError(f"{text!r} is not an endpoint type", EXIT_INPUT)
    return t


def _options(a) -> Options:
    return Options(mode=a.mode, self_loop=a.un_self_loop, bisim_budget=a.bisim_budget,
                   seq_depth=a.seq_depth)


def cmd_check(a, out: _Out) -> int:
    prog = _load(a.file)
    v = check_program(prog, options=_options(a))
    out.result(v.render(a.file), v.accepted, cmd="check", file=a.file, mode=a.mode)
    return EXIT_OK if v.accepted else EXIT_NO


def cmd_equiv(a, out: _Out) -> int:
    t1, t2 = _type(a.type1, a.defs), _type(a.type2, a.defs)
    try:
        r = bisimilar(t1, t2, a.bisim_budget, a.seq_depth, a.un_self_loop)
    except TypeLanguageError as e:
        raise _InputError(str(e), EXIT_INPUT)
    if isinstance(r, Bisimilar):
        code = EXIT_OK
    elif isinstance(r, NotBisimilar):
        code = EXIT_NO
        out.human(f"clause: {r.clause}")
    else:
        code = EXIT_UNKNOWN
    out.result(str(r), code == EXIT_OK, cmd="equiv")
    return code


def cmd_dual(a, out: _Out) -> int:
    t = _type(a.type, a.defs)
    out.result(show_type(dual(t)), True, cmd="dual")
    return EXIT_OK


def cmd_lts(a, out: _Out) -> int:
    prog = _load(a.file)
    try:
        c = sm.load(prog, a.repl_budget)
        steps = sm.transitions(c)
    except sm.RuntimeFailure as e:
        out.result(str(e.fault), False, cmd="lts")
        return EXIT_RUNTIME
    out.human(c.show())
    for act, c2 in steps:
        out.human(f"  --{act}--> {c2.show()}")
    out.result(f"{len(steps)} transition(s)", True, cmd="lts",
               transitions=[{"action": str(act), "target": c2.show()} for act, c2 in steps])
    return EXIT_OK


def cmd_run(a, out: _Out) -> int:
    prog = _load(a.file)
    if a.fidelity:
        return _run_fidelity(a, prog, out)
    try:
        c = sm.load(prog, a.repl_budget)
    except sm.RuntimeFailure as e:
        out.result(f"outcome: {e.fault}", False, cmd="run", steps=0)
        return EXIT_RUNTIME
    res = sm.run(c, a.steps, a.seed)
    lines = sm.format_trace(res)
    for line in lines:
        out.human(line)
    ok = res.ok
    out.result(f"outcome: {res.outcome}", ok, cmd="run", steps=len(res.trace), trace=lines)
    return EXIT_OK if ok else EXIT_RUNTIME


def _run_fidelity(a, prog: Program, out: _Out) -> int:
    def on_step(k, info, pair, failure):
        if pair is not None:
            out.human(f"{k} TAU {info} :: {info.chan} : ({show_type(pair.left)}, {show_type(pair.right)}) balanced")
        else:
            out.human(f"{k} TAU {info} :: context unchanged")

    try:
        rep = fd.subject_reduction_check(prog, a.steps, a.seed, a.mode, a.un_self_loop,
                                         repl_budget=a.repl_budget, on_step=on_step)
    except fd.PreconditionFailed as e:
        out.result(e.verdict.render(a.file), False, cmd="run")
        return EXIT_NO
    if not rep.ok:
        out.human(rep.detail)
    out.result(rep.line(), rep.ok, cmd="run", outcome=rep.outcome)
    if rep.ok:
        return EXIT_OK
    return EXIT_NO if rep.kind in ("advance", "balance", "retype") else EXIT_RUNTIME


COMMANDS = {"check": cmd_check, "equiv": cmd_equiv, "dual": cmd_dual, "run": cmd_run, "lts": cmd_lts}


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    out = _Out(a.format)
    try:
        return COMMANDS[a.cmd](a, out)
    except _InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
