"""Hand-written recursive-descent parser for ``.apc`` programs and types.

A program is a sequence of declarations, in this order::

    base Tree
    func Tree : Int * Tree * Tree -> Tree
    eq fst(Tree(v, l, r)) = v
    typealias T = rec z . +{Leaf: lin skip, Node: lin !Int ; z ; z}
    agent S[K](t : Tree, c : T ; K, w : lin !(K)) = ...
    main = ...
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from . import syntax as sx
from . import types as ty


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Tok:
    kind: str  # "id", "int", "sym", "eof"
    text: str
    line: int
    col: int


KEYWORDS = {
    "base", "func", "eq", "typealias", "agent", "main", "new", "newvar", "in",
    "repl", "if", "then", "else", "lin", "un", "skip", "rec", "dual",
}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<int>-?\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym><\+|->|[!?<>(){}\[\],:.|=/;&+*])
""", re.VERBOSE)


def tokenize(src: str) -> list[Tok]:
    toks: list[Tok] = []
    line, col, i = 1, 1, 0
    while i < len(src):
        m = _TOKEN.match(src, i)
        if m is None:
            raise ParseError(f"unexpected character {src[i]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                toks.append(Tok(kind, text, line, col))
            col += len(text)
        i = m.end()
    toks.append(Tok("eof", "", line, col))
    return toks


class Parser:
    def __init__(self, src: str, lenient: bool = False):
        self.toks = tokenize(src)
        self.i = 0
        self.lenient = lenient
        self.bases: list[str] = list(sx.BUILTIN_BASES)
        self.declared_bases: list[str] = []
        self.funcs: dict[str, sx.FuncSig] = {}
        self.aliases: dict[str, ty.PayloadType] = {}
        self.calls: list[tuple[sx.Call, Tok]] = []
        self.tparams: frozenset[str] = frozenset()

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[Tok] = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "id") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            got = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, got {got!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> Tok:
        t = self.tok
        if t.kind != "id" or t.text in KEYWORDS:
            raise self.error(f"expected {what}, got {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def label(self) -> str:
        t = self.ident("label")
        if not t.text[0].isupper():
            raise self.error(f"labels are capitalised, got {t.text!r}", t)
        return t.text

    def expect_eof(self) -> None:
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")

    # -- types --------------------------------------------------------------

    def type_(self, recvars: frozenset[str] = frozenset()) -> ty.PayloadType:
        left = self.type_unit(recvars)
        if self.accept(";"):
            right = self.type_(recvars)
            self._need_endpoint(left)
            self._need_endpoint(right)
            return ty.Seq(left, right)
        return left

    def _need_endpoint(self, t) -> None:
        if not ty.is_endpoint(t):
            raise self.error(f"expected an endpoint type, got {ty.show_type(t)}")

    def endpoint(self, recvars: frozenset[str] = frozenset()) -> ty.EndpointType:
        t = self.type_(recvars)
        self._need_endpoint(t)
        return t

    def type_unit(self, recvars: frozenset[str]) -> ty.PayloadType:
        t = self.tok
        if self.accept("rec"):
            z = self.ident("recursion variable").text
            self.expect(".")
            return ty.Rec(z, self.endpoint(recvars | {z}))
        if self.accept("dual"):
            inner = self.type_unit(recvars)
            self._need_endpoint(inner)
            return ty.dual(inner)
        if self.accept("("):
            first = self.type_(recvars)
            if self.accept(","):
                second = self.endpoint(recvars)
                self.expect(")")
                self._need_endpoint(first)
                return ty.Session(first, second)
            self.expect(")")
            return first
        if t.text in ("lin", "un"):
            self.i += 1
            return ty.Qualified(ty.Qualifier(t.text), self.pretype(recvars))
        if t.text in ("skip", "?", "!", "&", "+"):
            return ty.Qualified(ty.LIN, self.pretype(recvars))
        if t.kind == "id" and t.text not in KEYWORDS:
            self.i += 1
            return self.resolve_type_name(t, recvars, payload=False)
        raise self.error(f"expected a type, got {t.text or 'end of input'!r}")

    def resolve_type_name(self, t: Tok, recvars, payload: bool) -> ty.PayloadType:
        name = t.text
        if name in recvars:
            if payload:
                raise self.error(f"recursion variable {name!r} cannot be a payload", t)
            return ty.TypeVar(name)
        if name in self.tparams:
            return ty.Param(name)
        if name in self.aliases:
            return self.aliases[name]
        if name in self.bases:
            return ty.Base(name)
        if self.lenient:
            return ty.Base(name) if payload else ty.TypeVar(name)
        raise self.error(f"unknown type {name!r}", t)

    def pretype(self, recvars) -> ty.Pretype:
        if self.accept("skip"):
            return ty.Skip()
        if self.accept("?"):
            return ty.In(self.payload(recvars))
        if self.accept("!"):
            return ty.Out(self.payload(recvars))
        if self.accept("&"):
            return ty.Branch(self.type_arms(recvars))
        if self.accept("+"):
            return ty.Select(self.type_arms(recvars))
        raise self.error(f"expected skip, ?, !, & or +, got {self.tok.text!r}")

    def payload(self, recvars) -> ty.PayloadType:
        t = self.tok
        if t.kind == "id" and t.text not in KEYWORDS:
            self.i += 1
            p = self.resolve_type_name(t, recvars, payload=True)
        elif self.at("("):
            p = self.type_unit(recvars)
        else:
            raise self.error("expected a payload type (a base name or a parenthesised type)")
        if ty.free_type_vars(p):
            raise self.error("recursion variables cannot occur in payloads", t)
        return p

    def type_arms(self, recvars) -> tuple[tuple[str, ty.EndpointType], ...]:
        self.expect("{")
        arms: list[tuple[str, ty.EndpointType]] = []
        seen: set[str] = set()
        while True:
            lt = self.tok
            lab = self.label()
            if lab in seen:
                raise self.error(f"duplicate label {lab!r}", lt)
            seen.add(lab)
            self.expect(":")
            arms.append((lab, self.endpoint(recvars)))
            if not self.accept(","):
                break
        self.expect("}")
        return tuple(arms)

    # -- terms --------------------------------------------------------------

    def term(self, scope: frozenset[str]) -> sx.Term:
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "int":
            self.i += 1
            return sx.App(t.text, (), pos)
        name = self.ident("term").text
        if name in self.funcs or sx.literal_type(name):
            args: tuple[sx.Term, ...] = ()
            if self.accept("("):
                lst = [self.term(scope)]
                while self.accept(","):
                    lst.append(self.term(scope))
                self.expect(")")
                args = tuple(lst)
            sig = self.funcs.get(name)
            arity = len(sig.args) if sig else 0
            if len(args) != arity:
                raise ParseError(f"{name} expects {arity} argument(s), got {len(args)}", *pos)
            return sx.App(name, args, pos)
        if name in scope:
            return sx.Var(name, pos)
        return sx.Name(name, pos)

    def chan(self, scope) -> sx.Term:
        m = self.term(scope)
        if not sx.is_sendable(m):
            raise ParseError("channel must be a name, variable or constant", *m.pos)
        return m

    # -- processes ----------------------------------------------------------

    def ext(self, scope: frozenset[str]) -> sx.Extended:
        t = self.tok
        left = self.ext_atom(scope)
        while self.accept("|"):
            right = self.ext_atom(scope)
            left = sx.APar(left, right, (t.line, t.col))
        return left

    def ext_atom(self, scope) -> sx.Extended:
        t = self.tok
        pos = (t.line, t.col)
        if self.accept("("):
            inner = self.ext(scope)
            self.expect(")")
            return inner
        if self.accept("newvar"):
            x = self.ident("variable").text
            self.expect(":")
            ann = self.type_()
            self.expect("in")
            return sx.ANuVar(x, ann, self.ext_atom(scope | {x}), pos)
        if self.at("{"):
            self.i += 1
            m = self.term(scope)
            self.expect("/")
            xt = self.ident("variable")
            self.expect("}")
            return sx.ActiveSubst(xt.text, m, pos)
        if self.accept("new"):
            n = self.ident("name").text
            self.expect(":")
            ann = self.session_ann()
            self.expect("in")
            return sx.ANuName(n, ann, self.ext_atom(scope - {n}), pos)
        return sx.Plain(self.proc_atom(scope), pos)

    def session_ann(self) -> ty.Session:
        t = self.tok
        s = self.type_unit(frozenset())
        if not isinstance(s, ty.Session):
            raise self.error("restriction needs a session annotation (T1, T2)", t)
        return s

    def proc(self, scope) -> sx.Process:
        t = self.tok
        a = sx.lower(self.ext(scope))
        if not isinstance(a, sx.Plain):
            raise self.error("extended process not allowed here", t)
        return a.proc

    def proc_atom(self, scope) -> sx.Process:
        t = self.tok
        pos = (t.line, t.col)
        if t.kind == "int" and t.text == "0":
            self.i += 1
            return sx.Nil(pos)
        if self.at("(") or self.at("new") or self.at("newvar") or self.at("{"):
            a = sx.lower(self.ext_atom(scope))
            if not isinstance(a, sx.Plain):
                raise self.error("extended process not allowed here", t)
            return a.proc
        if self.accept("repl"):
            return sx.Repl(self.proc_atom(scope), pos)
        if self.accept("if"):
            m1 = self.term(scope)
            self.expect("=")
            m2 = self.term(scope)
            self.expect("then")
            p1 = self.proc_atom(scope)
            self.expect("else")
            return sx.If(m1, m2, p1, self.proc_atom(scope), pos)
        if t.kind == "id" and self.peek().text in ("[", "(") and t.text not in self.funcs:
            return self.call(scope)
        c = self.chan(scope)
        if self.accept("!"):
            self.expect("<")
            m = self.term(scope)
            self.expect(">")
            self.expect(".")
            return sx.Output(c, m, self.proc_atom(scope), pos)
        if self.accept("?"):
            self.expect("(")
            x = self.ident("variable").text
            self.expect(")")
            self.expect(".")
            return sx.Input(c, x, self.proc_atom(scope | {x}), pos)
        if self.accept("<+"):
            lab = self.label()
            self.expect(".")
            return sx.Select(c, lab, self.proc_atom(scope), pos)
        if self.accept(">"):
            self.expect("{")
            arms: list[tuple[str, sx.Process]] = []
            seen: set[str] = set()
            while True:
                lt = self.tok
                lab = self.label()
                if lab in seen:
                    raise self.error(f"duplicate label {lab!r}", lt)
                seen.add(lab)
                self.expect(":")
                arms.append((lab, self.proc(scope)))
                if not self.accept(","):
                    break
            self.expect("}")
            return sx.Branch(c, tuple(arms), pos)
        raise self.error(f"expected a process action after {sx.show_term(c)!r}")

    def call(self, scope) -> sx.Call:
        t = self.ident("agent name")
        targs: list[ty.EndpointType] = []
        if self.accept("["):
            targs.append(self.endpoint())
            while self.accept(","):
                targs.append(self.endpoint())
            self.expect("]")
        self.expect("(")
        args: list[sx.Term] = []
        if not self.at(")"):
            args.append(self.term(scope))
            while self.accept(","):
                args.append(self.term(scope))
        self.expect(")")
        c = sx.Call(t.text, tuple(targs), tuple(args), (t.line, t.col))
        self.calls.append((c, t))
        return c

    # -- declarations -------------------------------------------------------

    def params(self) -> tuple[tuple[str, ty.PayloadType], ...]:
        out: list[tuple[str, ty.PayloadType]] = []
        self.expect("(")
        seen: set[str] = set()
        if not self.at(")"):
            while True:
                xt = self.ident("parameter")
                if xt.text in seen:
                    raise self.error(f"duplicate parameter {xt.text!r}", xt)
                seen.add(xt.text)
                self.expect(":")
                out.append((xt.text, self.type_()))
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(out)

    def base_name(self) -> str:
        t = self.ident("base type")
        if t.text not in self.bases:
            raise self.error(f"unknown base type {t.text!r}", t)
        return t.text

    def program(self) -> sx.Program:
        order = ["base", "func", "typealias", "agent", "main"]
        stage = 0
        equations: list[sx.Equation] = []
        agents_src: list[tuple[Tok, tuple[str, ...], int]] = []
        main = None
        main_params: tuple = ()
        while self.tok.kind != "eof":
            t = self.tok
            kw = "func" if t.text == "eq" else t.text
            if kw not in order:
                raise self.error(f"expected a declaration, got {t.text!r}")
            k = order.index(kw)
            if k < stage:
                raise self.error(f"{t.text!r} declarations must come before {order[stage]!r}")
            stage = k
            self.i += 1
            if t.text == "base":
                n = self.ident("base type")
                if n.text in self.bases:
                    raise self.error(f"duplicate base type {n.text!r}", n)
                self.bases.append(n.text)
                self.declared_bases.append(n.text)
            elif t.text == "func":
                f = self.ident("function symbol")
                if f.text in self.funcs:
                    raise self.error(f"duplicate function symbol {f.text!r}", f)
                self.expect(":")
                dom = [self.base_name()]
                while self.accept("*"):
                    dom.append(self.base_name())
                if self.accept("->"):
                    self.funcs[f.text] = sx.FuncSig(tuple(dom), self.base_name())
                elif len(dom) == 1:
                    self.funcs[f.text] = sx.FuncSig((), dom[0])
                else:
                    raise self.error("expected '->'")
            elif t.text == "eq":
                equations.append(self.equation())
            elif t.text == "typealias":
                n = self.ident("alias name")
                if n.text in self.aliases or n.text in self.bases:
                    raise self.error(f"duplicate type name {n.text!r}", n)
                self.expect("=")
                at = self.tok
                a = self.type_()
                if ty.free_type_vars(a):
                    raise self.error("type alias is not closed", at)
                self.aliases[n.text] = a
            elif t.text == "agent":
                ag, tok = self.agent_decl()
                if any(a.name == ag.name for a, _ in agents_src):
                    raise self.error(f"agent {ag.name!r} is defined twice", tok)
                agents_src.append((ag, tok))
            else:
                if main is not None:
                    raise self.error("duplicate main", t)
                if self.at("("):
                    main_params = self.params()
                self.expect("=")
                main = self.ext(frozenset())
        if main is None:
            raise self.error("program has no main")
        agents = {a.name: a for a in (x[0] for x in agents_src)}
        for c, t in self.calls:
            if c.agent not in agents:
                raise self.error(f"unbound agent {c.agent!r}", t)
            ag = agents[c.agent]
            if len(c.args) != len(ag.params):
                raise self.error(f"{c.agent} expects {len(ag.params)} argument(s), got {len(c.args)}", t)
            if len(c.targs) != len(ag.tparams):
                raise self.error(f"{c.agent} expects {len(ag.tparams)} type argument(s), got {len(c.targs)}", t)
        return sx.Program(
            bases=tuple(self.declared_bases),
            funcs=dict(self.funcs),
            equations=tuple(equations),
            aliases=dict(self.aliases),
            agents=agents,
            main=sx.lower(main),
            main_params=main_params,
        )

    def agent_decl(self):
        n = self.ident("agent name")
        tps: list[str] = []
        if self.accept("["):
            tps.append(self.ident("type parameter").text)
            while self.accept(","):
                tps.append(self.ident("type parameter").text)
            self.expect("]")
        self.tparams = frozenset(tps)
        params = self.params()
        self.expect("=")
        scope = frozenset(x for x, _ in params)
        body = sx.lower(self.ext(scope | _subst_targets(self.toks, self.i)))
        self.tparams = frozenset()
        return (sx.AgentDef(n.text, tuple(tps), params, body), n)

    def equation(self) -> sx.Equation:
        t = self.tok
        # pattern variables: identifiers that are not function symbols
        lhs = self.term(frozenset(self._eq_vars()))
        if not isinstance(lhs, sx.App) or not lhs.args:
            raise self.error("equation left-hand side must apply a function symbol", t)
        self.expect("=")
        _, lvars = sx.term_free(lhs)
        rhs = self.term(lvars)
        names, rvars = sx.term_free(rhs)
        if names or not rvars <= lvars:
            raise self.error("equation right-hand side uses unbound identifiers", t)
        return sx.Equation(lhs, rhs)

    def _eq_vars(self) -> set[str]:
        out = set()
        k = self.i
        while self.toks[k].kind != "eof" and not (self.toks[k].text == "=" and self.toks[k].kind == "sym"):
            tk = self.toks[k]
            if tk.kind == "id" and tk.text not in self.funcs:
                out.add(tk.text)
            k += 1
        return out


def _subst_targets(toks: list[Tok], start: int) -> frozenset[str]:
    """Variables defined by ``{M / x}`` within the declaration starting at ``start``."""
    out: set[str] = set()
    k = start
    depth = 0
    while toks[k].kind != "eof":
        t = toks[k]
        if depth == 0 and t.kind == "id" and t.text in ("agent", "main") and k > start:
            break
        if t.text == "/" and t.kind == "sym" and toks[k + 1].kind == "id" and toks[k + 2].text == "}":
            out.add(toks[k + 1].text)
        k += 1
    return frozenset(out)


def parse_program(src: str) -> sx.Program:
    p = Parser(src)
    prog = p.program()
    return prog


def parse_type(src: str, lenient: bool = True, aliases: Optional[dict] = None) -> ty.PayloadType:
    """Parse a standalone type.  Unknown payload names become base types."""
    p = Parser(src, lenient=lenient)
    if aliases:
        p.aliases.update(aliases)
    t = p.type_()
    p.expect_eof()
    return t


def parse_process(src: str, program: Optional[sx.Program] = None) -> sx.Extended:
    """Parse an extended process in the context of an (optional) program's signature."""
    p = Parser(src)
    if program is not None:
        p.funcs.update(program.funcs)
        p.aliases.update(program.aliases)
        p.bases.extend(program.bases)
    a = p.ext(_subst_targets(p.toks, 0))
    p.expect_eof()
    return sx.lower(a)
