"""Recursive-descent parser for ``.recasm`` programs.

Grammar (EBNF)::

    program  = { decl } ;
    decl     = "shared" NAME "/" INT
             | "observe" NAME
             | "agent" NAME "runs" NAME
             | [ "main" ] "rule" NAME "(" [ NAME { "," NAME } ] ")" [ "->" NAME ] block ;
    block    = "{" { rule } "}" ;                       (* several rules: parallel *)
    rule     = "skip" | block
             | "par" block
             | "choose" "{" rule { "|" rule } "}"
             | "if" term "then" rule [ "else" rule ]    (* else: sugar for if-not *)
             | "let" NAME "=" term "in" rule
             | "forall" NAME "in" domain "do" rule
             | "call" [ term "<-" ] NAME "(" [ terms ] ")"
             | "as" "caller" block
             | term ":=" term ;
    domain   = "range" "(" term "," term ")" | "relevant_indices" "(" NAME ")" | term ;
    term     = disj ;  disj = conj { "or" conj } ;  conj = neg { "and" neg } ;
    neg      = "not" neg | cmp ;
    cmp      = sum [ ("=" | "!=" | "<" | "<=" | ">" | ">=") sum ] ;
    sum      = prod { ("+" | "-") prod } ;
    prod     = unary { ("*" | "div" | "mod") unary } ;
    unary    = "-" unary | atom ;
    atom     = INT | "true" | "false" | "undef" | "#" NAME | "active" | "waiting"
             | "[" [ terms ] "]" | NAME [ "(" [ terms ] ")" ] | "(" term ")" ;

Keywords are case-insensitive; ``//`` starts a line comment.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .syntax import (
    AmbCaller,
    App,
    Assign,
    Call,
    Choose,
    Const,
    Forall,
    If,
    Let,
    ListLit,
    Op,
    Par,
    Program,
    Range,
    RegPred,
    Relevant,
    RuleDecl,
    SKIP,
    Span,
    Var,
    domain_terms,
    rule_terms,
    sub_rules,
    walk_rules,
    walk_terms,
)
from .values import BACKGROUND, INFIX, UNDEF, Sym

KEYWORDS = {
    "rule", "main", "shared", "observe", "agent", "runs", "if", "then", "else",
    "par", "choose", "let", "in", "forall", "do", "call", "as", "caller", "skip",
    "true", "false", "undef", "and", "or", "not", "div", "mod", "range",
    "relevant_indices", "active", "waiting",
}
RESERVED_SYMBOLS = {"terminated"}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>//[^\n]*)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|<-|->|!=|<=|>=|[(){}\[\],|=<>+\-*/\#])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # int | name | kw | op | eof
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class ParseError:
    line: int
    col: int
    message: str

    def format(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.message}"


class ParseErrorList(Exception):
    """One or more syntax or static errors."""

    def __init__(self, errors: list[ParseError]):
        self.errors = errors
        super().__init__("; ".join(e.format() for e in errors))

    def format(self, filename: str = "<input>") -> str:
        return "\n".join(e.format(filename) for e in self.errors)


class _Fail(Exception):
    def __init__(self, err: ParseError):
        self.err = err


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise _Fail(ParseError(line, col, f"unexpected character {src[pos]!r}"))
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        elif kind not in ("ws", "comment"):
            if kind == "name" and text.lower() in KEYWORDS:
                toks.append(Token("kw", text.lower(), line, col))
            else:
                toks.append(Token(kind, text, line, col))
            col += len(text)
        else:
            col += len(text)
        pos = m.end()
    toks.append(Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0
        self.bound: list[str] = []

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, msg: str, tok: Token | None = None):
        t = tok or self.tok
        raise _Fail(ParseError(t.line, t.col, msg))

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def at_kw(self, *words: str) -> bool:
        return self.tok.kind == "kw" and self.tok.text in words

    def at_op(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def take(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect_op(self, op: str) -> Token:
        if not self.at_op(op):
            self.fail(f"expected {op!r}, found {self.tok.text or 'end of input'!r}")
        return self.take()

    def expect_kw(self, kw: str) -> Token:
        if not self.at_kw(kw):
            self.fail(f"expected {kw!r}, found {self.tok.text or 'end of input'!r}")
        return self.take()

    def expect_name(self) -> Token:
        if not self.at("name"):
            self.fail(f"expected a name, found {self.tok.text or 'end of input'!r}")
        return self.take()

    # -- declarations
    def program(self):
        rules: dict[str, RuleDecl] = {}
        main: list[tuple[str, Token]] = []
        shared: dict[str, int] = {}
        observe: list[str] = []
        agents: list[tuple[str, str]] = []
        agent_toks: list[Token] = []
        errors: list[ParseError] = []
        while not self.at("eof"):
            if self.at_kw("shared"):
                self.take()
                name = self.expect_name().text
                self.expect_op("/")
                if not self.at("int"):
                    self.fail("expected an arity")
                shared[name] = int(self.take().text)
            elif self.at_kw("observe"):
                self.take()
                observe.append(self.expect_name().text)
            elif self.at_kw("agent"):
                t = self.take()
                name = self.expect_name().text
                self.expect_kw("runs")
                agents.append((name, self.expect_name().text))
                agent_toks.append(t)
            elif self.at_kw("main", "rule"):
                is_main = self.at_kw("main")
                if is_main:
                    self.take()
                tok = self.expect_kw("rule")
                decl = self.rule_decl(tok)
                if decl.name in rules:
                    errors.append(ParseError(tok.line, tok.col, f"rule {decl.name} declared twice"))
                rules[decl.name] = decl
                if is_main:
                    main.append((decl.name, tok))
            else:
                self.fail(f"expected a declaration, found {self.tok.text!r}")
        if len(main) > 1:
            t = main[1][1]
            errors.append(ParseError(t.line, t.col, "more than one main rule"))
        if not main and not agents:
            errors.append(ParseError(self.tok.line, self.tok.col, "missing main rule"))
        for (aname, rname), t in zip(agents, agent_toks):
            if rname not in rules:
                errors.append(ParseError(t.line, t.col, f"agent {aname} runs undeclared rule {rname}"))
        return rules, (main[0][0] if main else None), shared, tuple(observe), tuple(agents), errors

    def rule_decl(self, tok: Token) -> RuleDecl:
        name = self.expect_name().text
        self.expect_op("(")
        params: list[str] = []
        if not self.at_op(")"):
            params.append(self.expect_name().text)
            while self.at_op(","):
                self.take()
                params.append(self.expect_name().text)
        self.expect_op(")")
        output = None
        if self.at_op("->"):
            self.take()
            output = self.expect_name().text
        body = self.block()
        return RuleDecl(name, tuple(params), output, body, Span(tok.line, tok.col))

    # -- rules
    def block(self):
        self.expect_op("{")
        rules = []
        while not self.at_op("}"):
            if self.at("eof"):
                self.fail("unterminated block")
            rules.append(self.rule())
        self.take()
        return rules[0] if len(rules) == 1 else Par(tuple(rules))

    def rule(self):
        t = self.tok
        if self.at_kw("skip"):
            self.take()
            return SKIP
        if self.at_op("{"):
            return self.block()
        if self.at_kw("par"):
            self.take()
            body = self.block()
            return body if isinstance(body, Par) else Par((body,))
        if self.at_kw("choose"):
            self.take()
            self.expect_op("{")
            alts = [self.rule()]
            while self.at_op("|"):
                self.take()
                alts.append(self.rule())
            self.expect_op("}")
            return Choose(tuple(alts))
        if self.at_kw("if"):
            self.take()
            cond = self.term()
            self.expect_kw("then")
            then = self.rule()
            if self.at_kw("else"):
                self.take()
                other = self.rule()
                return Par((If(cond, then), If(Op("not", (cond,)), other)))
            return If(cond, then)
        if self.at_kw("let"):
            self.take()
            var = self.expect_name().text
            self.expect_op("=")
            term = self.term()
            self.expect_kw("in")
            self.bound.append(var)
            body = self.rule()
            self.bound.pop()
            return Let(var, term, body)
        if self.at_kw("forall"):
            self.take()
            var = self.expect_name().text
            self.expect_kw("in")
            dom = self.domain()
            self.expect_kw("do")
            self.bound.append(var)
            body = self.rule()
            self.bound.pop()
            return Forall(var, dom, body)
        if self.at_kw("call"):
            self.take()
            output = None
            # lookahead: NAME "(" ... ")" without "<-" is an output-less call
            save = self.i
            if not self._plain_call_ahead():
                out = self.term()
                if not isinstance(out, App):
                    self.fail("call output must be a location term", t)
                self.expect_op("<-")
                output = out
            else:
                self.i = save
            name = self.expect_name().text
            self.expect_op("(")
            args = self.terms_until(")")
            return Call(output, name, tuple(args), Span(t.line, t.col))
        if self.at_kw("as"):
            self.take()
            self.expect_kw("caller")
            return AmbCaller(self.block())
        target = self.term()
        if not self.at_op(":="):
            self.fail(f"expected ':=' after term, found {self.tok.text or 'end of input'!r}")
        self.take()
        value = self.term()
        if not isinstance(target, App):
            self.fail("assignment target must be a signature symbol application", t)
        return Assign(target, value)

    def _plain_call_ahead(self) -> bool:
        """True if the tokens ahead are ``NAME ( ... )`` not followed by ``<-``."""
        j = self.i
        if self.toks[j].kind != "name" or self.toks[j + 1].text != "(":
            return False
        depth = 0
        while self.toks[j].kind != "eof":
            tx = self.toks[j].text if self.toks[j].kind == "op" else None
            if tx in ("(", "["):
                depth += 1
            elif tx in (")", "]"):
                depth -= 1
                if depth == 0:
                    return not (self.toks[j + 1].kind == "op" and self.toks[j + 1].text == "<-")
            j += 1
        return False

    def domain(self):
        if self.at_kw("range"):
            self.take()
            self.expect_op("(")
            lo = self.term()
            self.expect_op(",")
            hi = self.term()
            self.expect_op(")")
            return Range(lo, hi)
        if self.at_kw("relevant_indices"):
            self.take()
            self.expect_op("(")
            name = self.expect_name().text
            self.expect_op(")")
            return Relevant(name)
        t = self.tok
        d = self.term()
        if not isinstance(d, (ListLit, Op, App, Var)):
            self.fail("forall domain must be a finite list term, range(..) or relevant_indices(..)", t)
        return d

    # -- terms
    def terms_until(self, close: str) -> list:
        out = []
        if not self.at_op(close):
            out.append(self.term())
            while self.at_op(","):
                self.take()
                out.append(self.term())
        self.expect_op(close)
        return out

    def term(self):
        left = self.conj()
        while self.at_kw("or"):
            self.take()
            left = Op("or", (left, self.conj()))
        return left

    def conj(self):
        left = self.neg()
        while self.at_kw("and"):
            self.take()
            left = Op("and", (left, self.neg()))
        return left

    def neg(self):
        if self.at_kw("not"):
            self.take()
            return Op("not", (self.neg(),))
        return self.cmp()

    def cmp(self):
        left = self.sum()
        if self.at_op("=", "!=", "<", "<=", ">", ">="):
            op = INFIX[self.take().text]
            left = Op(op, (left, self.sum()))
        return left

    def sum(self):
        left = self.prod()
        while self.at_op("+", "-"):
            op = INFIX[self.take().text]
            left = Op(op, (left, self.prod()))
        return left

    def prod(self):
        left = self.unary()
        while self.at_op("*") or self.at_kw("div", "mod"):
            op = INFIX[self.take().text]
            left = Op(op, (left, self.unary()))
        return left

    def unary(self):
        if self.at_op("-"):
            self.take()
            inner = self.unary()
            if isinstance(inner, Const) and type(inner.value) is int:
                return Const(-inner.value)
            return Op("minus", (Const(0), inner))
        return self.atom()

    def atom(self):
        t = self.tok
        if self.at("int"):
            self.take()
            return Const(int(t.text))
        if self.at_kw("true", "false"):
            self.take()
            return Const(t.text == "true")
        if self.at_kw("undef"):
            self.take()
            return Const(UNDEF)
        if self.at_kw("active", "waiting"):
            self.take()
            return RegPred(t.text)
        if self.at_op("#"):
            self.take()
            return Const(Sym(self.expect_name().text))
        if self.at_op("["):
            self.take()
            return ListLit(tuple(self.terms_until("]")))
        if self.at_op("("):
            self.take()
            inner = self.term()
            self.expect_op(")")
            return inner
        if self.at("name"):
            self.take()
            name = t.text
            if self.at_op("("):
                self.take()
                args = tuple(self.terms_until(")"))
                if name in BACKGROUND:
                    if len(args) != BACKGROUND[name][0]:
                        self.fail(f"{name} expects {BACKGROUND[name][0]} arguments", t)
                    return Op(name, args)
                return App(name, args)
            if name in self.bound:
                return Var(name)
            if name in BACKGROUND:
                self.fail(f"background operation {name} needs arguments", t)
            return App(name, ())
        self.fail(f"expected a term, found {t.text or 'end of input'!r}")


# --- static checks ---------------------------------------------------------


def _head(t) -> Optional[str]:
    if isinstance(t, App):
        return t.symbol
    if isinstance(t, Var):
        return t.name
    return None


def check_program(rules, main, shared, observe, agents) -> tuple[dict[str, int], list[ParseError]]:
    """Static invariants; returns the program-wide arity table and errors."""
    errors: list[ParseError] = []
    arities: dict[str, int] = dict(shared)

    def err(decl: RuleDecl, msg: str, span: Span | None = None):
        s = span or decl.span or Span(0, 0)
        errors.append(ParseError(s.line, s.col, f"rule {decl.name}: {msg}"))

    def note_arity(decl, sym, n):
        if sym in BACKGROUND:
            err(decl, f"{sym} is a background operation and cannot be a location")
            return
        if sym in arities and arities[sym] != n:
            err(decl, f"arity mismatch for {sym}: used with {n} and {arities[sym]} arguments")
        else:
            arities.setdefault(sym, n)

    for decl in rules.values():
        if len(set(decl.params)) != len(decl.params):
            err(decl, "duplicate parameter")
        if decl.output in decl.params:
            err(decl, "output symbol is also an input")
        for p in decl.params:
            note_arity(decl, p, 0)
        if decl.output:
            note_arity(decl, decl.output, 0)
        inputs = set(decl.params)

        def visit(r, in_forall: bool):
            for t in rule_terms(r):
                for s in walk_terms(t):
                    if isinstance(s, App):
                        note_arity(decl, s.symbol, len(s.args))
            if isinstance(r, Forall) and isinstance(r.domain, Relevant):
                if r.domain.symbol in BACKGROUND:
                    err(decl, f"relevant_indices needs a signature symbol, not {r.domain.symbol}")
            if isinstance(r, Assign):
                sym = r.target.symbol
                if sym in inputs:
                    err(decl, f"assigns to its input symbol {sym}; inputs are read-only")
            if isinstance(r, Call):
                if r.rule not in rules:
                    err(decl, f"call of undeclared rule {r.rule}", r.span)
                elif len(r.args) != len(rules[r.rule].params):
                    err(
                        decl,
                        f"call of {r.rule} with {len(r.args)} arguments, expected "
                        f"{len(rules[r.rule].params)}",
                        r.span,
                    )
                if r.output is not None:
                    oh = _head(r.output)
                    if oh in inputs:
                        err(decl, f"call output {oh} is an input symbol", r.span)
                    for a in r.args:
                        if _head(a) == oh:
                            err(decl, f"call output symbol {oh} also heads an argument", r.span)
                if in_forall:
                    err(decl, "call inside forall would make call-tree branching unbounded", r.span)
            for s in sub_rules(r):
                visit(s, in_forall or isinstance(r, Forall))

        visit(decl.body, False)
    for sym in list(arities):
        if sym in RESERVED_SYMBOLS and arities[sym] != 0:
            errors.append(ParseError(0, 0, f"{sym} is reserved and 0-ary"))
    for o in observe:
        if o not in arities:
            errors.append(ParseError(0, 0, f"observed symbol {o} does not occur in the program"))
    return arities, errors


def parse(source: str) -> Program:
    """Parse and statically check a program; raises :class:`ParseErrorList`."""
    try:
        p = _Parser(source)
        rules, main, shared, observe, agents, errors = p.program()
    except _Fail as f:
        raise ParseErrorList([f.err]) from None
    arities, more = check_program(rules, main, shared, observe, agents)
    errors.extend(more)
    if errors:
        raise ParseErrorList(errors)
    return Program(rules, main, shared, observe, agents, arities)


def parse_file(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def build_program(rules, main=None, shared=None, observe=(), agents=()) -> Program:
    """Assemble a program from AST pieces, running the same static checks."""
    rules = dict(rules)
    shared = dict(shared or {})
    arities, errors = check_program(rules, main, shared, tuple(observe), tuple(agents))
    if main is None and not agents:
        errors.append(ParseError(0, 0, "missing main rule"))
    if errors:
        raise ParseErrorList(errors)
    return Program(rules, main, shared, tuple(observe), tuple(agents), arities)
