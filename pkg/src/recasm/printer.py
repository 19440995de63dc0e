"""Pretty printer producing re-parseable ``.recasm`` text."""
from __future__ import annotations

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
    Var,
)
from .values import INFIX_NAME, UNDEF, Sym

INDENT = "  "


def term_text(t) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        v = t.value
        if v is UNDEF:
            return "undef"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, int):
            return str(v)
        if isinstance(v, Sym):
            return f"#{v.name}"
        if isinstance(v, tuple):
            return term_text(ListLit(tuple(Const(x) for x in v)))
        raise ValueError(f"no literal syntax for {v!r}")
    if isinstance(t, RegPred):
        return t.name
    if isinstance(t, ListLit):
        return "[" + ", ".join(term_text(x) for x in t.items) + "]"
    if isinstance(t, App):
        if not t.args:
            return t.symbol
        return f"{t.symbol}(" + ", ".join(term_text(a) for a in t.args) + ")"
    if isinstance(t, Op):
        if t.name == "not":
            return f"not ({term_text(t.args[0])})"
        if t.name in INFIX_NAME and len(t.args) == 2:
            a, b = (term_text(x) for x in t.args)
            return f"({a} {INFIX_NAME[t.name]} {b})"
        return f"{t.name}(" + ", ".join(term_text(a) for a in t.args) + ")"
    raise TypeError(t)


def _domain_text(d) -> str:
    if isinstance(d, Range):
        return f"range({term_text(d.lo)}, {term_text(d.hi)})"
    if isinstance(d, Relevant):
        return f"relevant_indices({d.symbol})"
    return term_text(d)


def _rule_lines(r, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(r, Assign):
        return [f"{pad}{term_text(r.target)} := {term_text(r.value)}"]
    if isinstance(r, If):
        return [f"{pad}if {term_text(r.cond)} then"] + _rule_lines(r.then, depth + 1)
    if isinstance(r, Par):
        if not r.rules:
            return [f"{pad}skip"]
        lines = [f"{pad}par {{"]
        for s in r.rules:
            lines += _rule_lines(s, depth + 1)
        return lines + [f"{pad}}}"]
    if isinstance(r, Choose):
        lines = [f"{pad}choose {{"]
        for i, s in enumerate(r.rules):
            if i:
                lines.append(f"{pad}|")
            lines += _rule_lines(s, depth + 1)
        return lines + [f"{pad}}}"]
    if isinstance(r, Let):
        return [f"{pad}let {r.var} = {term_text(r.term)} in"] + _rule_lines(r.body, depth + 1)
    if isinstance(r, Forall):
        return [f"{pad}forall {r.var} in {_domain_text(r.domain)} do"] + _rule_lines(
            r.body, depth + 1
        )
    if isinstance(r, Call):
        args = ", ".join(term_text(a) for a in r.args)
        out = f"{term_text(r.output)} <- " if r.output is not None else ""
        return [f"{pad}call {out}{r.rule}({args})"]
    if isinstance(r, AmbCaller):
        return [f"{pad}as caller {{"] + _rule_lines(r.body, depth + 1) + [f"{pad}}}"]
    raise TypeError(r)


def rule_text(r) -> str:
    return "\n".join(_rule_lines(r, 0))


def pretty_print(program: Program) -> str:
    out: list[str] = []
    for name, arity in program.shared.items():
        out.append(f"shared {name}/{arity}")
    for name in program.observe:
        out.append(f"observe {name}")
    for aname, rname in program.agents:
        out.append(f"agent {aname} runs {rname}")
    if out:
        out.append("")
    for decl in program.rules.values():
        head = "main rule" if decl.name == program.main else "rule"
        sig = f"{head} {decl.name}(" + ", ".join(decl.params) + ")"
        if decl.output:
            sig += f" -> {decl.output}"
        out.append(sig + " {")
        out += _rule_lines(decl.body, 1)
        out.append("}")
        out.append("")
    return "\n".join(out).rstrip("\n") + "\n"
