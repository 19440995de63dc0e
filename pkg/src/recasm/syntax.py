"""Abstract syntax of recursive ASM programs and syntactic analyses."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Optional, Union

from .state import Signature
from .values import Value, vkey

# --- terms -----------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True, eq=False)
class Const:
    value: Value

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Const) and vkey(self.value) == vkey(other.value)

    def __hash__(self) -> int:
        return hash(("Const", vkey(self.value)))


@dataclass(frozen=True)
class App:
    """Application of a signature symbol; 0-ary symbols have ``args == ()``."""

    symbol: str
    args: tuple = ()


@dataclass(frozen=True)
class Op:
    """Application of a background operation."""

    name: str
    args: tuple = ()


@dataclass(frozen=True)
class ListLit:
    items: tuple = ()


@dataclass(frozen=True)
class RegPred:
    """``active`` / ``waiting`` of the executing agent (engine-generated rules only)."""

    name: str


Term = Union[Var, Const, App, Op, ListLit, RegPred]


@dataclass(frozen=True)
class Span:
    line: int
    col: int


# --- rules -----------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    target: App
    value: Term


@dataclass(frozen=True)
class If:
    cond: Term
    then: "Rule"


@dataclass(frozen=True)
class Par:
    rules: tuple = ()


@dataclass(frozen=True)
class Choose:
    rules: tuple = ()


@dataclass(frozen=True)
class Let:
    var: str
    term: Term
    body: "Rule"


@dataclass(frozen=True)
class Call:
    output: Optional[App]
    rule: str
    args: tuple = ()
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Range:
    lo: Term
    hi: Term


@dataclass(frozen=True)
class Relevant:
    """The argument tuples at which a location family is currently defined."""

    symbol: str


Domain = Union[Range, Relevant, Term]


@dataclass(frozen=True)
class Forall:
    var: str
    domain: Domain
    body: "Rule"


@dataclass(frozen=True)
class AmbCaller:
    """Run ``body`` in the ambient of the executing agent's caller."""

    body: "Rule"


Rule = Union[Assign, If, Par, Choose, Let, Call, Forall, AmbCaller]

SKIP = Par(())


@dataclass(frozen=True)
class RuleDecl:
    name: str
    params: tuple = ()
    output: Optional[str] = None
    body: Rule = SKIP
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Program:
    rules: Mapping[str, RuleDecl]
    main: Optional[str] = None
    shared: Mapping[str, int] = field(default_factory=dict)
    observe: tuple = ()
    agents: tuple = ()  # static systems: ((agent-name, rule-name), ...)
    arities: Mapping[str, int] = field(default_factory=dict, compare=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Program):
            return NotImplemented
        return (
            list(self.rules.items()) == list(other.rules.items())
            and self.main == other.main
            and dict(self.shared) == dict(other.shared)
            and self.observe == other.observe
            and self.agents == other.agents
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def signature(self) -> Signature:
        """Program-wide view: shared symbols plus every other symbol as local."""
        syms = {n: (a, "local") for n, a in self.arities.items()}
        syms.update({n: (a, "shared") for n, a in self.shared.items()})
        return Signature(syms)

    def rule_signature(self, name: str) -> Signature:
        decl = self.rules[name]
        syms: dict[str, tuple[int, str]] = {}
        for sym in sorted(symbols_of(decl.body)):
            kind = "shared" if sym in self.shared else "local"
            syms[sym] = (self.arities.get(sym, 0), kind)
        for p in decl.params:
            syms[p] = (0, "input")
        if decl.output:
            syms[decl.output] = (0, "output")
        return Signature(syms)

    def _memo(self) -> dict:
        # rules are never mutated after construction, so derived facts can be kept
        return self.__dict__.setdefault("_derived", {})

    def is_delegate(self, name: str) -> bool:
        memo = self._memo()
        key = ("delegate", name)
        if key not in memo:
            memo[key] = any(isinstance(r, AmbCaller) for r in walk_rules(self.rules[name].body))
        return memo[key]

    def effective_body(self, name: str) -> tuple[Rule, bool]:
        """Body used for fixpoint termination of an agent running ``name``.

        A rule whose whole body calls a delegate is judged by the rule the
        delegate runs on its behalf.  Returns ``(body, via_delegate)``.
        """
        memo = self._memo()
        key = ("effective", name)
        if key in memo:
            return memo[key]
        body = self.rules[name].body
        out = (body, False)
        if isinstance(body, Call) and body.rule in self.rules and self.is_delegate(body.rule):
            for r in walk_rules(self.rules[body.rule].body):
                if isinstance(r, AmbCaller):
                    out = (r.body, True)
                    break
        memo[key] = out
        return out

    @property
    def branching_bound(self) -> int:
        """Static bound on callees per step: the most call sites of any rule."""
        if not self.rules:
            return 1
        return max(1, max(count_calls(d.body) for d in self.rules.values()))


# --- traversal -------------------------------------------------------------


def sub_rules(r: Rule) -> tuple:
    if isinstance(r, (Par, Choose)):
        return r.rules
    if isinstance(r, (If, Let, Forall, AmbCaller)):
        return (r.then,) if isinstance(r, If) else (r.body,)
    return ()


def walk_rules(r: Rule) -> Iterator[Rule]:
    yield r
    for s in sub_rules(r):
        yield from walk_rules(s)


def sub_terms(t: Term) -> tuple:
    if isinstance(t, (App, Op)):
        return t.args
    if isinstance(t, ListLit):
        return t.items
    return ()


def walk_terms(t: Term) -> Iterator[Term]:
    yield t
    for s in sub_terms(t):
        yield from walk_terms(s)


def domain_terms(d: Domain) -> tuple:
    if isinstance(d, Range):
        return (d.lo, d.hi)
    if isinstance(d, Relevant):
        return ()
    return (d,)


def rule_terms(r: Rule) -> tuple:
    """Terms occurring directly in ``r`` (not in sub-rules)."""
    if isinstance(r, Assign):
        return (r.target, r.value)
    if isinstance(r, If):
        return (r.cond,)
    if isinstance(r, Let):
        return (r.term,)
    if isinstance(r, Call):
        return ((r.output,) if r.output else ()) + r.args
    if isinstance(r, Forall):
        return domain_terms(r.domain)
    return ()


def symbols_of(r: Rule) -> set[str]:
    out: set[str] = set()
    for node in walk_rules(r):
        for t in rule_terms(node):
            for s in walk_terms(t):
                if isinstance(s, App):
                    out.add(s.symbol)
        if isinstance(node, Forall) and isinstance(node.domain, Relevant):
            out.add(node.domain.symbol)
    return out


def count_calls(r: Rule) -> int:
    return sum(1 for n in walk_rules(r) if isinstance(n, Call))


def free_vars_term(t: Term) -> set[str]:
    return {s.name for s in walk_terms(t) if isinstance(s, Var)}


def free_vars(r: Rule) -> set[str]:
    if isinstance(r, Let):
        return free_vars_term(r.term) | (free_vars(r.body) - {r.var})
    if isinstance(r, Forall):
        dom = set().union(*(free_vars_term(t) for t in domain_terms(r.domain)))
        return dom | (free_vars(r.body) - {r.var})
    out: set[str] = set()
    for t in rule_terms(r):
        out |= free_vars_term(t)
    for s in sub_rules(r):
        out |= free_vars(s)
    return out


def subst_term(t: Term, name: str, by: Term) -> Term:
    if isinstance(t, Var):
        return by if t.name == name else t
    if isinstance(t, App):
        return App(t.symbol, tuple(subst_term(a, name, by) for a in t.args))
    if isinstance(t, Op):
        return Op(t.name, tuple(subst_term(a, name, by) for a in t.args))
    if isinstance(t, ListLit):
        return ListLit(tuple(subst_term(a, name, by) for a in t.items))
    return t


def subst_rule(r: Rule, name: str, by: Term) -> Rule:
    """Capture-avoiding enough for our binders: inner rebinding stops substitution."""
    st = lambda t: subst_term(t, name, by)  # noqa: E731
    if isinstance(r, Assign):
        return Assign(st(r.target), st(r.value))
    if isinstance(r, If):
        return If(st(r.cond), subst_rule(r.then, name, by))
    if isinstance(r, Par):
        return Par(tuple(subst_rule(s, name, by) for s in r.rules))
    if isinstance(r, Choose):
        return Choose(tuple(subst_rule(s, name, by) for s in r.rules))
    if isinstance(r, Let):
        body = r.body if r.var == name else subst_rule(r.body, name, by)
        return Let(r.var, st(r.term), body)
    if isinstance(r, Call):
        out = st(r.output) if r.output else None
        return replace(r, output=out, args=tuple(st(a) for a in r.args))
    if isinstance(r, Forall):
        d = r.domain
        if isinstance(d, Range):
            d = Range(st(d.lo), st(d.hi))
        elif not isinstance(d, Relevant):
            d = st(d)
        body = r.body if r.var == name else subst_rule(r.body, name, by)
        return Forall(r.var, d, body)
    if isinstance(r, AmbCaller):
        return AmbCaller(subst_rule(r.body, name, by))
    raise TypeError(r)


def expand_lets(r: Rule) -> Rule:
    """Replace every ``LET x = t IN body`` by ``body[t/x]``."""
    if isinstance(r, Let):
        return expand_lets(subst_rule(r.body, r.var, r.term))
    if isinstance(r, If):
        return If(r.cond, expand_lets(r.then))
    if isinstance(r, Par):
        return Par(tuple(expand_lets(s) for s in r.rules))
    if isinstance(r, Choose):
        return Choose(tuple(expand_lets(s) for s in r.rules))
    if isinstance(r, Forall):
        return Forall(r.var, r.domain, expand_lets(r.body))
    if isinstance(r, AmbCaller):
        return AmbCaller(expand_lets(r.body))
    return r


def subterm_closure(terms) -> set:
    out: set = set()
    for t in terms:
        out.update(walk_terms(t))
    return out


def _read_terms(r: Rule) -> set:
    if isinstance(r, Assign):
        return subterm_closure(r.target.args + (r.value,))
    if isinstance(r, If):
        return subterm_closure([r.cond]) | _read_terms(r.then)
    if isinstance(r, Call):
        out_args = r.output.args if r.output else ()
        return subterm_closure(out_args + r.args)
    if isinstance(r, Forall):
        return subterm_closure(domain_terms(r.domain)) | _read_terms(r.body)
    out: set = set()
    for s in sub_rules(r):
        out |= _read_terms(s)
    return out


def read_terms_of(r: Rule) -> frozenset:
    """Syntactic bounded-exploration witness: the subterm-closed read terms.

    Let-bound variables are replaced by their defining terms first, so that
    the witness consists of ground terms wherever no Forall binds a variable.
    """
    return frozenset(_read_terms(expand_lets(r)))


def is_ground(t: Term) -> bool:
    return not free_vars_term(t) and not any(isinstance(s, RegPred) for s in walk_terms(t))
