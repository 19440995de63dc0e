"""Update-set families of rules.

``delta(rule, state, env)`` returns the finite family of *effects* a rule
yields in a state.  An :class:`Effect` is an update set together with the
call requests issued in the same step; the runtime turns each request into a
fresh agent when the step is committed, so ``delta`` itself stays pure.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Protocol

from .state import Isomorphism, Location, State, Update, is_trivial
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
    Range,
    RegPred,
    Relevant,
    Var,
    domain_terms,
    expand_lets,
    free_vars_term,
    sub_rules,
    subterm_closure,
    walk_terms,
)
from .values import AgentId, Value, apply_background, vkey


class SpecificationError(Exception):
    """A rule or term that cannot be evaluated (unbound variable, bad arity)."""


class RegistryView(Protocol):
    def active(self, agent: AgentId) -> bool: ...

    def waiting_concurrent(self, agent: AgentId) -> bool: ...

    def caller(self, agent: AgentId) -> Optional[AgentId]: ...


@dataclass(frozen=True)
class Env:
    """Variable bindings plus the ambient terms are evaluated in.

    ``agent`` is the agent executing the rule; it differs from ``ambient``
    only inside an ``as caller`` block.
    """

    ambient: Optional[AgentId]
    vars: Mapping[str, Value] = field(default_factory=dict)
    registry: Any = None
    agent: Optional[AgentId] = None

    def bind(self, name: str, value: Value) -> "Env":
        v = dict(self.vars)
        v[name] = value
        return Env(self.ambient, v, self.registry, self.agent)

    @property
    def executor(self) -> Optional[AgentId]:
        return self.agent if self.agent is not None else self.ambient


@dataclass(frozen=True, eq=False)
class CallRequest:
    rule: str
    args: tuple
    output: Optional[Location]
    caller: Optional[AgentId]

    def key(self) -> tuple:
        out = None if self.output is None else self.output.key()
        caller = None if self.caller is None else vkey(self.caller)
        return (self.rule, tuple(vkey(a) for a in self.args), out is None, out or (), caller or ())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CallRequest) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def rename(self, iso: Isomorphism) -> "CallRequest":
        return CallRequest(
            self.rule,
            tuple(iso.value(a) for a in self.args),
            None if self.output is None else iso.location(self.output),
            None if self.caller is None else iso.value(self.caller),
        )


@dataclass(frozen=True, eq=False)
class Effect:
    updates: frozenset = frozenset()
    calls: tuple = ()

    def __post_init__(self) -> None:
        calls = sorted(((c.key(), c) for c in self.calls), key=lambda kc: kc[0])
        object.__setattr__(self, "calls", tuple(c for _, c in calls))
        k = (tuple(sorted(u.key() for u in self.updates)), tuple(k for k, _ in calls))
        object.__setattr__(self, "_key", k)
        object.__setattr__(self, "_hash", hash(k))

    def key(self) -> tuple:
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Effect) and self._key == other._key

    def __hash__(self) -> int:
        return self._hash

    def __or__(self, other: "Effect") -> "Effect":
        return Effect(self.updates | other.updates, self.calls + other.calls)

    def is_trivial_in(self, state: State) -> bool:
        return not self.calls and all(is_trivial(state, u) for u in self.updates)

    def rename(self, iso: Isomorphism) -> "Effect":
        return Effect(iso.update_set(self.updates), tuple(c.rename(iso) for c in self.calls))

    def __repr__(self) -> str:
        parts = [repr(u) for u in sorted(self.updates)]
        parts += [f"call {c.rule}{c.args}" for c in self.calls]
        return "{" + ", ".join(parts) + "}"


NOOP = Effect()
NOOP_FAMILY = frozenset({NOOP})


def _ambient_for(state: State, env: Env, symbol: str) -> Optional[AgentId]:
    return None if symbol in state.signature.shared else env.ambient


def location_of(state: State, env: Env, term: App) -> Location:
    args = tuple(eval_in(state, env, a) for a in term.args)
    return state.resolve(_ambient_for(state, env, term.symbol), term.symbol, args)


def eval_in(state: State, env: Env, term) -> Value:
    t = type(term)
    if t is App:
        return state.get(location_of(state, env, term))
    if t is Op:
        return apply_background(term.name, [eval_in(state, env, a) for a in term.args])
    if t is Const:
        return term.value
    return _eval_slow(state, env, term)


def _eval_slow(state: State, env: Env, term) -> Value:
    if isinstance(term, Const):
        return term.value
    if isinstance(term, Var):
        try:
            return env.vars[term.name]
        except KeyError:
            raise SpecificationError(f"unbound variable {term.name}") from None
    if isinstance(term, App):
        return state.get(location_of(state, env, term))
    if isinstance(term, Op):
        return apply_background(term.name, [eval_in(state, env, a) for a in term.args])
    if isinstance(term, ListLit):
        return tuple(eval_in(state, env, a) for a in term.items)
    if isinstance(term, RegPred):
        reg = env.registry
        if reg is None or env.ambient is None:
            raise SpecificationError(f"{term.name} needs an agent registry")
        if term.name == "active":
            return reg.active(env.ambient)
        return reg.waiting_concurrent(env.ambient)
    raise TypeError(f"not a term: {term!r}")


def eval_term(state: State, ambient: Optional[AgentId], term, env: Env | None = None) -> Value:
    """Value of ``term`` in ``state`` seen from ``ambient``."""
    if env is None:
        env = Env(ambient)
    elif env.ambient != ambient:
        env = Env(ambient, env.vars, env.registry, env.agent)
    return eval_in(state, env, term)


def domain_values(state: State, env: Env, dom) -> list:
    if isinstance(dom, Range):
        lo, hi = eval_in(state, env, dom.lo), eval_in(state, env, dom.hi)
        if type(lo) is not int or type(hi) is not int:
            return []
        return list(range(lo, hi + 1))
    if isinstance(dom, Relevant):
        amb = _ambient_for(state, env, dom.symbol)
        out = {}
        for loc in state.store:
            if loc.symbol == dom.symbol and loc.ambient == amb:
                v = loc.args[0] if len(loc.args) == 1 else loc.args
                out[vkey(v)] = v
        return [out[k] for k in sorted(out)]
    v = eval_in(state, env, dom)
    if not isinstance(v, tuple):
        return []
    uniq = {}
    for x in v:
        uniq.setdefault(vkey(x), x)
    return list(uniq.values())


def _par(families: Iterable[frozenset]) -> frozenset:
    out = NOOP_FAMILY
    for fam in families:
        if fam == NOOP_FAMILY:
            continue
        if out == NOOP_FAMILY:
            out = fam
        else:
            out = frozenset(a | b for a in out for b in fam)
    return out


def delta(rule, state: State, env: Env) -> frozenset:
    """The family of effects ``rule`` yields in ``state``; never empty."""
    if isinstance(rule, Assign):
        loc = location_of(state, env, rule.target)
        return frozenset({Effect(frozenset({Update(loc, eval_in(state, env, rule.value))}))})
    if isinstance(rule, If):
        if eval_in(state, env, rule.cond) is True:
            return delta(rule.then, state, env)
        return NOOP_FAMILY
    if isinstance(rule, Par):
        return _par(delta(r, state, env) for r in rule.rules)
    if isinstance(rule, Choose):
        if not rule.rules:
            return NOOP_FAMILY
        return frozenset().union(*(delta(r, state, env) for r in rule.rules))
    if isinstance(rule, Let):
        return delta(rule.body, state, env.bind(rule.var, eval_in(state, env, rule.term)))
    if isinstance(rule, Forall):
        values = domain_values(state, env, rule.domain)
        return _par(delta(rule.body, state, env.bind(rule.var, v)) for v in values)
    if isinstance(rule, Call):
        args = tuple(eval_in(state, env, a) for a in rule.args)
        out = None if rule.output is None else location_of(state, env, rule.output)
        return frozenset({Effect(calls=(CallRequest(rule.rule, args, out, env.ambient),))})
    if isinstance(rule, AmbCaller):
        if env.registry is None:
            raise SpecificationError("as caller needs an agent registry")
        caller = env.registry.caller(env.executor)
        inner = Env(caller, env.vars, env.registry, env.executor)
        return delta(rule.body, state, inner)
    raise TypeError(f"not a rule: {rule!r}")


def family_sorted(family: Iterable[Effect]) -> list[Effect]:
    """Deterministic order of a family, used for seeded and scripted choices."""
    return sorted(family, key=Effect.key)


def rename_family(iso: Isomorphism, family: Iterable[Effect]) -> frozenset:
    return frozenset(e.rename(iso) for e in family)


def coincide(rule, s1: State, s2: State, env: Env) -> bool:
    """Do ``s1`` and ``s2`` agree on the witness terms of ``rule``?

    Terms under a Forall are compared at every binding of its variable, once
    both states yield the same domain.  Without Forall this is agreement on
    the ground terms of ``read_terms_of``.
    """
    return _agree(expand_lets(rule), s1, s2, env)


def _same_terms(terms, s1: State, s2: State, env: Env) -> bool:
    bound = env.vars.keys()
    for t in subterm_closure(terms):
        if free_vars_term(t) - bound or any(isinstance(x, RegPred) for x in walk_terms(t)):
            continue
        if vkey(eval_in(s1, env, t)) != vkey(eval_in(s2, env, t)):
            return False
    return True


def _agree(r, s1: State, s2: State, env: Env) -> bool:
    if isinstance(r, Assign):
        return _same_terms(r.target.args + (r.value,), s1, s2, env)
    if isinstance(r, If):
        return _same_terms([r.cond], s1, s2, env) and _agree(r.then, s1, s2, env)
    if isinstance(r, Call):
        return _same_terms((r.output.args if r.output else ()) + r.args, s1, s2, env)
    if isinstance(r, Forall):
        if not _same_terms(domain_terms(r.domain), s1, s2, env):
            return False
        dom = domain_values(s1, env, r.domain)
        if [vkey(v) for v in dom] != [vkey(v) for v in domain_values(s2, env, r.domain)]:
            return False
        return all(_agree(r.body, s1, s2, env.bind(r.var, v)) for v in dom)
    return all(_agree(x, s1, s2, env) for x in sub_rules(r))


def witness_check(rule, s1: State, s2: State, env: Env) -> bool:
    """Bounded exploration: coincidence on the witness implies equal families."""
    if not coincide(rule, s1, s2, env):
        return True
    return delta(rule, s1, env) == delta(rule, s2, env)


def call_updates(
    request: CallRequest,
    callee_params: tuple,
    callee_output: Optional[str],
    fresh: AgentId,
) -> tuple[frozenset, dict]:
    """Materialise a call: the callee's input updates and its output alias.

    Returns the update set initialising ``fresh``'s input locations with the
    caller-evaluated argument values, and the alias entry mapping the callee's
    output slot to the caller's expected output location.
    """
    ups = frozenset(
        Update(Location(fresh, p, ()), v) for p, v in zip(callee_params, request.args)
    )
    aliases = {}
    if callee_output is not None and request.output is not None:
        aliases[(fresh, callee_output)] = request.output
    return ups, aliases
